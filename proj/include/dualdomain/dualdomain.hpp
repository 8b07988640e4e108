#pragma once

// Umbrella header for the dualdomain reconstruction toolkit.

#include "dualdomain/checkpoint.hpp"
#include "dualdomain/container.hpp"
#include "dualdomain/dataset.hpp"
#include "dualdomain/evaluate.hpp"
#include "dualdomain/fft.hpp"
#include "dualdomain/hybrid.hpp"
#include "dualdomain/kspace.hpp"
#include "dualdomain/loss.hpp"
#include "dualdomain/metrics.hpp"
#include "dualdomain/phantom.hpp"
#include "dualdomain/png.hpp"
#include "dualdomain/training.hpp"
