#pragma once

#include <stdexcept>
#include <string>

namespace dualdomain {

enum class ErrorKind {
  invalid_input,         // non-finite data, shape mismatch
  config,                // infeasible or malformed configuration
  io,                    // filesystem failures
  format,                // malformed container files
  statistics,            // empty or zero-variance statistics input
  degenerate_reference,  // constant reference image in a metric
  degenerate_test,       // zero-variance differences in a paired test
  loss_degenerate,       // constant loss reference
  divergence,            // non-finite training loss
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

} // namespace dualdomain
