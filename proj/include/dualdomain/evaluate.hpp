#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dualdomain/dataset.hpp"
#include "dualdomain/kspace.hpp"
#include "dualdomain/metrics.hpp"
#include "dualdomain/threads.hpp"

namespace dualdomain {

struct SliceMetrics {
  std::string subject_id;
  int slice_index = 0;
  double nrmse = 0.0;
  double ssim = 0.0;
  double psnr = 0.0;
};

struct MetricAggregate {
  double mean = 0.0;
  double std = 0.0; // sample standard deviation
};

struct EvalReport {
  std::string model_name;
  double acceleration = 0.0;
  std::vector<SliceMetrics> slices;
  // aggregates keyed "nrmse" / "ssim" / "psnr"; both averaging conventions
  std::map<std::string, MetricAggregate> per_slice;
  std::map<std::string, MetricAggregate> per_volume;
  std::vector<double> nrmse_by_slice_index; // slice-position profile
};

namespace detail {

inline MetricAggregate aggregate(const std::vector<double>& v) {
  MetricAggregate a;
  if (v.empty()) return a;
  for (double x : v) a.mean += x;
  a.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double sq = 0.0;
    for (double x : v) sq += (x - a.mean) * (x - a.mean);
    a.std = std::sqrt(sq / static_cast<double>(v.size() - 1));
  }
  return a;
}

} // namespace detail

/// A reconstruction method under evaluation. It sees the undersampled
/// k-space; the fully sampled slice is supplied so the gold-standard
/// reference itself can be scored as a method (the all-zeros NRMSE mode).
using ReconFn = std::function<MagnitudeImage(const ComplexKSpace& undersampled,
                                             const ComplexKSpace& full)>;

/// Runs a reconstruction method over the given volumes at one undersampling
/// mask and scores every slice against the fully sampled magnitude reference.
/// Slices evaluate in parallel; reductions run in fixed index order.
inline EvalReport evaluate(const std::string& model_name, const ReconFn& recon,
                           const std::vector<const Volume*>& volumes,
                           const SamplingMask& mask, double acceleration) {
  if (volumes.empty())
    raise(ErrorKind::invalid_input, "evaluate: no volumes");
  struct Item {
    const Volume* vol;
    int slice;
  };
  std::vector<Item> items;
  for (const Volume* v : volumes)
    for (int s = 0; s < static_cast<int>(v->slices.size()); ++s)
      items.push_back({v, s});

  EvalReport report;
  report.model_name = model_name;
  report.acceleration = acceleration;
  report.slices.resize(items.size());

  parallel_for(static_cast<int64_t>(items.size()), [&](int64_t b, int64_t e) {
    for (int64_t i = b; i < e; ++i) {
      const auto& item = items[static_cast<size_t>(i)];
      const ComplexKSpace& full = item.vol->slices[item.slice];
      const MagnitudeImage reference = magnitude(ifft2c(full));
      const MagnitudeImage fhat = recon(apply_mask(full, mask), full);
      if (!fhat.same_shape(reference))
        raise(ErrorKind::invalid_input,
              "evaluate: reconstruction shape differs from reference");
      SliceMetrics& m = report.slices[static_cast<size_t>(i)];
      m.subject_id = item.vol->subject_id;
      m.slice_index = item.slice;
      m.nrmse = nrmse(fhat, reference);
      m.ssim = ssim(fhat, reference);
      m.psnr = psnr(fhat, reference);
    }
  });

  // per-slice aggregates
  std::vector<double> ns, ss, ps;
  for (const auto& m : report.slices) {
    ns.push_back(m.nrmse);
    ss.push_back(m.ssim);
    ps.push_back(m.psnr);
  }
  report.per_slice["nrmse"] = detail::aggregate(ns);
  report.per_slice["ssim"] = detail::aggregate(ss);
  report.per_slice["psnr"] = detail::aggregate(ps);

  // per-volume aggregates: mean of per-volume means
  std::vector<double> vn, vs, vp;
  for (const Volume* v : volumes) {
    std::vector<double> n1, s1, p1;
    for (const auto& m : report.slices)
      if (m.subject_id == v->subject_id) {
        n1.push_back(m.nrmse);
        s1.push_back(m.ssim);
        p1.push_back(m.psnr);
      }
    vn.push_back(detail::aggregate(n1).mean);
    vs.push_back(detail::aggregate(s1).mean);
    vp.push_back(detail::aggregate(p1).mean);
  }
  report.per_volume["nrmse"] = detail::aggregate(vn);
  report.per_volume["ssim"] = detail::aggregate(vs);
  report.per_volume["psnr"] = detail::aggregate(vp);

  // slice-position NRMSE profile (assumes equal slice counts per volume)
  const int num_slices = static_cast<int>(volumes.front()->slices.size());
  report.nrmse_by_slice_index.assign(static_cast<size_t>(num_slices), 0.0);
  std::vector<int> counts(static_cast<size_t>(num_slices), 0);
  for (const auto& m : report.slices)
    if (m.slice_index < num_slices) {
      report.nrmse_by_slice_index[m.slice_index] += m.nrmse;
      ++counts[m.slice_index];
    }
  for (int s = 0; s < num_slices; ++s)
    if (counts[s] > 0) report.nrmse_by_slice_index[s] /= counts[s];

  return report;
}

// serialization ---------------------------------------------------------------

inline void write_report_csv(const EvalReport& report,
                             const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) raise(ErrorKind::io, "cannot write report: " + path.string());
  f << "subject_id,slice_index,nrmse,ssim,psnr\n";
  char buf[200];
  for (const auto& m : report.slices) {
    std::snprintf(buf, sizeof buf, "%s,%d,%.9g,%.9g,%.9g\n",
                  m.subject_id.c_str(), m.slice_index, m.nrmse, m.ssim, m.psnr);
    f << buf;
  }
}

inline nlohmann::json report_aggregates_json(const EvalReport& report) {
  auto block = [](const std::map<std::string, MetricAggregate>& agg) {
    return nlohmann::json{
        {"ssim", {{"mean", agg.at("ssim").mean}, {"std", agg.at("ssim").std}}},
        {"nrmse_percent",
         {{"mean", 100.0 * agg.at("nrmse").mean},
          {"std", 100.0 * agg.at("nrmse").std}}},
        {"psnr_db", {{"mean", agg.at("psnr").mean}, {"std", agg.at("psnr").std}}},
    };
  };
  return nlohmann::json{
      {"model", report.model_name},
      {"acceleration", report.acceleration},
      {"num_slices", report.slices.size()},
      {"per_slice", block(report.per_slice)},
      {"per_volume", block(report.per_volume)},
  };
}

inline void write_report_json(const EvalReport& report,
                              const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) raise(ErrorKind::io, "cannot write report: " + path.string());
  f << report_aggregates_json(report).dump(2) << "\n";
}

inline void write_slice_curve_csv(const EvalReport& report,
                                  const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) raise(ErrorKind::io, "cannot write curve: " + path.string());
  f << "slice_index,mean_nrmse\n";
  char buf[64];
  for (size_t s = 0; s < report.nrmse_by_slice_index.size(); ++s) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g\n", s,
                  report.nrmse_by_slice_index[s]);
    f << buf;
  }
}

} // namespace dualdomain
