#include "cb/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cb/error.hpp"

namespace cb::analysis {

namespace {

double bandwidth_of(const HostProfile& host, const std::string& kind) {
  auto it = host.bandwidths_gbps.find(kind);
  if (it == host.bandwidths_gbps.end())
    throw Error(Errc::unknown_bandwidth_kind,
                "host " + host.hostname + " has no '" + kind + "' bandwidth");
  return it->second;
}

}  // namespace

double roofline_bound(double intensity, const HostProfile& host, const std::string& bandwidth_kind) {
  if (!(intensity >= 0.0)) throw Error(Errc::invalid_argument, "operational intensity must be >= 0");
  const double bw = bandwidth_of(host, bandwidth_kind);
  return std::min(host.peak_flops_gflops, intensity * bw);
}

double roofline_knee(const HostProfile& host, const std::string& bandwidth_kind) {
  return host.peak_flops_gflops / bandwidth_of(host, bandwidth_kind);
}

double mlups_bound(double bandwidth_gbps, double bytes_per_update) {
  if (!(bytes_per_update > 0.0)) throw Error(Errc::invalid_argument, "bytes_per_update must be > 0");
  // GB/s / (B/update) = 1e9 updates/s = 1e3 MLUPS
  return bandwidth_gbps * 1e3 / bytes_per_update;
}

double mlups_bound(const HostProfile& host, const std::string& bandwidth_kind, double bytes_per_update) {
  return mlups_bound(bandwidth_of(host, bandwidth_kind), bytes_per_update);
}

RelativePerformance relative_performance(double measured, double bound) {
  if (!(bound > 0.0)) throw Error(Errc::zero_bound, "bound must be > 0");
  if (!(measured >= 0.0)) throw Error(Errc::invalid_argument, "measured value must be >= 0");
  const double f = measured / bound;
  return {f, f > 1.0};
}

const char* to_string(Category c) noexcept {
  switch (c) {
    case Category::computation: return "computation";
    case Category::synchronization: return "synchronization";
    case Category::communication: return "communication";
  }
  return "computation";
}

std::optional<Category> category_from_string(const std::string& s) {
  for (Category c : kCategories)
    if (s == to_string(c)) return c;
  return std::nullopt;
}

std::vector<TimeShare> time_share(const Durations& durations, const SubstepDurations& substeps) {
  double total = 0.0;
  for (const auto& [cat, secs] : durations) {
    if (!(secs >= 0.0) || !std::isfinite(secs))
      throw Error(Errc::invalid_argument, "durations must be finite and >= 0");
    total += secs;
  }
  if (!(total > 0.0)) throw Error(Errc::zero_total, "total duration is zero");

  std::vector<TimeShare> out;
  for (Category c : kCategories) {
    TimeShare share;
    share.category = c;
    auto it = durations.find(c);
    const double secs = it == durations.end() ? 0.0 : it->second;
    share.fraction = secs / total;
    if (auto sit = substeps.find(c); sit != substeps.end()) {
      double sub_total = 0.0;
      for (const auto& [name, s] : sit->second) {
        if (!(s >= 0.0)) throw Error(Errc::invalid_argument, "substep durations must be >= 0");
        sub_total += s;
        share.substeps[name] = s / total;
      }
      if (std::abs(sub_total - secs) > 1e-9 * std::max(1.0, secs))
        throw Error(Errc::invalid_argument,
                    std::string("substeps of ") + to_string(c) + " do not add up to its duration");
    }
    out.push_back(std::move(share));
  }
  return out;
}

const char* to_string(Direction d) noexcept {
  return d == Direction::higher_is_better ? "higher-is-better" : "lower-is-better";
}

std::optional<Direction> direction_from_string(const std::string& s) {
  if (s == "higher-is-better") return Direction::higher_is_better;
  if (s == "lower-is-better") return Direction::lower_is_better;
  return std::nullopt;
}

void RegressionConfig::validate() const {
  if (window < 2) throw Error(Errc::invalid_argument, "regression window must be >= 2");
  if (!(threshold_fraction > 0.0)) throw Error(Errc::invalid_argument, "threshold must be > 0");
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error(Errc::insufficient_data, "median of empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

RegressionVerdict detect_regression(std::span<const double> series, const RegressionConfig& cfg) {
  cfg.validate();
  const auto window = static_cast<std::size_t>(cfg.window);
  if (series.size() < window + 1)
    throw Error(Errc::insufficient_data, "need at least window + 1 values");

  RegressionVerdict v;
  v.latest = series.back();
  v.baseline = median({series.end() - 1 - window, series.end() - 1});
  const double worse_by = cfg.direction == Direction::higher_is_better ? v.baseline - v.latest
                                                                       : v.latest - v.baseline;
  if (v.baseline != 0.0) {
    v.magnitude = worse_by / std::abs(v.baseline);
  } else {
    v.magnitude = worse_by == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), worse_by);
  }
  v.regression = v.magnitude > cfg.threshold_fraction;
  return v;
}

NumericsCheck verify_numerics(std::span<const double> result, std::span<const double> reference,
                              double tolerance) {
  if (result.size() != reference.size())
    throw Error(Errc::length_mismatch, "result and reference differ in length");
  NumericsCheck check;
  for (std::size_t i = 0; i < result.size(); ++i) {
    const double d = std::abs(result[i] - reference[i]);
    if (std::isnan(d)) {
      check.max_abs_diff = d;
      return check;
    }
    check.max_abs_diff = std::max(check.max_abs_diff, d);
  }
  check.pass = check.max_abs_diff <= tolerance;
  return check;
}

}  // namespace cb::analysis
