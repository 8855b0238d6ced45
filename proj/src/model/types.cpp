#include "cb/types.hpp"

#include <chrono>
#include <cmath>
#include <regex>
#include <set>

#include "cb/error.hpp"

namespace cb {

TimestampNs now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::optional<double> numeric_value(const FieldValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  return std::nullopt;
}

namespace {

bool is_identifier(const std::string& s) {
  static const std::regex re("[A-Za-z_][A-Za-z0-9_]*");
  return std::regex_match(s, re);
}

template <typename Container>
bool has_duplicates(const Container& c) {
  std::set<typename Container::value_type> seen(c.begin(), c.end());
  return seen.size() != c.size();
}

}  // namespace

void HostProfile::validate() const {
  if (hostname.empty()) throw Error(Errc::invalid_spec, "host profile without hostname");
  if (cores < 1) throw Error(Errc::invalid_spec, "host " + hostname + ": cores must be >= 1");
  if (!(peak_flops_gflops > 0.0) || !std::isfinite(peak_flops_gflops))
    throw Error(Errc::invalid_spec, "host " + hostname + ": peak_flops_gflops must be > 0");
  for (const auto& [kind, bw] : bandwidths_gbps) {
    if (!(bw > 0.0) || !std::isfinite(bw))
      throw Error(Errc::invalid_spec, "host " + hostname + ": bandwidth '" + kind + "' must be > 0");
  }
  if (fixed_frequency_ghz && !(*fixed_frequency_ghz > 0.0))
    throw Error(Errc::invalid_spec, "host " + hostname + ": fixed frequency must be > 0");
}

void BenchmarkSpec::validate() const {
  static const std::regex name_re("[a-z0-9_-]+");
  if (!std::regex_match(name, name_re))
    throw Error(Errc::invalid_spec, "spec name '" + name + "' must match [a-z0-9_-]+");
  if (hosts.empty()) throw Error(Errc::invalid_spec, name + ": no hosts");
  if (compilers.empty()) throw Error(Errc::invalid_spec, name + ": no compilers");
  if (has_duplicates(hosts)) throw Error(Errc::invalid_spec, name + ": duplicate host");
  if (has_duplicates(compilers)) throw Error(Errc::invalid_spec, name + ": duplicate compiler");
  for (const auto& c : compilers)
    if (c.empty()) throw Error(Errc::invalid_spec, name + ": empty compiler name");
  for (const auto& [key, values] : variants) {
    if (!is_identifier(key))
      throw Error(Errc::invalid_spec, name + ": variant key '" + key + "' is not an identifier");
    if (is_reserved_tag(key))
      throw Error(Errc::invalid_spec, name + ": variant key '" + key + "' is reserved");
    if (values.empty())
      throw Error(Errc::invalid_spec, name + ": variant '" + key + "' has no values");
    if (has_duplicates(values))
      throw Error(Errc::invalid_spec, name + ": variant '" + key + "' has duplicate values");
    for (const auto& v : values) {
      if (v.empty() || v.find('\n') != std::string::npos)
        throw Error(Errc::invalid_spec, name + ": variant '" + key + "' has an invalid value");
    }
  }
  if (time_limit_minutes < 1) throw Error(Errc::invalid_spec, name + ": time_limit_minutes < 1");
  if (repetitions < 1) throw Error(Errc::invalid_spec, name + ": repetitions < 1");
}

void MetricPoint::validate() const {
  if (measurement.empty()) throw Error(Errc::invalid_point, "empty measurement");
  for (const auto& [k, v] : tags) {
    if (k.empty() || v.empty())
      throw Error(Errc::invalid_point, measurement + ": empty tag key or value");
  }
  if (fields.empty()) throw Error(Errc::invalid_point, measurement + ": no fields");
  for (const auto& [k, v] : fields) {
    if (k.empty()) throw Error(Errc::invalid_point, measurement + ": empty field key");
    if (tags.count(k)) throw Error(Errc::invalid_point, measurement + ": '" + k + "' is both tag and field");
    if (const auto* d = std::get_if<double>(&v); d && !std::isfinite(*d))
      throw Error(Errc::invalid_point, measurement + ": field '" + k + "' is not finite");
  }
}

const char* to_string(JobStatus s) noexcept {
  switch (s) {
    case JobStatus::completed: return "completed";
    case JobStatus::failed: return "failed";
    case JobStatus::timeout: return "timeout";
    case JobStatus::emitted: return "emitted";
  }
  return "failed";
}

std::optional<JobStatus> job_status_from_string(const std::string& s) {
  if (s == "completed") return JobStatus::completed;
  if (s == "failed") return JobStatus::failed;
  if (s == "timeout") return JobStatus::timeout;
  if (s == "emitted") return JobStatus::emitted;
  return std::nullopt;
}

bool is_reserved_tag(const std::string& key) {
  static const std::set<std::string> reserved = {"host",   "compiler", "commit", "job_key", "spec",
                                                 "region", "metric",   "unit",   "status", "value"};
  return reserved.count(key) != 0;
}

}  // namespace cb
