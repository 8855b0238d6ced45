#pragma once

// Shared value types used across the toolkit.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace cb {

/// UTC nanoseconds since the Unix epoch.
using TimestampNs = std::int64_t;

TimestampNs now_ns();

using TagMap = std::map<std::string, std::string>;
using FieldValue = std::variant<double, std::int64_t, std::string>;
using FieldMap = std::map<std::string, FieldValue>;

/// Numeric view of a field; nullopt for string fields.
std::optional<double> numeric_value(const FieldValue& v);

struct HostProfile {
  std::string hostname;
  std::string cpu_model;
  int cores = 1;
  double peak_flops_gflops = 0.0;
  /// Keyed by benchmark kind: stream, copy, load, triad.
  std::map<std::string, double> bandwidths_gbps;
  std::optional<double> fixed_frequency_ghz;

  /// Throws Error(invalid_spec) when an invariant is violated.
  void validate() const;

  bool operator==(const HostProfile&) const = default;
};

using HostRegistry = std::map<std::string, HostProfile>;

struct BenchmarkSpec {
  std::string name;
  std::vector<std::string> hosts;
  std::vector<std::string> compilers;
  std::map<std::string, std::vector<std::string>> variants;
  std::string script_template;
  int time_limit_minutes = 1;
  int repetitions = 1;
  /// (host, compiler) pairs that are never scheduled.
  std::vector<std::pair<std::string, std::string>> exclusions;

  void validate() const;

  bool operator==(const BenchmarkSpec&) const = default;
};

using VariantAssignment = std::map<std::string, std::string>;

struct JobInstance {
  std::string job_key;
  std::string spec_name;
  std::string host;
  std::string compiler;
  VariantAssignment variant_assignment;
  int repetition = 0;
  std::string commit_id;
  TimestampNs pipeline_timestamp = 0;

  bool operator==(const JobInstance&) const = default;
};

/// The storage atom: one timestamped measurement.
struct MetricPoint {
  std::string measurement;
  TagMap tags;
  FieldMap fields;
  TimestampNs timestamp = 0;

  /// Throws Error(invalid_point) when an invariant is violated.
  void validate() const;

  bool operator==(const MetricPoint&) const = default;
};

struct MachineState {
  std::string hostname;
  std::string os_release;
  std::string cpu_model;
  int core_count = 0;
  std::string governor;
  std::string frequency;
  std::map<std::string, std::string> env_snapshot;
  std::map<std::string, std::string> tool_versions;
  TimestampNs captured_at = 0;

  bool operator==(const MachineState&) const = default;
};

enum class JobStatus { completed, failed, timeout, emitted };

const char* to_string(JobStatus s) noexcept;
std::optional<JobStatus> job_status_from_string(const std::string& s);

struct RunResult {
  std::string job_key;
  JobStatus status = JobStatus::failed;
  std::vector<MetricPoint> metrics;
  std::vector<std::pair<std::string, std::string>> raw_outputs;
  MachineState machine_state;
  double wall_seconds = 0.0;
};

/// Tag keys the toolkit assigns itself; variant names may not shadow them.
bool is_reserved_tag(const std::string& key);

}  // namespace cb
