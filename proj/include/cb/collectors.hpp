#pragma once

// Parsers that turn benchmark output into MetricPoints, and the
// machine-state snapshot taken alongside every run.
//
// Counter-table grammar (frozen):
//
//   region-header := "Region " NAME [ "," anything ]
//   row           := "|" CELL "|" CELL { "|" CELL } "|"
//
// A row belongs to the most recent region header. Its first cell is the
// metric name and its second cell must parse completely as a number;
// every other line (separators, column headers, warnings, blank lines)
// is skipped. A bracketed suffix in the metric name, e.g.
// "DP [MFLOP/s]", becomes the point's unit tag.

#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "cb/types.hpp"

namespace cb::collect {

inline constexpr const char* kCounterMeasurement = "counters";

/// One MetricPoint per (region, metric row), field "value".
/// Throws Error(empty_input) when no metric row is found.
std::vector<MetricPoint> parse_perf_counters(std::string_view text, const JobInstance& job);

class ExtractionRule {
 public:
  /// Throws Error(invalid_argument) unless `pattern` compiles with exactly
  /// one capture group.
  ExtractionRule(std::string pattern, std::string field_name, std::string unit,
                 std::string measurement);

  const std::string& pattern() const noexcept { return pattern_; }
  const std::string& field_name() const noexcept { return field_name_; }
  const std::string& unit() const noexcept { return unit_; }
  const std::string& measurement() const noexcept { return measurement_; }
  const std::regex& regex() const noexcept { return regex_; }

 private:
  std::string pattern_;
  std::string field_name_;
  std::string unit_;
  std::string measurement_;
  std::regex regex_;
};

/// Applies each rule line by line and keeps the first match per rule.
std::vector<MetricPoint> parse_app_output(std::string_view text, const std::vector<ExtractionRule>& rules,
                                          const JobInstance& job);

/// Default rules for the reference LBM workload output.
std::vector<ExtractionRule> lbm_rules();

inline constexpr const char* kUnavailable = "unavailable";

/// Snapshot of the running host. Probes that fail are recorded as
/// "unavailable"; this never throws.
MachineState capture_machine_state();

/// True for environment variables kept in the snapshot: CB_*, OMP_*, PATH.
bool env_allowed(std::string_view name);

/// "key: value" lines, nested keys dot-separated.
std::string serialize(const MachineState& state);
MachineState parse_machine_state(std::string_view text);

}  // namespace cb::collect
