#pragma once

// Project files: one YAML document per project describing hosts, specs,
// extraction rules and tracked metrics. See docs/project-file.md.

#include <filesystem>
#include <string>
#include <vector>

#include "cb/analysis.hpp"
#include "cb/collectors.hpp"
#include "cb/types.hpp"

namespace cb::config {

struct SpecEntry {
  BenchmarkSpec spec;
  std::vector<collect::ExtractionRule> rules;
  /// Also parse counter tables from the job log.
  bool counters = false;
};

struct TrackedMetric {
  std::string measurement;
  std::string field;
  analysis::RegressionConfig regression;

  /// "measurement.field"
  std::string name() const { return measurement + "." + field; }
};

struct Project {
  std::string name;
  std::string base_script;
  HostRegistry hosts;
  std::vector<SpecEntry> specs;
  std::vector<TrackedMetric> tracked;
  /// Bandwidth kind used for roofline ceilings.
  std::string bandwidth_kind = "stream";
};

/// Throws ParseError for malformed YAML and Error(invalid_spec) for
/// semantically invalid content. Relative script paths resolve against
/// `base_dir`.
Project parse_project(const std::string& yaml_text, const std::filesystem::path& base_dir);
Project load_project(const std::filesystem::path& file);

/// Splits "measurement.field" at the first dot. Throws Error(invalid_argument).
std::pair<std::string, std::string> split_metric(const std::string& metric);

std::string hosts_to_json(const HostRegistry& hosts);
HostRegistry hosts_from_json(const std::string& text);

}  // namespace cb::config
