#include "cb/collectors.hpp"

#include <gnu/libc-version.h>
#include <sys/utsname.h>
#include <unistd.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <thread>

#include "cb/error.hpp"
#include "cb/model.hpp"

extern char** environ;

namespace cb::collect {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string unit_of(std::string_view metric) {
  const auto open = metric.rfind('[');
  const auto close = metric.rfind(']');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open + 2) return {};
  return std::string(metric.substr(open + 1, close - open - 1));
}

}  // namespace

std::vector<MetricPoint> parse_perf_counters(std::string_view text, const JobInstance& job) {
  const TagMap base = job_tags(job);
  std::vector<MetricPoint> points;
  std::set<std::pair<std::string, std::string>> seen;
  std::string region;

  for (std::string_view raw : split_lines(text)) {
    const std::string_view line = trim(raw);
    if (line.starts_with("Region ")) {
      auto name = line.substr(7);
      name = trim(name.substr(0, name.find(',')));
      region = std::string(name);
      continue;
    }
    if (region.empty() || line.size() < 3 || line.front() != '|' || line.back() != '|') continue;

    const std::string_view inner = line.substr(1, line.size() - 2);
    const auto bar = inner.find('|');
    if (bar == std::string_view::npos) continue;
    const std::string_view name = trim(inner.substr(0, bar));
    std::string_view rest = inner.substr(bar + 1);
    const std::string_view value_cell = rest.substr(0, rest.find('|'));
    const auto value = parse_number(value_cell);
    if (name.empty() || !value) continue;
    if (!seen.emplace(region, std::string(name)).second) continue;

    MetricPoint p;
    p.measurement = kCounterMeasurement;
    p.tags = base;
    p.tags["region"] = region;
    p.tags["metric"] = std::string(name);
    if (auto unit = unit_of(name); !unit.empty()) p.tags["unit"] = unit;
    p.fields["value"] = *value;
    p.timestamp = job.pipeline_timestamp;
    points.push_back(std::move(p));
  }
  if (points.empty()) throw Error(Errc::empty_input, "no counter table found");
  return points;
}

ExtractionRule::ExtractionRule(std::string pattern, std::string field_name, std::string unit,
                               std::string measurement)
    : pattern_(std::move(pattern)),
      field_name_(std::move(field_name)),
      unit_(std::move(unit)),
      measurement_(std::move(measurement)) {
  try {
    regex_ = std::regex(pattern_, std::regex::ECMAScript);
  } catch (const std::regex_error& e) {
    throw Error(Errc::invalid_argument, "rule pattern '" + pattern_ + "' does not compile: " + e.what());
  }
  if (regex_.mark_count() != 1)
    throw Error(Errc::invalid_argument, "rule pattern '" + pattern_ + "' must have exactly one capture group");
  if (field_name_.empty() || measurement_.empty())
    throw Error(Errc::invalid_argument, "rule needs a field name and a measurement");
  if (is_reserved_tag(field_name_))
    throw Error(Errc::invalid_argument, "rule field '" + field_name_ + "' collides with a reserved tag");
}

std::vector<MetricPoint> parse_app_output(std::string_view text, const std::vector<ExtractionRule>& rules,
                                          const JobInstance& job) {
  const TagMap base = job_tags(job);
  const auto lines = split_lines(text);
  std::vector<MetricPoint> points;
  for (const auto& rule : rules) {
    if (base.count(rule.field_name())) continue;
    for (std::string_view line : lines) {
      std::match_results<std::string_view::const_iterator> m;
      if (!std::regex_search(line.begin(), line.end(), m, rule.regex())) continue;
      const auto value = parse_number(m[1].str());
      if (!value) continue;
      MetricPoint p;
      p.measurement = rule.measurement();
      p.tags = base;
      if (!rule.unit().empty()) p.tags["unit"] = rule.unit();
      p.fields[rule.field_name()] = *value;
      p.timestamp = job.pipeline_timestamp;
      points.push_back(std::move(p));
      break;
    }
  }
  return points;
}

std::vector<ExtractionRule> lbm_rules() {
  return {
      ExtractionRule(R"(MLUPS per process:\s+(\d+\.?\d*))", "mlups_per_process", "MLUPS", "mlups"),
      ExtractionRule(R"(time to solution:\s+(\d+\.?\d*))", "seconds", "s", "tts"),
  };
}

bool env_allowed(std::string_view name) {
  return name.starts_with("CB_") || name.starts_with("OMP_") || name == "PATH";
}

namespace {

std::string read_first_line(const char* path) {
  std::ifstream in(path);
  std::string line;
  if (!in || !std::getline(in, line) || trim(line).empty()) return kUnavailable;
  return std::string(trim(line));
}

std::string cpu_model() {
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  while (std::getline(in, line)) {
    if (line.starts_with("model name")) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) return std::string(trim(std::string_view(line).substr(colon + 1)));
    }
  }
  return kUnavailable;
}

std::string os_release() {
  std::string pretty;
  std::ifstream in("/etc/os-release");
  std::string line;
  while (std::getline(in, line)) {
    if (line.starts_with("PRETTY_NAME=")) {
      pretty = line.substr(12);
      if (pretty.size() >= 2 && pretty.front() == '"' && pretty.back() == '"')
        pretty = pretty.substr(1, pretty.size() - 2);
    }
  }
  utsname u{};
  std::string kernel = uname(&u) == 0 ? std::string(u.sysname) + " " + u.release : "";
  if (pretty.empty() && kernel.empty()) return kUnavailable;
  if (pretty.empty()) return kernel;
  if (kernel.empty()) return pretty;
  return pretty + " (" + kernel + ")";
}

std::string escape_value(const std::string& v) {
  std::string out;
  for (char c : v) {
    if (c == '\\') out += "\\\\";
    else if (c == '\n') out += "\\n";
    else if (c == '\r') out += "\\r";
    else out += c;
  }
  return out;
}

std::string unescape_value(std::string_view v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] == '\\' && i + 1 < v.size()) {
      const char n = v[++i];
      out += n == 'n' ? '\n' : n == 'r' ? '\r' : n;
    } else {
      out += v[i];
    }
  }
  return out;
}

}  // namespace

MachineState capture_machine_state() {
  MachineState s;
  char host[256] = {};
  s.hostname = gethostname(host, sizeof host - 1) == 0 && host[0] ? host : kUnavailable;
  s.os_release = os_release();
  s.cpu_model = cpu_model();
  s.core_count = static_cast<int>(std::thread::hardware_concurrency());
  s.governor = read_first_line("/sys/devices/system/cpu/cpu0/cpufreq/scaling_governor");
  const std::string max_khz = read_first_line("/sys/devices/system/cpu/cpu0/cpufreq/cpuinfo_max_freq");
  s.frequency = max_khz == kUnavailable ? kUnavailable : max_khz + " kHz max";
  for (char** env = environ; env && *env; ++env) {
    std::string_view entry(*env);
    const auto eq = entry.find('=');
    if (eq == std::string_view::npos) continue;
    const auto name = entry.substr(0, eq);
    if (env_allowed(name)) s.env_snapshot[std::string(name)] = std::string(entry.substr(eq + 1));
  }
  s.tool_versions["compiler"] = __VERSION__;
  s.tool_versions["libc"] = gnu_get_libc_version();
  utsname u{};
  s.tool_versions["kernel"] = uname(&u) == 0 ? u.release : kUnavailable;
  s.captured_at = now_ns();
  return s;
}

std::string serialize(const MachineState& s) {
  std::string out;
  auto put = [&out](const std::string& key, const std::string& value) {
    out += key;
    out += ": ";
    out += escape_value(value);
    out += '\n';
  };
  put("hostname", s.hostname);
  put("os_release", s.os_release);
  put("cpu_model", s.cpu_model);
  put("core_count", std::to_string(s.core_count));
  put("governor", s.governor);
  put("frequency", s.frequency);
  put("captured_at", std::to_string(s.captured_at));
  for (const auto& [k, v] : s.env_snapshot) put("env." + k, v);
  for (const auto& [k, v] : s.tool_versions) put("tools." + k, v);
  return out;
}

MachineState parse_machine_state(std::string_view text) {
  MachineState s;
  std::size_t offset = 0;
  for (std::string_view line : split_lines(text)) {
    const std::size_t line_offset = offset;
    offset += line.size() + 1;
    if (line.empty()) continue;
    auto sep = line.find(": ");
    std::string_view key;
    std::string value;
    if (sep != std::string_view::npos) {
      key = line.substr(0, sep);
      value = unescape_value(line.substr(sep + 2));
    } else if (line.back() == ':') {
      key = line.substr(0, line.size() - 1);
    } else {
      throw ParseError(line_offset, "machine state line without 'key: value'");
    }
    auto as_int = [&](auto& target) {
      const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), target);
      if (ec != std::errc{} || ptr != value.data() + value.size())
        throw ParseError(line_offset, "expected integer for " + std::string(key));
    };
    if (key == "hostname") s.hostname = value;
    else if (key == "os_release") s.os_release = value;
    else if (key == "cpu_model") s.cpu_model = value;
    else if (key == "core_count") as_int(s.core_count);
    else if (key == "governor") s.governor = value;
    else if (key == "frequency") s.frequency = value;
    else if (key == "captured_at") as_int(s.captured_at);
    else if (key.starts_with("env.")) s.env_snapshot[std::string(key.substr(4))] = value;
    else if (key.starts_with("tools.")) s.tool_versions[std::string(key.substr(6))] = value;
  }
  return s;
}

}  // namespace cb::collect
