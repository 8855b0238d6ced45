#include "cb/config.hpp"

#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "cb/error.hpp"
#include "json.hpp"

namespace cb::config {

namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::invalid_spec, "cannot read " + p.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

template <typename T>
T get(const YAML::Node& node, const char* key, const T& fallback) {
  const YAML::Node v = node[key];
  return v ? v.as<T>() : fallback;
}

std::string text_or_file(const YAML::Node& node, const char* inline_key, const char* file_key,
                         const fs::path& base_dir) {
  if (node[inline_key]) return node[inline_key].as<std::string>();
  if (node[file_key]) return read_text(base_dir / node[file_key].as<std::string>());
  return {};
}

HostProfile parse_host(const std::string& name, const YAML::Node& node) {
  HostProfile h;
  h.hostname = name;
  h.cpu_model = get<std::string>(node, "cpu_model", "");
  h.cores = get<int>(node, "cores", 1);
  h.peak_flops_gflops = get<double>(node, "peak_gflops", 0.0);
  if (const auto bw = node["bandwidths_gbps"]) h.bandwidths_gbps = bw.as<std::map<std::string, double>>();
  if (const auto f = node["fixed_frequency_ghz"]) h.fixed_frequency_ghz = f.as<double>();
  h.validate();
  return h;
}

SpecEntry parse_spec(const YAML::Node& node, const fs::path& base_dir) {
  SpecEntry entry;
  BenchmarkSpec& s = entry.spec;
  s.name = get<std::string>(node, "name", "");
  s.hosts = get<std::vector<std::string>>(node, "hosts", {});
  s.compilers = get<std::vector<std::string>>(node, "compilers", {});
  if (const auto v = node["variants"]) s.variants = v.as<std::map<std::string, std::vector<std::string>>>();
  s.script_template = text_or_file(node, "script", "script_file", base_dir);
  if (s.script_template.empty()) throw Error(Errc::invalid_spec, "spec '" + s.name + "' has no script");
  s.time_limit_minutes = get<int>(node, "time_limit_minutes", 60);
  s.repetitions = get<int>(node, "repetitions", 1);
  if (const auto ex = node["exclusions"]) {
    for (const auto& pair : ex) {
      if (!pair.IsSequence() || pair.size() != 2)
        throw Error(Errc::invalid_spec, "exclusions must be [host, compiler] pairs");
      s.exclusions.emplace_back(pair[0].as<std::string>(), pair[1].as<std::string>());
    }
  }
  s.validate();

  const std::string preset = get<std::string>(node, "extract", "");
  if (preset == "lbm") {
    entry.rules = collect::lbm_rules();
  } else if (!preset.empty()) {
    throw Error(Errc::invalid_spec, "unknown extraction preset '" + preset + "'");
  }
  if (const auto rules = node["rules"]) {
    for (const auto& r : rules) {
      entry.rules.emplace_back(get<std::string>(r, "pattern", ""), get<std::string>(r, "field", ""),
                               get<std::string>(r, "unit", ""), get<std::string>(r, "measurement", ""));
    }
  }
  entry.counters = get<bool>(node, "counters", false);
  return entry;
}

}  // namespace

std::pair<std::string, std::string> split_metric(const std::string& metric) {
  const auto dot = metric.find('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == metric.size())
    throw Error(Errc::invalid_argument, "metric must be <measurement>.<field>, got '" + metric + "'");
  return {metric.substr(0, dot), metric.substr(dot + 1)};
}

Project parse_project(const std::string& yaml_text, const fs::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ParseError(e.mark.pos < 0 ? 0 : static_cast<std::size_t>(e.mark.pos), e.msg);
  }
  if (!root.IsMap()) throw Error(Errc::invalid_spec, "project file must be a mapping");

  Project p;
  try {
    p.name = get<std::string>(root, "project", "");
    if (p.name.empty()) throw Error(Errc::invalid_spec, "project name missing");
    p.base_script = text_or_file(root, "base_script", "base_script_file", base_dir);
    if (p.base_script.empty()) p.base_script = "set -e\n";
    p.bandwidth_kind = get<std::string>(root, "bandwidth_kind", "stream");
    if (const auto hosts = root["hosts"]) {
      for (const auto& kv : hosts) {
        const auto name = kv.first.as<std::string>();
        p.hosts[name] = parse_host(name, kv.second);
      }
    }
    const auto specs = root["specs"];
    if (!specs || !specs.IsSequence() || specs.size() == 0)
      throw Error(Errc::invalid_spec, "project defines no specs");
    for (const auto& s : specs) p.specs.push_back(parse_spec(s, base_dir));
    if (const auto tracked = root["tracked"]) {
      for (const auto& t : tracked) {
        TrackedMetric m;
        std::tie(m.measurement, m.field) = split_metric(get<std::string>(t, "metric", ""));
        const auto dir = get<std::string>(t, "direction", "higher-is-better");
        const auto d = analysis::direction_from_string(dir);
        if (!d) throw Error(Errc::invalid_spec, "unknown direction '" + dir + "'");
        m.regression.direction = *d;
        m.regression.threshold_fraction = get<double>(t, "threshold", 0.10);
        m.regression.window = get<int>(t, "window", 3);
        m.regression.validate();
        p.tracked.push_back(std::move(m));
      }
    }
  } catch (const YAML::Exception& e) {
    throw Error(Errc::invalid_spec, "project file: " + e.msg);
  } catch (const Error& e) {
    if (e.code() == Errc::invalid_argument) throw Error(Errc::invalid_spec, e.what());
    throw;
  }
  return p;
}

Project load_project(const fs::path& file) {
  return parse_project(read_text(file), file.parent_path());
}

std::string hosts_to_json(const HostRegistry& hosts) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [name, h] : hosts) {
    nlohmann::json j = {{"hostname", h.hostname},
                        {"cpu_model", h.cpu_model},
                        {"cores", h.cores},
                        {"peak_flops_gflops", h.peak_flops_gflops},
                        {"bandwidths_gbps", h.bandwidths_gbps}};
    j["fixed_frequency_ghz"] = h.fixed_frequency_ghz ? nlohmann::json(*h.fixed_frequency_ghz) : nlohmann::json();
    doc[name] = std::move(j);
  }
  return doc.dump(2) + "\n";
}

HostRegistry hosts_from_json(const std::string& text) {
  HostRegistry out;
  try {
    const auto doc = nlohmann::json::parse(text);
    for (const auto& [name, j] : doc.items()) {
      HostProfile h;
      h.hostname = j.at("hostname").get<std::string>();
      h.cpu_model = j.value("cpu_model", "");
      h.cores = j.value("cores", 1);
      h.peak_flops_gflops = j.value("peak_flops_gflops", 0.0);
      h.bandwidths_gbps = j.value("bandwidths_gbps", std::map<std::string, double>{});
      if (j.contains("fixed_frequency_ghz") && !j["fixed_frequency_ghz"].is_null())
        h.fixed_frequency_ghz = j["fixed_frequency_ghz"].get<double>();
      h.validate();
      out[name] = std::move(h);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_spec, std::string("host registry: ") + e.what());
  }
  return out;
}

}  // namespace cb::config
