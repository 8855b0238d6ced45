#include "cb/fixtures.hpp"

#include <fstream>
#include <sstream>

#include "cb/config.hpp"
#include "cb/error.hpp"
#include "json.hpp"

namespace cb::fixtures {

namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::not_found, "missing fixture file " + p.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

ImportSummary import_fixtures(pipeline::Workspace& ws, const fs::path& dir) {
  ImportSummary summary;
  if (fs::exists(dir / "hosts.json")) {
    for (const auto& [name, host] : config::hosts_from_json(read_text(dir / "hosts.json"))) {
      ws.save_host(host);
      ++summary.hosts;
    }
  }

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text(dir / "runs.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, std::string("fixture manifest: ") + e.what());
  }

  for (const auto& entry : manifest.at("runs")) {
    std::vector<MetricPoint> points;
    const std::string data = entry.at("data").get<std::string>();
    std::istringstream lines(read_text(dir / data));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(lines, line)) {
      ++lineno;
      if (line.empty() || line.front() == '#') continue;
      try {
        points.push_back(tsdb::parse_line(line));
        points.back().validate();
      } catch (const Error& e) {
        throw Error(Errc::parse_error, data + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }

    pipeline::PipelineRun run;
    run.run_id = entry.at("run_id").get<std::string>();
    run.project = entry.value("project", "");
    run.commit_id = entry.at("commit_id").get<std::string>();
    run.spec_names = entry.value("spec_names", std::vector<std::string>{});
    run.triggered_at = points.empty() ? 0 : points.front().timestamp;
    run.finished_at = run.triggered_at;
    for (const auto& p : points) {
      if (p.tags.count("commit") && p.tags.at("commit") != run.commit_id)
        throw Error(Errc::invalid_point, data + ": point tagged with commit " + p.tags.at("commit") +
                                             ", expected " + run.commit_id);
      run.triggered_at = std::min(run.triggered_at, p.timestamp);
      run.finished_at = std::max(run.finished_at, p.timestamp);
      if (auto k = p.tags.find("job_key"); k != p.tags.end()) run.job_statuses[k->second] = JobStatus::completed;
    }
    for (const auto& p : points) ws.metrics().ingest(p);
    run.points_ingested = points.size();
    ws.save_run(run);
    summary.points += points.size();
    summary.run_ids.push_back(run.run_id);
  }
  return summary;
}

}  // namespace cb::fixtures
