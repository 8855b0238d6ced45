#include "cb/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "cb/collectors.hpp"
#include "cb/error.hpp"
#include "cb/lbm.hpp"
#include "cb/model.hpp"
#include "json.hpp"

namespace cb::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_atomic(const fs::path& p, const std::string& data) {
  fs::create_directories(p.parent_path());
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << data;
    if (!out) throw Error(Errc::storage_error, "cannot write " + tmp.string());
  }
  fs::rename(tmp, p);
}

std::string new_run_id() {
  static std::mt19937_64 rng{std::random_device{}()};
  char buf[40];
  std::snprintf(buf, sizeof buf, "run-%016llx", static_cast<unsigned long long>(rng()));
  return buf;
}

TagMap series_key(TagMap tags) {
  tags.erase("job_key");
  tags.erase("commit");
  return tags;
}

std::string variant_label(const TagMap& tags) {
  std::string out;
  for (const auto& [k, v] : tags) {
    if (is_reserved_tag(k)) continue;
    if (!out.empty()) out += ",";
    out += k + "=" + v;
  }
  return out.empty() ? "-" : out;
}

tsdb::Query run_query(const PipelineRun& run, const std::string& measurement) {
  tsdb::Query q;
  q.measurement = measurement;
  q.tag_filters = {{"commit", run.commit_id}};
  q.start = run.triggered_at;
  q.end = run.finished_at + 1;
  return q;
}

struct PendingJob {
  JobInstance instance;
  const config::SpecEntry* entry = nullptr;
  std::string script_text;
  std::optional<jobgen::SubmissionHandle> handle;
  std::string error;
};

}  // namespace

bool PipelineRun::terminal() const {
  return std::all_of(job_statuses.begin(), job_statuses.end(), [](const auto& kv) {
    return kv.second == JobStatus::completed || kv.second == JobStatus::failed ||
           kv.second == JobStatus::timeout || kv.second == JobStatus::emitted;
  });
}

Workspace::Workspace(fs::path root, tsdb::StoreOptions options) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_ / "runs", ec);
  if (ec) throw Error(Errc::store_unavailable, "cannot create data directory " + root_.string());
  metrics_ = std::make_unique<tsdb::Store>(root_ / "tsdb", options);
  records_ = std::make_unique<records::RecordStore>(root_ / "records");
}

HostRegistry Workspace::hosts() const {
  std::lock_guard lock(mutex_);
  const fs::path file = root_ / "hosts.json";
  if (!fs::exists(file)) return {};
  return config::hosts_from_json(read_text(file));
}

void Workspace::save_host(const HostProfile& host) {
  host.validate();
  HostRegistry all = hosts();
  std::lock_guard lock(mutex_);
  all[host.hostname] = host;
  write_atomic(root_ / "hosts.json", config::hosts_to_json(all));
}

void Workspace::save_run(const PipelineRun& run) {
  std::lock_guard lock(mutex_);
  write_atomic(root_ / "runs" / (run.run_id + ".json"), to_json(run));
}

std::optional<PipelineRun> Workspace::run(const std::string& run_id) const {
  std::lock_guard lock(mutex_);
  if (run_id.empty() || run_id.find('/') != std::string::npos || run_id.starts_with(".")) return std::nullopt;
  const fs::path file = root_ / "runs" / (run_id + ".json");
  if (!fs::exists(file)) return std::nullopt;
  return run_from_json(read_text(file));
}

std::vector<PipelineRun> Workspace::runs() const {
  std::lock_guard lock(mutex_);
  std::vector<PipelineRun> out;
  for (const auto& e : fs::directory_iterator(root_ / "runs"))
    if (e.path().extension() == ".json") out.push_back(run_from_json(read_text(e.path())));
  std::sort(out.begin(), out.end(), [](const PipelineRun& a, const PipelineRun& b) {
    return a.triggered_at != b.triggered_at ? a.triggered_at < b.triggered_at : a.run_id < b.run_id;
  });
  return out;
}

PipelineRun run_pipeline(Workspace& ws, const config::Project& project, const std::string& commit_id,
                         const PipelineOptions& options) {
  if (commit_id.empty()) throw Error(Errc::invalid_argument, "commit id must not be empty");
  HostRegistry hosts = ws.hosts();
  for (const auto& [name, h] : project.hosts) {
    auto it = hosts.find(name);
    if (it == hosts.end() || it->second != h) ws.save_host(h);
    hosts[name] = h;
  }

  PipelineRun run;
  run.run_id = new_run_id();
  run.project = project.name;
  run.commit_id = commit_id;
  run.triggered_at = now_ns();

  std::vector<PendingJob> jobs;
  for (const auto& entry : project.specs) {
    run.spec_names.push_back(entry.spec.name);
    for (auto& inst : expand_matrix(entry.spec, commit_id, run.triggered_at, hosts))
      jobs.push_back(PendingJob{std::move(inst), &entry, {}, {}, {}});
  }
  if (jobs.empty()) throw Error(Errc::no_jobs, "specs expand to no jobs");

  auto& rs = ws.records();
  auto& store = ws.metrics();
  const auto collection =
      rs.create_collection("pipeline " + project.name + " @ " + commit_id + " (" + run.run_id + ")");
  run.collection_id = collection.collection_id;

  jobgen::ExecutorConfig ecfg;
  ecfg.kind = options.executor;
  ecfg.max_concurrent = options.max_concurrent;
  ecfg.workdir = ws.root() / "work" / run.run_id;
  ecfg.env = options.env;
  jobgen::Executor executor(ecfg);

  for (auto& job : jobs) {
    try {
      const auto script = jobgen::assemble_script(project.base_script, job.entry->spec.script_template, job.instance,
                                                  job.entry->spec, options.directive_style);
      job.script_text = script.text;
      job.handle = executor.submit(script, job.instance);
    } catch (const Error& e) {
      job.error = e.what();
    }
  }

  std::set<std::string> contributing;
  for (auto& job : jobs) {
    const JobInstance& inst = job.instance;
    jobgen::JobOutcome outcome;
    if (job.handle) {
      outcome = executor.await(*job.handle, std::chrono::minutes(job.entry->spec.time_limit_minutes));
    } else {
      outcome.status = JobStatus::failed;
      outcome.log = "job was not submitted: " + job.error + "\n";
      outcome.started_at = outcome.finished_at = now_ns();
    }
    const MachineState state = collect::capture_machine_state();

    std::vector<MetricPoint> points;
    if (outcome.status == JobStatus::completed) {
      points = collect::parse_app_output(outcome.log, job.entry->rules, inst);
      if (job.entry->counters) {
        try {
          auto counters = collect::parse_perf_counters(outcome.log, inst);
          points.insert(points.end(), counters.begin(), counters.end());
        } catch (const Error& e) {
          if (e.code() != Errc::empty_input) throw;
        }
      }
      if (points.empty()) outcome.status = JobStatus::failed;
    }
    run.job_statuses[inst.job_key] = outcome.status;

    if (outcome.status != JobStatus::emitted) {
      MetricPoint jp;
      jp.measurement = "job";
      jp.tags = job_tags(inst);
      jp.tags["status"] = to_string(outcome.status);
      jp.fields = {{"wall_seconds", outcome.wall_seconds()}, {"exit_code", std::int64_t{outcome.exit_code}}};
      points.push_back(std::move(jp));
    }
    for (auto& p : points) {
      p.timestamp = outcome.finished_at;
      store.ingest(p);
      ++run.points_ingested;
    }

    std::map<std::string, std::string> meta = {{"spec", inst.spec_name},
                                               {"host", inst.host},
                                               {"compiler", inst.compiler},
                                               {"commit", inst.commit_id},
                                               {"job_key", inst.job_key},
                                               {"repetition", std::to_string(inst.repetition)},
                                               {"status", to_string(outcome.status)},
                                               {"run", run.run_id}};
    for (const auto& [k, v] : inst.variant_assignment) meta["variant." + k] = v;
    const std::string short_key = inst.job_key.substr(0, 12);
    const auto job_rec = rs.create_record("job " + inst.spec_name + "/" + short_key,
                                          "Benchmark job on " + inst.host + " with " + inst.compiler, meta, {});
    const auto script_rec = rs.create_record("script " + short_key, "Assembled job script", {{"job_key", inst.job_key}},
                                             {{"job.sh", job.script_text}});
    rs.link_records(script_rec.record_id, job_rec.record_id, records::kLinkScriptOf);
    rs.add_to_collection(run.collection_id, job_rec.record_id);
    rs.add_to_collection(run.collection_id, script_rec.record_id);
    if (outcome.status != JobStatus::emitted) {
      const auto log_rec = rs.create_record("log " + short_key, "Captured stdout and stderr",
                                            {{"job_key", inst.job_key}}, {{"job.log", outcome.log}});
      const auto state_rec = rs.create_record("machine state " + short_key, "Host snapshot taken after the job",
                                              {{"job_key", inst.job_key}, {"hostname", state.hostname}},
                                              {{"machine-state.txt", collect::serialize(state)}});
      rs.link_records(log_rec.record_id, job_rec.record_id, records::kLinkLogOf);
      rs.link_records(state_rec.record_id, job_rec.record_id, records::kLinkStateOf);
      rs.link_records(log_rec.record_id, state_rec.record_id, records::kLinkProducedOn);
      rs.add_to_collection(run.collection_id, log_rec.record_id);
      rs.add_to_collection(run.collection_id, state_rec.record_id);
    }
    if (outcome.status == JobStatus::completed) contributing.insert(job_rec.record_id);
  }
  executor.shutdown();
  run.finished_at = now_ns();

  const auto data = roofline_for_run(ws, run);
  const fs::path plot_dir = ws.root() / "plots" / run.run_id;
  const std::string html = plot::roofline_html(data);
  write_atomic(plot_dir / "roofline.html", html);
  write_atomic(plot_dir / "roofline.svg", plot::roofline_svg(data));
  run.plot_path = (plot_dir / "roofline.html").string();
  const auto plot_rec = rs.create_record("roofline " + run.run_id, "Roofline plot of the pipeline run",
                                         {{"run", run.run_id}, {"commit", commit_id}}, {{"roofline.html", html}});
  rs.add_to_collection(run.collection_id, plot_rec.record_id);
  for (const auto& id : contributing) rs.link_records(plot_rec.record_id, id, records::kLinkPlotOf);

  for (const auto& metric : project.tracked) {
    for (auto& r : compute_regressions(store, metric))
      if (r.latest_commit == commit_id) run.regressions.push_back(std::move(r));
  }
  ws.save_run(run);
  return run;
}

std::vector<RegressionReport> compute_regressions(const tsdb::Store& store, const config::TrackedMetric& metric) {
  metric.regression.validate();
  tsdb::Query q;
  q.measurement = metric.measurement;
  q.field = metric.field;
  const auto result = store.query(q);

  struct CommitValues {
    TimestampNs first_seen = 0;
    std::vector<double> values;
  };
  std::map<TagMap, std::map<std::string, CommitValues>> series;
  for (const auto& group : result) {
    for (const auto& row : group.rows) {
      const auto v = numeric_value(row.fields.at(metric.field));
      const auto commit = row.tags.find("commit");
      if (!v || commit == row.tags.end()) continue;
      auto& cv = series[series_key(row.tags)][commit->second];
      if (cv.values.empty()) cv.first_seen = row.timestamp;
      cv.values.push_back(*v);
    }
  }

  std::vector<RegressionReport> out;
  for (const auto& [key, commits] : series) {
    std::vector<std::pair<TimestampNs, std::string>> order;
    for (const auto& [c, cv] : commits) order.emplace_back(cv.first_seen, c);
    std::sort(order.begin(), order.end());

    std::vector<double> values;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      const auto& vs = commits.at(order[i].second).values;
      values.insert(values.end(), vs.begin(), vs.end());
    }
    const auto& latest = commits.at(order.back().second).values;
    double mean = 0.0;
    for (double v : latest) mean += v;
    mean /= static_cast<double>(latest.size());
    values.push_back(mean);

    RegressionReport r;
    r.metric = metric.name();
    r.group = key;
    r.latest_commit = order.back().second;
    const std::size_t need = static_cast<std::size_t>(metric.regression.window) + 1;
    if (order.size() < 2 || values.size() < need) {
      r.verdict = "insufficient-data";
      r.detail.latest = mean;
    } else {
      const std::span<const double> tail(values.data() + values.size() - need, need);
      r.detail = analysis::detect_regression(tail, metric.regression);
      r.verdict = r.detail.regression ? "regression" : "ok";
    }
    out.push_back(std::move(r));
  }
  return out;
}

plot::RooflineData roofline_for_run(const Workspace& ws, const PipelineRun& run) {
  plot::RooflineData data;
  data.title = "Roofline " + run.project + " @ " + run.commit_id;
  const auto& store = ws.metrics();
  const HostRegistry hosts = ws.hosts();

  std::set<std::string> run_hosts;
  for (const auto& g : store.query(run_query(run, "job")))
    for (const auto& row : g.rows)
      if (auto h = row.tags.find("host"); h != row.tags.end()) run_hosts.insert(h->second);

  // (job_key, region) -> metric -> value
  std::map<std::pair<std::string, std::string>, std::map<std::string, double>> regions;
  std::map<std::pair<std::string, std::string>, TagMap> region_tags;
  for (const auto& g : store.query(run_query(run, collect::kCounterMeasurement))) {
    for (const auto& row : g.rows) {
      const auto key = std::make_pair(row.tags.count("job_key") ? row.tags.at("job_key") : "",
                                      row.tags.count("region") ? row.tags.at("region") : "");
      const auto v = row.fields.count("value") ? numeric_value(row.fields.at("value")) : std::nullopt;
      if (!v || !row.tags.count("metric")) continue;
      regions[key][row.tags.at("metric")] = *v;
      region_tags[key] = row.tags;
      if (auto h = row.tags.find("host"); h != row.tags.end()) run_hosts.insert(h->second);
    }
  }
  for (const auto& [key, metrics] : regions) {
    const auto flops = metrics.find("DP [MFLOP/s]");
    const auto oi = metrics.find("Operational intensity [FLOP/Byte]");
    if (flops == metrics.end() || oi == metrics.end() || oi->second <= 0.0 || flops->second <= 0.0) continue;
    const TagMap& tags = region_tags[key];
    plot::LabeledPoint p;
    p.host = tags.count("host") ? tags.at("host") : "";
    p.series = variant_label(tags);
    p.point.label = key.second + " " + p.series + " (" + key.first.substr(0, 8) + ")";
    p.point.operational_intensity = oi->second;
    p.point.achieved_gflops = flops->second / 1e3;
    data.points.push_back(std::move(p));
  }
  for (const auto& h : run_hosts)
    if (auto it = hosts.find(h); it != hosts.end()) data.hosts.push_back(it->second);
  return data;
}

std::vector<TimeShareEntry> timeshare_for_run(const Workspace& ws, const PipelineRun& run) {
  auto q = run_query(run, "timeshare");
  q.field = "seconds";
  q.group_by = {"host", "benchmark"};
  std::vector<TimeShareEntry> out;
  for (const auto& g : ws.metrics().query(q)) {
    analysis::Durations durations;
    analysis::SubstepDurations substeps;
    std::map<analysis::Category, bool> all_substeps;
    for (const auto& row : g.rows) {
      const auto cat = row.tags.count("category") ? analysis::category_from_string(row.tags.at("category"))
                                                  : std::nullopt;
      const auto v = numeric_value(row.fields.at("seconds"));
      if (!cat || !v) continue;
      durations[*cat] += *v;
      const auto sub = row.tags.find("substep");
      all_substeps.try_emplace(*cat, true);
      if (sub == row.tags.end()) all_substeps[*cat] = false;
      else substeps[*cat][sub->second] += *v;
    }
    for (const auto& [cat, ok] : all_substeps)
      if (!ok) substeps.erase(cat);
    out.push_back(TimeShareEntry{g.tags, analysis::time_share(durations, substeps)});
  }
  return out;
}

std::string report(const Workspace& ws, const PipelineRun& run) {
  std::ostringstream out;
  out << "run      " << run.run_id << "\n"
      << "project  " << run.project << "\n"
      << "commit   " << run.commit_id << "\n";
  std::map<std::string, int> counts;
  for (const auto& [key, status] : run.job_statuses) ++counts[to_string(status)];
  out << "jobs     " << run.job_statuses.size();
  for (const auto& [status, n] : counts) out << "  " << status << "=" << n;
  out << "\n\n";

  char line[512];
  std::snprintf(line, sizeof line, "%-28s %-12s %-10s %-32s %14s %4s\n", "metric", "host", "compiler", "variant",
                "mean", "n");
  out << line;
  for (const auto& measurement : ws.metrics().measurements()) {
    if (measurement == collect::kCounterMeasurement) continue;
    const auto result = ws.metrics().query(run_query(run, measurement));
    std::map<std::tuple<std::string, std::string, std::string, std::string>, std::vector<double>> table;
    for (const auto& g : result) {
      for (const auto& row : g.rows) {
        for (const auto& [field, value] : row.fields) {
          const auto v = numeric_value(value);
          if (!v) continue;
          const auto tag = [&](const char* k) { return row.tags.count(k) ? row.tags.at(k) : std::string("-"); };
          table[{measurement + "." + field, tag("host"), tag("compiler"), variant_label(row.tags)}].push_back(*v);
        }
      }
    }
    for (const auto& [key, values] : table) {
      double sum = 0.0;
      for (double v : values) sum += v;
      std::snprintf(line, sizeof line, "%-28s %-12s %-10s %-32s %14.6g %4zu\n", std::get<0>(key).c_str(),
                    std::get<1>(key).c_str(), std::get<2>(key).c_str(), std::get<3>(key).c_str(),
                    sum / static_cast<double>(values.size()), values.size());
      out << line;
    }
  }
  if (!run.regressions.empty()) {
    out << "\nregressions\n";
    for (const auto& r : run.regressions) {
      std::snprintf(line, sizeof line, "%-28s %-32s %-18s %+8.2f%%\n", r.metric.c_str(), variant_label(r.group).c_str(),
                    r.verdict.c_str(), r.detail.magnitude * 100.0);
      out << line;
    }
  }
  return out.str();
}

namespace {

json regression_json(const RegressionReport& r) {
  return {{"metric", r.metric},
          {"group", r.group},
          {"verdict", r.verdict},
          {"regression", r.detail.regression},
          {"magnitude", r.detail.magnitude},
          {"baseline", r.detail.baseline},
          {"latest", r.detail.latest},
          {"latest_commit", r.latest_commit}};
}

}  // namespace

std::string to_json(const PipelineRun& run) {
  json statuses = json::object();
  for (const auto& [k, s] : run.job_statuses) statuses[k] = to_string(s);
  json regressions = json::array();
  for (const auto& r : run.regressions) regressions.push_back(regression_json(r));
  json doc = {{"run_id", run.run_id},
              {"project", run.project},
              {"commit_id", run.commit_id},
              {"triggered_at", run.triggered_at},
              {"finished_at", run.finished_at},
              {"spec_names", run.spec_names},
              {"job_statuses", statuses},
              {"collection_id", run.collection_id},
              {"points_ingested", run.points_ingested},
              {"plot_path", run.plot_path},
              {"terminal", run.terminal()},
              {"regressions", regressions}};
  return doc.dump(2) + "\n";
}

PipelineRun run_from_json(const std::string& text) {
  PipelineRun run;
  try {
    const auto j = json::parse(text);
    run.run_id = j.at("run_id").get<std::string>();
    run.project = j.value("project", "");
    run.commit_id = j.at("commit_id").get<std::string>();
    run.triggered_at = j.at("triggered_at").get<TimestampNs>();
    run.finished_at = j.at("finished_at").get<TimestampNs>();
    run.spec_names = j.value("spec_names", std::vector<std::string>{});
    const json statuses = j.value("job_statuses", json::object());
    for (const auto& [k, v] : statuses.items()) {
      const auto s = job_status_from_string(v.get<std::string>());
      if (!s) throw Error(Errc::storage_error, "unknown job status " + v.get<std::string>());
      run.job_statuses[k] = *s;
    }
    run.collection_id = j.value("collection_id", "");
    run.points_ingested = j.value("points_ingested", std::size_t{0});
    run.plot_path = j.value("plot_path", "");
    for (const auto& r : j.value("regressions", json::array())) {
      RegressionReport rr;
      rr.metric = r.at("metric").get<std::string>();
      rr.group = r.at("group").get<TagMap>();
      rr.verdict = r.at("verdict").get<std::string>();
      rr.detail.regression = r.at("regression").get<bool>();
      rr.detail.magnitude = r.at("magnitude").get<double>();
      rr.detail.baseline = r.at("baseline").get<double>();
      rr.detail.latest = r.at("latest").get<double>();
      rr.latest_commit = r.value("latest_commit", "");
      run.regressions.push_back(std::move(rr));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::storage_error, std::string("malformed run document: ") + e.what());
  }
  return run;
}

}  // namespace cb::pipeline
