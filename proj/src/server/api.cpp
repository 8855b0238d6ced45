#include "cb/api.hpp"

#include <charconv>
#include <sstream>

#include "cb/analysis.hpp"
#include "cb/config.hpp"
#include "cb/lbm.hpp"
#include "httplib.h"
#include "json.hpp"

namespace cb::api {

using nlohmann::json;

namespace {

json field_json(const FieldValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  return std::get<std::string>(v);
}

json host_json(const HostProfile& h) {
  json j = {{"hostname", h.hostname},
            {"cpu_model", h.cpu_model},
            {"cores", h.cores},
            {"peak_flops_gflops", h.peak_flops_gflops},
            {"bandwidths_gbps", h.bandwidths_gbps}};
  j["fixed_frequency_ghz"] = h.fixed_frequency_ghz ? json(*h.fixed_frequency_ghz) : json();
  return j;
}

TimestampNs time_param(const json& j, const char* key, TimestampNs fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  if (!j[key].is_number_integer()) throw Error(Errc::invalid_query, std::string(key) + " must be an integer");
  return j[key].get<TimestampNs>();
}

double number_param(const httplib::Request& req, const char* key, double fallback) {
  if (!req.has_param(key)) return fallback;
  const std::string s = req.get_param_value(key);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw Error(Errc::invalid_argument, std::string("parameter ") + key + " is not a number");
  return v;
}

std::string required_param(const httplib::Request& req, const char* key) {
  if (!req.has_param(key) || req.get_param_value(key).empty())
    throw Error(Errc::invalid_argument, std::string("missing query parameter '") + key + "'");
  return req.get_param_value(key);
}

const char* reason(int status) {
  switch (status) {
    case 400: return "Bad Request";
    case 404: return "Not Found";
    case 503: return "Service Unavailable";
    default: return "Internal Server Error";
  }
}

void problem(httplib::Response& res, int status, const std::string& detail, const std::string& code) {
  json doc = {{"type", "about:blank"}, {"title", reason(status)}, {"status", status}, {"detail", detail}};
  if (!code.empty()) doc["code"] = code;
  res.status = status;
  res.set_content(doc.dump(), "application/problem+json");
}

void send(httplib::Response& res, const json& body) {
  res.set_header("Cache-Control", "public, max-age=10");
  res.set_content(body.dump(), "application/json");
}

template <typename F>
httplib::Server::Handler guarded(F&& f) {
  return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      problem(res, http_status(e.code()), e.what(), std::string(errc_name(e.code())));
    } catch (const json::exception& e) {
      problem(res, 400, e.what(), "InvalidArgument");
    } catch (const std::exception& e) {
      problem(res, 500, e.what(), "");
    }
  };
}

pipeline::PipelineRun find_run(const pipeline::Workspace& ws, const std::string& id) {
  auto run = ws.run(id);
  if (!run) throw Error(Errc::not_found, "unknown run '" + id + "'");
  return *run;
}

json run_json(const pipeline::PipelineRun& run) { return json::parse(pipeline::to_json(run)); }

}  // namespace

int http_status(Errc code) noexcept {
  switch (code) {
    case Errc::not_found:
    case Errc::unknown_handle:
    case Errc::unknown_record:
    case Errc::unknown_collection: return 404;
    case Errc::store_unavailable:
    case Errc::storage_full:
    case Errc::storage_error: return 503;
    default: return 400;
  }
}

std::string query_result_json(const tsdb::QueryResult& result) {
  json groups = json::array();
  for (const auto& g : result) {
    json rows = json::array();
    for (const auto& r : g.rows) {
      json fields = json::object();
      for (const auto& [k, v] : r.fields) fields[k] = field_json(v);
      rows.push_back({{"timestamp", r.timestamp}, {"tags", r.tags}, {"fields", fields}});
    }
    groups.push_back(
        {{"tags", g.tags}, {"rows", rows}, {"aggregate", g.aggregate ? json(*g.aggregate) : json()}});
  }
  return json{{"groups", groups}}.dump();
}

tsdb::Query query_from_json(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_query, std::string("query body is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(Errc::invalid_query, "query must be a JSON object");
  tsdb::Query q;
  try {
    q.measurement = j.value("measurement", "");
    q.tag_filters = j.value("tags", TagMap{});
    q.group_by = j.value("group_by", std::vector<std::string>{});
    q.field = j.value("field", "");
    const std::string agg = j.value("aggregate", "none");
    const auto a = tsdb::aggregate_from_string(agg);
    if (!a) throw Error(Errc::invalid_query, "unknown aggregate '" + agg + "'");
    q.aggregate = *a;
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_query, std::string("malformed query: ") + e.what());
  }
  q.start = time_param(j, "start", q.start);
  q.end = time_param(j, "end", q.end);
  q.validate();
  return q;
}

Server::Server(pipeline::Workspace& ws, ServerOptions options)
    : ws_(ws), options_(std::move(options)), http_(std::make_unique<httplib::Server>()) {
  routes();
}

Server::~Server() { stop(); }

void Server::routes() {
  auto& s = *http_;
  auto& ws = ws_;

  s.Post("/api/v1/ingest", guarded([&ws](const httplib::Request& req, httplib::Response& res) {
           std::vector<MetricPoint> points;
           std::istringstream lines(req.body);
           std::string line;
           std::size_t lineno = 0;
           while (std::getline(lines, line)) {
             ++lineno;
             if (!line.empty() && line.back() == '\r') line.pop_back();
             if (line.empty()) continue;
             try {
               points.push_back(tsdb::parse_line(line));
               points.back().validate();
             } catch (const Error& e) {
               throw Error(e.code(), "line " + std::to_string(lineno) + ": " + e.what());
             }
           }
           for (const auto& p : points) ws.metrics().ingest(p);
           send(res, {{"ingested", points.size()}});
         }));

  s.Post("/api/v1/query", guarded([&ws](const httplib::Request& req, httplib::Response& res) {
           const auto q = query_from_json(req.body);
           res.set_content(query_result_json(ws.metrics().query(q)), "application/json");
         }));

  s.Get("/api/v1/measurements", guarded([&ws](const httplib::Request&, httplib::Response& res) {
          send(res, {{"measurements", ws.metrics().measurements()}});
        }));

  s.Get("/api/v1/tags", guarded([&ws](const httplib::Request& req, httplib::Response& res) {
          const auto m = required_param(req, "measurement");
          json tags = json::object();
          for (const auto& [k, values] : ws.metrics().tag_values(m)) tags[k] = values;
          send(res, {{"measurement", m}, {"tags", tags}});
        }));

  s.Get("/api/v1/runs", guarded([&ws](const httplib::Request&, httplib::Response& res) {
          json runs = json::array();
          for (const auto& r : ws.runs()) runs.push_back(run_json(r));
          send(res, {{"runs", runs}});
        }));

  s.Get(R"(/api/v1/runs/([^/]+))", guarded([&ws](const httplib::Request& req, httplib::Response& res) {
          const auto run = find_run(ws, req.matches[1].str());
          json doc = run_json(run);
          doc["report"] = pipeline::report(ws, run);
          send(res, doc);
        }));

  s.Get("/api/v1/hosts", guarded([&ws](const httplib::Request&, httplib::Response& res) {
          json hosts = json::array();
          for (const auto& [name, h] : ws.hosts()) hosts.push_back(host_json(h));
          send(res, {{"hosts", hosts}});
        }));

  s.Get("/api/v1/analysis/roofline", guarded([&ws](const httplib::Request& req, httplib::Response& res) {
          const auto run = find_run(ws, required_param(req, "run"));
          const std::string kind = req.has_param("kind") ? req.get_param_value("kind") : "stream";
          const auto data = pipeline::roofline_for_run(ws, run);
          json hosts = json::array();
          for (const auto& h : data.hosts) {
            json j = host_json(h);
            json knees = json::object();
            for (const auto& [k, bw] : h.bandwidths_gbps) knees[k] = analysis::roofline_knee(h, k);
            j["knees"] = knees;
            hosts.push_back(std::move(j));
          }
          json points = json::array();
          for (const auto& p : data.points) {
            json j = {{"label", p.point.label},
                      {"host", p.host},
                      {"series", p.series},
                      {"operational_intensity", p.point.operational_intensity},
                      {"achieved_gflops", p.point.achieved_gflops}};
            for (const auto& h : data.hosts) {
              if (h.hostname == p.host && h.bandwidths_gbps.count(kind))
                j["bound_gflops"] = analysis::roofline_bound(p.point.operational_intensity, h, kind);
            }
            points.push_back(std::move(j));
          }
          send(res, {{"run", run.run_id}, {"title", data.title}, {"kind", kind}, {"hosts", hosts}, {"points", points}});
        }));

  s.Get("/api/v1/analysis/timeshare", guarded([&ws](const httplib::Request& req, httplib::Response& res) {
          const auto run = find_run(ws, required_param(req, "run"));
          json entries = json::array();
          for (const auto& e : pipeline::timeshare_for_run(ws, run)) {
            json shares = json::array();
            for (const auto& s : e.shares)
              shares.push_back(
                  {{"category", analysis::to_string(s.category)}, {"fraction", s.fraction}, {"substeps", s.substeps}});
            entries.push_back({{"tags", e.group}, {"shares", shares}});
          }
          send(res, {{"run", run.run_id}, {"entries", entries}});
        }));

  s.Get("/api/v1/analysis/regressions", guarded([&ws](const httplib::Request& req, httplib::Response& res) {
          config::TrackedMetric metric;
          std::tie(metric.measurement, metric.field) = config::split_metric(required_param(req, "metric"));
          metric.regression.window = static_cast<int>(number_param(req, "window", metric.regression.window));
          metric.regression.threshold_fraction = number_param(req, "threshold", metric.regression.threshold_fraction);
          if (req.has_param("direction")) {
            const auto d = analysis::direction_from_string(req.get_param_value("direction"));
            if (!d) throw Error(Errc::invalid_argument, "unknown direction");
            metric.regression.direction = *d;
          }
          json reports = json::array();
          for (const auto& r : pipeline::compute_regressions(ws.metrics(), metric)) {
            reports.push_back({{"group", r.group},
                               {"verdict", r.verdict},
                               {"regression", r.detail.regression},
                               {"magnitude", r.detail.magnitude},
                               {"baseline", r.detail.baseline},
                               {"latest", r.detail.latest},
                               {"latest_commit", r.latest_commit}});
          }
          send(res, {{"metric", metric.name()}, {"reports", reports}});
        }));

  s.Get("/api/v1/analysis/relperf", guarded([&ws](const httplib::Request& req, httplib::Response& res) {
          const auto run = find_run(ws, required_param(req, "run"));
          const auto [measurement, field] = config::split_metric(required_param(req, "metric"));
          const double bpu = number_param(req, "bytes_per_update", lbm::kBytesPerUpdate);
          const std::string kind = req.has_param("kind") ? req.get_param_value("kind") : "stream";
          const auto hosts = ws.hosts();
          tsdb::Query q;
          q.measurement = measurement;
          q.field = field;
          q.tag_filters = {{"commit", run.commit_id}};
          q.start = run.triggered_at;
          q.end = run.finished_at + 1;
          q.group_by = {"host"};
          json entries = json::array();
          for (const auto& g : ws.metrics().query(q)) {
            const auto h = hosts.find(g.tags.at("host"));
            if (h == hosts.end()) throw Error(Errc::not_found, "no profile for host '" + g.tags.at("host") + "'");
            const double bound = analysis::mlups_bound(h->second, kind, bpu);
            for (const auto& row : g.rows) {
              const double measured = *numeric_value(row.fields.at(field));
              const auto rp = analysis::relative_performance(measured, bound);
              entries.push_back({{"tags", row.tags},
                                 {"measured", measured},
                                 {"bound", bound},
                                 {"fraction", rp.fraction},
                                 {"exceeds_bound", rp.exceeds_bound}});
            }
          }
          send(res, {{"run", run.run_id}, {"kind", kind}, {"bytes_per_update", bpu}, {"entries", entries}});
        }));

  if (options_.static_dir) s.set_mount_point("/", options_.static_dir->string());
}

bool Server::listen(const std::string& host, int port) { return http_->listen(host, port); }

int Server::bind_any(const std::string& host) { return http_->bind_to_any_port(host); }

bool Server::listen_after_bind() { return http_->listen_after_bind(); }

void Server::stop() {
  if (http_ && http_->is_running()) http_->stop();
}

void Server::wait_until_ready() const { http_->wait_until_ready(); }

}  // namespace cb::api
