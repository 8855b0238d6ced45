#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include <gtest/gtest.h>

#include "cb/api.hpp"
#include "cb/config.hpp"
#include "cb/error.hpp"
#include "cb/fixtures.hpp"
#include "cb/pipeline.hpp"
#include "cb/records.hpp"
#include "httplib.h"
#include "json.hpp"

using namespace cb;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cb-test-server-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

const char* kProject = R"(
project: mixed
base_script: "set -u\n"
hosts:
  node1:
    peak_gflops: 10
    bandwidths_gbps: {stream: 5}
specs:
  - name: mixed
    hosts: [node1]
    compilers: [gcc]
    variants:
      mode: [ok, fail]
    script: |
      if [ "$CB_PARAM_mode" = fail ]; then echo boom; exit 1; fi
      echo "MLUPS per process: 5.5"
    time_limit_minutes: 1
    extract: lbm
tracked:
  - metric: mlups.mlups_per_process
    window: 2
)";

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CB_CBENCH_EXE) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

struct LiveServer {
  explicit LiveServer(pipeline::Workspace& ws) : server(ws) {
    port = server.bind_any("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~LiveServer() {
    server.stop();
    thread.join();
  }
  httplib::Client client() const { return httplib::Client("127.0.0.1", port); }
  api::Server server;
  int port = -1;
  std::thread thread;
};

}  // namespace

TEST(Project, ParsesYaml) {
  const auto p = config::parse_project(kProject, ".");
  EXPECT_EQ(p.name, "mixed");
  EXPECT_EQ(p.base_script, "set -u\n");
  ASSERT_EQ(p.specs.size(), 1u);
  EXPECT_EQ(p.specs[0].spec.variants.at("mode").size(), 2u);
  EXPECT_EQ(p.specs[0].rules.size(), 2u);
  EXPECT_EQ(p.hosts.at("node1").bandwidths_gbps.at("stream"), 5.0);
  ASSERT_EQ(p.tracked.size(), 1u);
  EXPECT_EQ(p.tracked[0].name(), "mlups.mlups_per_process");
  EXPECT_EQ(p.tracked[0].regression.window, 2);
}

TEST(Project, Errors) {
  EXPECT_THROW(config::parse_project("project: [unclosed", "."), ParseError);
  try {
    config::parse_project("project: x\nspecs: []\n", ".");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_spec);
  }
  EXPECT_THROW(config::split_metric("nodot"), Error);
}

TEST(Project, DemoLoads) {
  const auto p = config::load_project(fs::path(CB_DEMO_DIR) / "lbm.yaml");
  EXPECT_FALSE(p.base_script.empty());
  EXPECT_EQ(p.specs.at(0).spec.repetitions, 3);
  EXPECT_TRUE(p.specs.at(0).counters);
}

TEST(Pipeline, FailingJobDoesNotSinkTheRun) {
  const auto dir = temp_dir("pipeline");
  pipeline::Workspace ws(dir);
  const auto run = pipeline::run_pipeline(ws, config::parse_project(kProject, "."), "c1");
  ASSERT_EQ(run.job_statuses.size(), 2u);
  std::map<JobStatus, int> counts;
  for (const auto& [k, s] : run.job_statuses) counts[s]++;
  EXPECT_EQ(counts[JobStatus::completed], 1);
  EXPECT_EQ(counts[JobStatus::failed], 1);
  EXPECT_TRUE(run.terminal());

  tsdb::Query q;
  q.measurement = "mlups";
  const auto res = ws.metrics().query(q);
  ASSERT_EQ(res.size(), 1u);
  ASSERT_EQ(res[0].rows.size(), 1u);
  EXPECT_EQ(res[0].rows[0].tags.at("mode"), "ok");
  EXPECT_EQ(res[0].rows[0].tags.at("commit"), "c1");

  q.measurement = "job";
  EXPECT_EQ(ws.metrics().query(q).at(0).rows.size(), 2u);

  EXPECT_EQ(ws.run(run.run_id)->job_statuses, run.job_statuses);
  EXPECT_TRUE(records::integrity_check(dir / "records").empty());
  const auto col = ws.records().collection(run.collection_id);
  ASSERT_TRUE(col);
  EXPECT_GE(col->member_record_ids.size(), 6u);
  EXPECT_TRUE(fs::exists(run.plot_path));
  ASSERT_EQ(run.regressions.size(), 1u);
  EXPECT_EQ(run.regressions[0].verdict, "insufficient-data");
  EXPECT_NE(pipeline::report(ws, run).find("mlups"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Pipeline, RunJsonRoundTrip) {
  pipeline::PipelineRun r;
  r.run_id = "run-1";
  r.project = "p";
  r.commit_id = "c";
  r.triggered_at = 5;
  r.finished_at = 9;
  r.spec_names = {"a"};
  r.job_statuses = {{"k1", JobStatus::completed}, {"k2", JobStatus::timeout}};
  r.points_ingested = 3;
  const auto back = pipeline::run_from_json(pipeline::to_json(r));
  EXPECT_EQ(back.run_id, r.run_id);
  EXPECT_EQ(back.job_statuses, r.job_statuses);
  EXPECT_EQ(back.finished_at, 9);
  EXPECT_EQ(back.points_ingested, 3u);
}

TEST(Api, IngestAndQuery) {
  const auto dir = temp_dir("api");
  pipeline::Workspace ws(dir);
  LiveServer live(ws);
  ASSERT_GT(live.port, 0);
  auto cli = live.client();

  const std::string body =
      "mlups,host=a,compiler=gcc v=1 10\n"
      "mlups,host=a,compiler=clang v=2 20\n"
      "mlups,host=b,compiler=gcc v=3 30\n";
  auto res = cli.Post("/api/v1/ingest", body, "text/plain");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body), json({{"ingested", 3}}));

  const std::string query = R"({"measurement":"mlups","group_by":["host"],"aggregate":"mean","field":"v"})";
  res = cli.Post("/api/v1/query", query, "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->body, api::query_result_json(ws.metrics().query(api::query_from_json(query))));
  const auto doc = json::parse(res->body);
  ASSERT_EQ(doc["groups"].size(), 2u);
  EXPECT_EQ(doc["groups"][0]["aggregate"], 1.5);

  res = cli.Get("/api/v1/measurements");
  ASSERT_TRUE(res);
  EXPECT_EQ(json::parse(res->body)["measurements"], json::array({"mlups"}));
  EXPECT_EQ(res->get_header_value("Cache-Control"), "public, max-age=10");

  res = cli.Get("/api/v1/tags?measurement=mlups");
  ASSERT_TRUE(res);
  EXPECT_EQ(json::parse(res->body)["tags"]["host"], json::array({"a", "b"}));
  fs::remove_all(dir);
}

TEST(Api, ErrorsAreProblemDocuments) {
  const auto dir = temp_dir("api-errors");
  pipeline::Workspace ws(dir);
  LiveServer live(ws);
  auto cli = live.client();

  auto res = cli.Post("/api/v1/ingest", "good,host=a v=1 1\nbad line\n", "text/plain");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  EXPECT_EQ(res->get_header_value("Content-Type"), "application/problem+json");
  auto doc = json::parse(res->body);
  EXPECT_EQ(doc["status"], 400);
  EXPECT_EQ(doc["code"], "ParseError");
  EXPECT_EQ(ws.metrics().point_count(), 0u);

  res = cli.Post("/api/v1/query", R"({"measurement":""})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);

  res = cli.Post("/api/v1/query", "{not json", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);

  res = cli.Get("/api/v1/runs/nope");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);
  EXPECT_EQ(json::parse(res->body)["status"], 404);

  res = cli.Get("/api/v1/analysis/roofline");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  fs::remove_all(dir);
}

TEST(Api, StatusMapping) {
  EXPECT_EQ(api::http_status(Errc::not_found), 404);
  EXPECT_EQ(api::http_status(Errc::unknown_record), 404);
  EXPECT_EQ(api::http_status(Errc::store_unavailable), 503);
  EXPECT_EQ(api::http_status(Errc::parse_error), 400);
}

TEST(Fixtures, ImportAndAnalyze) {
  const auto dir = temp_dir("fixtures");
  pipeline::Workspace ws(dir);
  const auto summary = fixtures::import_fixtures(ws, CB_FIXTURE_DIR);
  EXPECT_EQ(summary.run_ids.size(), 5u);
  EXPECT_EQ(summary.hosts, 3u);
  const auto again = fixtures::import_fixtures(ws, CB_FIXTURE_DIR);
  EXPECT_EQ(again.points, summary.points);
  EXPECT_EQ(ws.metrics().point_count(), summary.points);

  LiveServer live(ws);
  auto cli = live.client();
  auto res = cli.Get("/api/v1/analysis/relperf?run=fixture-uniformgrid&metric=mlups.mlups_per_process"
                     "&bytes_per_update=304");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200) << res->body;
  auto doc = json::parse(res->body);
  bool found = false;
  for (const auto& e : doc["entries"]) {
    if (e["tags"].value("collision", "") != "srt") continue;
    found = true;
    EXPECT_NEAR(e["fraction"].get<double>(), 623.7 / (237e3 / 304.0), 1e-12);
  }
  EXPECT_TRUE(found);

  res = cli.Get("/api/v1/analysis/roofline?run=fixture-fe2ti-c3");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200) << res->body;
  doc = json::parse(res->body);
  EXPECT_EQ(doc["points"].size(), 2u);

  res = cli.Get("/api/v1/analysis/regressions?metric=tts.seconds&window=2&direction=lower-is-better");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200) << res->body;
  doc = json::parse(res->body);
  EXPECT_EQ(doc["reports"].size(), 2u);
  for (const auto& r : doc["reports"]) EXPECT_EQ(r["verdict"], "ok");
  fs::remove_all(dir);
}

TEST(Cli, ExitCodes) {
  const auto dir = temp_dir("cli");
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("run --commit x"), 2);

  std::string hash;
  {
    records::RecordStore rs(dir / "records");
    hash = rs.create_record("r", "", {}, {{"a", "payload"}}).artifacts[0].hash;
  }
  EXPECT_EQ(run_cli("--data-dir " + dir.string() + " check"), 0);
  std::ofstream(dir / "records" / "objects" / hash.substr(0, 2) / hash, std::ios::trunc) << "tampered";
  EXPECT_EQ(run_cli("--data-dir " + dir.string() + " check"), 1);
  EXPECT_EQ(run_cli("--data-dir " + dir.string() + " report --run missing"), 1);
  fs::remove_all(dir);
}
