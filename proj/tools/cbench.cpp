// Operator CLI: run pipelines, serve the API, calibrate hosts, report,
// plot, check record integrity and load golden datasets.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "cb/api.hpp"
#include "cb/benchhost.hpp"
#include "cb/config.hpp"
#include "cb/error.hpp"
#include "cb/fixtures.hpp"
#include "cb/pipeline.hpp"
#include "cb/plot.hpp"
#include "cb/records.hpp"
#include "json.hpp"

#ifndef CB_DEFAULT_FIXTURE_DIR
#define CB_DEFAULT_FIXTURE_DIR "fixtures"
#endif

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kFailures = 1;
constexpr int kUsage = 2;

struct Globals {
  std::string data_dir = "cb-data";
  bool json = false;
};

cb::pipeline::PipelineRun resolve_run(const cb::pipeline::Workspace& ws, const std::string& id) {
  if (!id.empty()) {
    auto run = ws.run(id);
    if (!run) throw cb::Error(cb::Errc::not_found, "unknown run '" + id + "'");
    return *run;
  }
  const auto runs = ws.runs();
  if (runs.empty()) throw cb::Error(cb::Errc::not_found, "no runs recorded");
  return runs.back();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw cb::Error(cb::Errc::storage_error, "cannot write " + p.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous benchmarking toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--data-dir", g.data_dir, "Data directory")->envname("CB_DATA_DIR");
  app.add_flag("--json", g.json, "Machine-readable output");

  auto* run_cmd = app.add_subcommand("run", "Execute a pipeline from a project file");
  std::string spec_file, commit, executor = "local";
  int max_concurrent = 1;
  bool sbatch = false;
  std::vector<std::string> env_pairs;
  run_cmd->add_option("--spec", spec_file, "Project file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--commit", commit, "Commit identifier")->required();
  run_cmd->add_option("--executor", executor, "local | directive-file")
      ->check(CLI::IsMember({"local", "directive-file"}));
  run_cmd->add_option("--max-concurrent", max_concurrent, "Concurrent local jobs")->check(CLI::PositiveNumber);
  run_cmd->add_flag("--sbatch", sbatch, "Emit #SBATCH directives");
  run_cmd->add_option("--env", env_pairs, "KEY=VALUE added to every job environment");

  auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP API");
  std::string bind = "127.0.0.1:8080";
  std::string static_dir;
  serve_cmd->add_option("--bind", bind, "host:port")->envname("CB_BIND");
  serve_cmd->add_option("--static-dir", static_dir, "Directory served at /")->check(CLI::ExistingDirectory);

  auto* bench_cmd = app.add_subcommand("bench-host", "Measure bandwidth and peak into a host profile");
  cb::benchhost::Options bench_opts;
  bool no_save = false;
  bench_cmd->add_option("--hostname", bench_opts.hostname, "Profile name (default: this host)");
  bench_cmd->add_option("--elements", bench_opts.elements, "Doubles per buffer");
  bench_cmd->add_option("--repetitions", bench_opts.repetitions, "Best-of repetitions");
  bench_cmd->add_flag("--no-save", no_save, "Print only, do not store the profile");

  auto* report_cmd = app.add_subcommand("report", "Summarize a run");
  std::string run_id;
  report_cmd->add_option("--run", run_id, "Run id (default: latest)");

  auto* plot_cmd = app.add_subcommand("plot", "Write roofline or time-share HTML for a run");
  std::string plot_kind = "roofline", plot_out;
  plot_cmd->add_option("--run", run_id, "Run id (default: latest)");
  plot_cmd->add_option("--kind", plot_kind, "roofline | timeshare")->check(CLI::IsMember({"roofline", "timeshare"}));
  plot_cmd->add_option("--out", plot_out, "Output file (default: under the data directory)");

  auto* check_cmd = app.add_subcommand("check", "Verify record-store integrity");

  auto* fixtures_cmd = app.add_subcommand("import-fixtures", "Load golden datasets");
  std::string fixture_dir = CB_DEFAULT_FIXTURE_DIR;
  fixtures_cmd->add_option("--dir", fixture_dir, "Fixture directory")->check(CLI::ExistingDirectory);

  auto* export_cmd = app.add_subcommand("export-records", "Write a collection as a graph bundle");
  std::string collection_id, bundle_dir;
  export_cmd->add_option("--collection", collection_id, "Collection id")->required();
  export_cmd->add_option("--out", bundle_dir, "Bundle directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*check_cmd) {
      const auto findings = cb::records::integrity_check(fs::path(g.data_dir) / "records");
      if (g.json) {
        json out = json::array();
        for (const auto& f : findings) out.push_back({{"kind", f.kind}, {"subject", f.subject}, {"detail", f.detail}});
        std::cout << json{{"findings", out}}.dump(2) << "\n";
      } else {
        for (const auto& f : findings) std::cout << f.kind << "\t" << f.subject << "\t" << f.detail << "\n";
        std::cout << (findings.empty() ? "records ok\n" : std::to_string(findings.size()) + " finding(s)\n");
      }
      return findings.empty() ? kOk : kFailures;
    }

    cb::pipeline::Workspace ws(g.data_dir);

    if (*run_cmd) {
      const auto project = cb::config::load_project(spec_file);
      cb::pipeline::PipelineOptions opts;
      opts.executor = executor == "local" ? cb::jobgen::ExecutorKind::local : cb::jobgen::ExecutorKind::directive_file;
      opts.max_concurrent = max_concurrent;
      opts.directive_style = sbatch ? cb::jobgen::DirectiveStyle::sbatch : cb::jobgen::DirectiveStyle::cbatch;
      for (const auto& kv : env_pairs) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) {
          std::cerr << "cbench: --env expects KEY=VALUE, got '" << kv << "'\n";
          return kUsage;
        }
        opts.env[kv.substr(0, eq)] = kv.substr(eq + 1);
      }
      const auto run = cb::pipeline::run_pipeline(ws, project, commit, opts);
      bool failed = false;
      for (const auto& [key, status] : run.job_statuses)
        failed |= status == cb::JobStatus::failed || status == cb::JobStatus::timeout;
      if (g.json) {
        std::cout << cb::pipeline::to_json(run);
      } else {
        std::cout << run.run_id << "\n";
        for (const auto& r : run.regressions)
          if (r.verdict == "regression")
            std::cerr << "regression: " << r.metric << " " << r.detail.magnitude * 100.0 << "% worse\n";
      }
      return failed ? kFailures : kOk;
    }

    if (*serve_cmd) {
      const auto colon = bind.rfind(':');
      if (colon == std::string::npos) {
        std::cerr << "cbench: --bind expects host:port\n";
        return kUsage;
      }
      cb::api::ServerOptions opts;
      if (!static_dir.empty()) opts.static_dir = static_dir;
      cb::api::Server server(ws, opts);
      const std::string host = bind.substr(0, colon);
      const int port = std::atoi(bind.c_str() + colon + 1);
      std::cerr << "serving on http://" << host << ":" << port << "\n";
      if (!server.listen(host, port)) {
        std::cerr << "cbench: cannot bind " << bind << "\n";
        return kFailures;
      }
      return kOk;
    }

    if (*bench_cmd) {
      const auto profile = cb::benchhost::measure(bench_opts);
      if (!no_save) ws.save_host(profile);
      std::cout << cb::config::hosts_to_json({{profile.hostname, profile}});
      return kOk;
    }

    if (*report_cmd) {
      const auto run = resolve_run(ws, run_id);
      if (g.json) {
        auto doc = json::parse(cb::pipeline::to_json(run));
        doc["report"] = cb::pipeline::report(ws, run);
        std::cout << doc.dump(2) << "\n";
      } else {
        std::cout << cb::pipeline::report(ws, run);
      }
      return kOk;
    }

    if (*plot_cmd) {
      const auto run = resolve_run(ws, run_id);
      std::string html;
      if (plot_kind == "roofline") {
        html = cb::plot::roofline_html(cb::pipeline::roofline_for_run(ws, run));
      } else {
        std::vector<cb::plot::TimeShareBar> bars;
        for (const auto& e : cb::pipeline::timeshare_for_run(ws, run)) {
          std::string label;
          for (const auto& [k, v] : e.group) label += (label.empty() ? "" : " ") + v;
          bars.push_back({label, e.shares});
        }
        html = cb::plot::timeshare_html("Time shares " + run.commit_id, bars);
      }
      const fs::path out = plot_out.empty() ? fs::path(g.data_dir) / "plots" / run.run_id / (plot_kind + ".html")
                                            : fs::path(plot_out);
      write_file(out, html);
      std::cout << (g.json ? json{{"path", out.string()}}.dump() : out.string()) << "\n";
      return kOk;
    }

    if (*fixtures_cmd) {
      const auto summary = cb::fixtures::import_fixtures(ws, fixture_dir);
      if (g.json) {
        std::cout << json{{"points", summary.points}, {"runs", summary.run_ids}, {"hosts", summary.hosts}}.dump(2)
                  << "\n";
      } else {
        std::cout << "imported " << summary.points << " points, " << summary.hosts << " hosts\n";
        for (const auto& id : summary.run_ids) std::cout << id << "\n";
      }
      return kOk;
    }

    if (*export_cmd) {
      ws.records().export_bundle(collection_id, bundle_dir);
      std::cout << bundle_dir << "\n";
      return kOk;
    }
  } catch (const cb::Error& e) {
    std::cerr << "cbench: " << cb::errc_name(e.code()) << ": " << e.what() << "\n";
    return kFailures;
  } catch (const std::exception& e) {
    std::cerr << "cbench: " << e.what() << "\n";
    return kFailures;
  }
  return kUsage;
}
