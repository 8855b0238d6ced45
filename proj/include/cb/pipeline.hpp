#pragma once

// Pipeline orchestration over one data directory:
//
//   <data>/tsdb/          metric store
//   <data>/records/       record store
//   <data>/runs/<id>.json pipeline runs
//   <data>/hosts.json     host registry
//   <data>/plots/<id>/    generated plots
//   <data>/work/<id>/     job scripts and logs

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "cb/analysis.hpp"
#include "cb/config.hpp"
#include "cb/jobgen.hpp"
#include "cb/plot.hpp"
#include "cb/records.hpp"
#include "cb/tsdb.hpp"
#include "cb/types.hpp"

namespace cb::pipeline {

struct RegressionReport {
  std::string metric;
  /// Series identity: every tag except job_key and commit.
  TagMap group;
  /// "regression", "ok" or "insufficient-data".
  std::string verdict;
  analysis::RegressionVerdict detail;
  std::string latest_commit;
};

struct PipelineRun {
  std::string run_id;
  std::string project;
  std::string commit_id;
  TimestampNs triggered_at = 0;
  TimestampNs finished_at = 0;
  std::vector<std::string> spec_names;
  std::map<std::string, JobStatus> job_statuses;
  std::string collection_id;
  std::size_t points_ingested = 0;
  std::string plot_path;
  std::vector<RegressionReport> regressions;

  bool terminal() const;
};

class Workspace {
 public:
  /// Throws Error(store_unavailable).
  explicit Workspace(std::filesystem::path root, tsdb::StoreOptions options = {});

  const std::filesystem::path& root() const noexcept { return root_; }
  tsdb::Store& metrics() { return *metrics_; }
  const tsdb::Store& metrics() const { return *metrics_; }
  records::RecordStore& records() { return *records_; }
  const records::RecordStore& records() const { return *records_; }

  HostRegistry hosts() const;
  void save_host(const HostProfile& host);

  void save_run(const PipelineRun& run);
  std::optional<PipelineRun> run(const std::string& run_id) const;
  /// Ordered by trigger time.
  std::vector<PipelineRun> runs() const;

 private:
  std::filesystem::path root_;
  std::unique_ptr<tsdb::Store> metrics_;
  std::unique_ptr<records::RecordStore> records_;
  mutable std::mutex mutex_;
};

struct PipelineOptions {
  jobgen::ExecutorKind executor = jobgen::ExecutorKind::local;
  int max_concurrent = 1;
  jobgen::DirectiveStyle directive_style = jobgen::DirectiveStyle::cbatch;
  /// Extra environment for local jobs.
  std::map<std::string, std::string> env;
};

/// Expands, assembles, submits, collects, ingests, records and analyzes.
/// Individual job failures are recorded, not thrown. Throws NoJobs when the
/// specs expand to nothing.
PipelineRun run_pipeline(Workspace& ws, const config::Project& project, const std::string& commit_id,
                         const PipelineOptions& options = {});

/// Per series of `measurement.field`: earlier commits contribute their
/// individual values, the newest commit its mean; detect_regression runs
/// over the last window+1 of those.
std::vector<RegressionReport> compute_regressions(const tsdb::Store& store, const config::TrackedMetric& metric);

/// Roofline inputs for a run, from the counter tables it stored.
plot::RooflineData roofline_for_run(const Workspace& ws, const PipelineRun& run);

struct TimeShareEntry {
  TagMap group;
  std::vector<analysis::TimeShare> shares;
};
/// Time shares from the "timeshare" measurement (tag category, field
/// seconds) of the run's commit, one entry per (host, benchmark).
std::vector<TimeShareEntry> timeshare_for_run(const Workspace& ws, const PipelineRun& run);

/// Plain-text summary: job statuses and the mean of every numeric metric
/// per variant.
std::string report(const Workspace& ws, const PipelineRun& run);

std::string to_json(const PipelineRun& run);
PipelineRun run_from_json(const std::string& text);

}  // namespace cb::pipeline
