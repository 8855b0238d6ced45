#pragma once

// Batch script assembly and job execution.
//
// A script is an interpreter line, a directive block, optional CB_PARAM_
// exports and then the base and benchmark parts:
//
//   #!/bin/sh
//   #CBATCH --nodelist=<host>
//   #CBATCH --job-name=<spec>/<job_key>
//   #CBATCH --time=<minutes>
//   export CB_PARAM_<key>='<value>'
//   <base_config><benchmark_script>

#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "cb/types.hpp"

namespace cb::jobgen {

inline constexpr const char* kInterpreterLine = "#!/bin/sh";
inline constexpr const char* kEnvPrefix = "CB_PARAM_";

enum class DirectiveStyle { cbatch, sbatch };

struct JobScript {
  std::string text;
  std::vector<std::pair<std::string, std::string>> directives;
  std::map<std::string, std::string> env;

  std::string job_name() const;
  bool operator==(const JobScript&) const = default;
};

/// Pure function of its inputs. Throws Error(template_error) for an empty
/// part, a `${` placeholder left open on its line, or a newline inside a
/// directive or exported value.
JobScript assemble_script(const std::string& base_config, const std::string& benchmark_script,
                          const JobInstance& instance, const BenchmarkSpec& spec,
                          DirectiveStyle style = DirectiveStyle::cbatch);

enum class ExecutorKind { local, directive_file };

struct ExecutorConfig {
  ExecutorKind kind = ExecutorKind::local;
  int max_concurrent = 1;
  std::filesystem::path workdir;
  /// Added to the inherited environment of every local job.
  std::map<std::string, std::string> env;

  void validate() const;
};

struct SubmissionHandle {
  std::string job_id;
  std::string job_key;
  TimestampNs submitted_at = 0;

  bool operator==(const SubmissionHandle&) const = default;
};

struct JobOutcome {
  JobStatus status = JobStatus::failed;
  int exit_code = -1;
  std::string log;
  std::filesystem::path script_path;
  std::filesystem::path log_path;
  TimestampNs started_at = 0;
  TimestampNs finished_at = 0;

  double wall_seconds() const { return static_cast<double>(finished_at - started_at) * 1e-9; }
};

/// Local jobs run as `/bin/sh <script>` in their own process group with
/// stdout and stderr sent to `<jobname>.o<job_id>.log` in the workdir, '/'
/// in the job name replaced by '_'. Safe for concurrent use.
class Executor {
 public:
  explicit Executor(ExecutorConfig config);
  ~Executor();

  Executor(const Executor&) = delete;
  Executor& operator=(const Executor&) = delete;

  /// Throws SubmitFailed when the script cannot be written and QueueClosed
  /// after shutdown.
  SubmissionHandle submit(const JobScript& script, const JobInstance& instance);

  /// Waits for the job to finish. When `timeout` elapses first the job's
  /// process group is killed (or the job is dropped from the queue) and the
  /// status is timeout. Repeated calls return the same outcome. Throws
  /// UnknownHandle.
  JobOutcome await(const SubmissionHandle& handle, std::chrono::milliseconds timeout);

  /// Rejects further submissions and waits for queued and running jobs.
  void shutdown();

  /// Highest number of children that were ever running at once.
  int max_observed_concurrency() const;

  const ExecutorConfig& config() const noexcept { return config_; }

 private:
  struct Job;

  void monitor();
  void start(Job& job);
  void finish(Job& job, JobStatus status, int exit_code);

  ExecutorConfig config_;
  mutable std::mutex mutex_;
  std::condition_variable changed_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::deque<std::shared_ptr<Job>> queue_;
  std::vector<std::shared_ptr<Job>> running_;
  long next_id_ = 1;
  int max_running_ = 0;
  bool closed_ = false;
  bool stopping_ = false;
  std::thread monitor_;
};

}  // namespace cb::jobgen
