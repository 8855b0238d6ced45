#include "cb/jobgen.hpp"

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cb/error.hpp"

extern char** environ;

namespace cb::jobgen {

namespace fs = std::filesystem;

namespace {

void check_placeholders(const std::string& text, const char* part) {
  if (text.empty()) throw Error(Errc::template_error, std::string(part) + " must not be empty");
  std::size_t pos = 0;
  while ((pos = text.find("${", pos)) != std::string::npos) {
    const std::size_t close = text.find('}', pos + 2);
    const std::size_t eol = text.find('\n', pos + 2);
    if (close == std::string::npos || (eol != std::string::npos && eol < close))
      throw Error(Errc::template_error,
                  std::string("unterminated placeholder in ") + part + " at byte " + std::to_string(pos));
    if (close == pos + 2)
      throw Error(Errc::template_error, std::string("empty placeholder in ") + part + " at byte " + std::to_string(pos));
    pos = close + 1;
  }
}

void check_single_line(const std::string& value, const std::string& what) {
  if (value.find_first_of("\r\n") != std::string::npos)
    throw Error(Errc::template_error, what + " must not contain a line break");
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

std::string sanitize(std::string name) {
  std::replace(name.begin(), name.end(), '/', '_');
  return name;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

std::string JobScript::job_name() const {
  for (const auto& [k, v] : directives)
    if (k == "job-name") return v;
  return {};
}

JobScript assemble_script(const std::string& base_config, const std::string& benchmark_script,
                          const JobInstance& instance, const BenchmarkSpec& spec, DirectiveStyle style) {
  check_placeholders(base_config, "base configuration");
  check_placeholders(benchmark_script, "benchmark script");
  if (instance.spec_name != spec.name)
    throw Error(Errc::invalid_argument, "job belongs to spec '" + instance.spec_name + "', not '" + spec.name + "'");
  if (std::find(spec.hosts.begin(), spec.hosts.end(), instance.host) == spec.hosts.end())
    throw Error(Errc::invalid_argument, "host '" + instance.host + "' is not part of spec '" + spec.name + "'");

  JobScript script;
  script.directives = {{"nodelist", instance.host},
                       {"job-name", spec.name + "/" + instance.job_key},
                       {"time", std::to_string(spec.time_limit_minutes)}};
  for (const auto& [key, value] : instance.variant_assignment) {
    check_single_line(value, "variant value for '" + key + "'");
    script.env[kEnvPrefix + key] = value;
  }

  const char* prefix = style == DirectiveStyle::sbatch ? "#SBATCH" : "#CBATCH";
  std::string& text = script.text;
  text = std::string(kInterpreterLine) + "\n";
  for (const auto& [key, value] : script.directives) {
    check_single_line(value, "directive " + key);
    text += std::string(prefix) + " --" + key + "=" + value + "\n";
  }
  for (const auto& [name, value] : script.env) text += "export " + name + "=" + shell_quote(value) + "\n";
  text += base_config;
  if (base_config.back() != '\n') text += '\n';
  text += benchmark_script;
  return script;
}

void ExecutorConfig::validate() const {
  if (max_concurrent < 1) throw Error(Errc::invalid_argument, "max_concurrent must be at least 1");
  if (workdir.empty()) throw Error(Errc::invalid_argument, "executor workdir must be set");
}

struct Executor::Job {
  enum class State { queued, running, done };

  std::string id;
  std::string key;
  fs::path script_path;
  fs::path log_path;
  std::vector<std::string> env;
  State state = State::queued;
  pid_t pid = -1;
  bool kill_requested = false;
  bool killed = false;
  JobOutcome outcome;
};

Executor::Executor(ExecutorConfig config) : config_(std::move(config)) {
  config_.validate();
  std::error_code ec;
  fs::create_directories(config_.workdir, ec);
  config_.workdir = fs::absolute(config_.workdir, ec);
  if (config_.kind == ExecutorKind::local) monitor_ = std::thread([this] { monitor(); });
}

Executor::~Executor() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
    stopping_ = true;
    for (auto& job : running_) job->kill_requested = true;
    for (auto& job : queue_) finish(*job, JobStatus::failed, -1);
    queue_.clear();
  }
  changed_.notify_all();
  if (monitor_.joinable()) monitor_.join();
}

SubmissionHandle Executor::submit(const JobScript& script, const JobInstance& instance) {
  std::unique_lock lock(mutex_);
  if (closed_) throw Error(Errc::queue_closed, "executor has been shut down");

  auto job = std::make_shared<Job>();
  job->id = std::to_string(next_id_++);
  job->key = instance.job_key;
  const std::string name = sanitize(script.job_name().empty() ? instance.job_key : script.job_name());
  job->script_path = config_.workdir / (name + ".o" + job->id + ".sh");
  job->log_path = config_.workdir / (name + ".o" + job->id + ".log");
  {
    std::ofstream out(job->script_path, std::ios::binary | std::ios::trunc);
    out << script.text;
    out.flush();
    if (!out) throw Error(Errc::submit_failed, "cannot write job script " + job->script_path.string());
  }
  job->outcome.script_path = job->script_path;
  job->outcome.log_path = job->log_path;

  const SubmissionHandle handle{job->id, instance.job_key, now_ns()};
  if (config_.kind == ExecutorKind::directive_file) {
    job->state = Job::State::done;
    job->outcome.status = JobStatus::emitted;
    job->outcome.exit_code = 0;
    job->outcome.started_at = job->outcome.finished_at = handle.submitted_at;
    jobs_.emplace(job->id, job);
    return handle;
  }

  std::map<std::string, std::string> env;
  for (char** e = environ; e && *e; ++e) {
    const std::string entry(*e);
    const auto eq = entry.find('=');
    if (eq != std::string::npos) env[entry.substr(0, eq)] = entry.substr(eq + 1);
  }
  for (const auto& [k, v] : config_.env) env[k] = v;
  for (const auto& [k, v] : script.env) env[k] = v;
  for (const auto& [k, v] : env) job->env.push_back(k + "=" + v);

  jobs_.emplace(job->id, job);
  queue_.push_back(job);
  lock.unlock();
  changed_.notify_all();
  return handle;
}

void Executor::start(Job& job) {
  posix_spawn_file_actions_t actions;
  posix_spawnattr_t attr;
  posix_spawn_file_actions_init(&actions);
  posix_spawnattr_init(&attr);
  posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);
  posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, job.log_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC,
                                   0644);
  posix_spawn_file_actions_adddup2(&actions, STDOUT_FILENO, STDERR_FILENO);
  posix_spawn_file_actions_addchdir_np(&actions, config_.workdir.c_str());
  posix_spawnattr_setpgroup(&attr, 0);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);

  std::string shell = "/bin/sh";
  std::string path = job.script_path.string();
  char* argv[] = {shell.data(), path.data(), nullptr};
  std::vector<char*> envp;
  for (auto& e : job.env) envp.push_back(e.data());
  envp.push_back(nullptr);

  job.outcome.started_at = now_ns();
  const int rc = posix_spawn(&job.pid, shell.c_str(), &actions, &attr, argv, envp.data());
  posix_spawn_file_actions_destroy(&actions);
  posix_spawnattr_destroy(&attr);
  if (rc != 0) {
    std::ofstream(job.log_path, std::ios::app) << "spawn failed: " << std::strerror(rc) << "\n";
    finish(job, JobStatus::failed, 127);
    return;
  }
  job.state = Job::State::running;
  running_.push_back(jobs_.at(job.id));
  max_running_ = std::max(max_running_, static_cast<int>(running_.size()));
}

void Executor::finish(Job& job, JobStatus status, int exit_code) {
  job.state = Job::State::done;
  job.outcome.status = status;
  job.outcome.exit_code = exit_code;
  job.outcome.finished_at = now_ns();
  if (job.outcome.started_at == 0) job.outcome.started_at = job.outcome.finished_at;
  job.outcome.log = read_file(job.log_path);
}

void Executor::monitor() {
  std::unique_lock lock(mutex_);
  while (true) {
    bool progressed = false;
    for (auto it = running_.begin(); it != running_.end();) {
      Job& job = **it;
      if (job.kill_requested && !job.killed) {
        ::kill(-job.pid, SIGKILL);
        job.killed = true;
      }
      int st = 0;
      const pid_t r = ::waitpid(job.pid, &st, WNOHANG);
      if (r == job.pid || (r < 0 && errno == ECHILD)) {
        // Take down anything the script left behind in its group.
        ::kill(-job.pid, SIGKILL);
        int code = -1;
        if (r == job.pid) {
          if (WIFEXITED(st)) code = WEXITSTATUS(st);
          else if (WIFSIGNALED(st)) code = 128 + WTERMSIG(st);
        }
        JobStatus status = job.kill_requested ? JobStatus::timeout
                           : code == 0        ? JobStatus::completed
                                              : JobStatus::failed;
        finish(job, status, code);
        it = running_.erase(it);
        progressed = true;
      } else {
        ++it;
      }
    }
    while (!queue_.empty() && static_cast<int>(running_.size()) < config_.max_concurrent) {
      auto job = queue_.front();
      queue_.pop_front();
      start(*job);
      progressed = true;
    }
    if (progressed) changed_.notify_all();
    if (stopping_ && running_.empty() && queue_.empty()) break;
    changed_.wait_for(lock, std::chrono::milliseconds(5));
  }
}

JobOutcome Executor::await(const SubmissionHandle& handle, std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  auto it = jobs_.find(handle.job_id);
  if (it == jobs_.end() || it->second->key != handle.job_key)
    throw Error(Errc::unknown_handle, "unknown job handle " + handle.job_id);
  std::shared_ptr<Job> job = it->second;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  const bool done = changed_.wait_until(lock, deadline, [&] { return job->state == Job::State::done; });
  if (!done) {
    if (job->state == Job::State::queued) {
      queue_.erase(std::find(queue_.begin(), queue_.end(), job));
      finish(*job, JobStatus::timeout, -1);
    } else {
      job->kill_requested = true;
      changed_.notify_all();
      changed_.wait(lock, [&] { return job->state == Job::State::done; });
    }
  }
  return job->outcome;
}

void Executor::shutdown() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
    stopping_ = true;
  }
  changed_.notify_all();
  if (monitor_.joinable()) monitor_.join();
}

int Executor::max_observed_concurrency() const {
  std::lock_guard lock(mutex_);
  return max_running_;
}

}  // namespace cb::jobgen
