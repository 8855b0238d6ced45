#include <signal.h>
#include <unistd.h>

#include <cerrno>
#include <filesystem>
#include <fstream>
#include <thread>

#include <gtest/gtest.h>

#include "cb/error.hpp"
#include "cb/jobgen.hpp"
#include "cb/model.hpp"

using namespace cb;
using namespace cb::jobgen;
using namespace std::chrono_literals;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cb-test-jobgen-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

BenchmarkSpec spec(std::map<std::string, std::vector<std::string>> variants = {}) {
  BenchmarkSpec s;
  s.name = "lbm";
  s.hosts = {"icx36"};
  s.compilers = {"gcc"};
  s.variants = std::move(variants);
  s.script_template = "./lbm\n";
  s.time_limit_minutes = 120;
  return s;
}

JobInstance instance(const BenchmarkSpec& s, VariantAssignment v = {}) {
  JobInstance j;
  j.spec_name = s.name;
  j.host = "icx36";
  j.compiler = "gcc";
  j.variant_assignment = std::move(v);
  j.commit_id = "abc";
  j.job_key = job_key(s.name, j.host, j.compiler, j.variant_assignment, 0);
  return j;
}

JobScript shell(const std::string& body, const std::string& name = "t") {
  auto s = spec();
  s.name = name;
  auto j = instance(s);
  return assemble_script("set -e\n", body, j, s);
}

std::string read(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::not_found;
}

bool process_gone(pid_t pid) {
  if (::kill(pid, 0) != 0) return errno == ESRCH;
  // An orphaned grandchild may linger as a zombie until init reaps it.
  std::ifstream stat("/proc/" + std::to_string(pid) + "/stat");
  std::string line;
  std::getline(stat, line);
  const auto close = line.rfind(')');
  return close != std::string::npos && line.size() > close + 2 && line[close + 2] == 'Z';
}

}  // namespace

TEST(AssembleScript, MatchesListingShape) {
  const auto s = spec();
  const auto j = instance(s);
  const auto script = assemble_script("module load gcc\n", "./lbm\n", j, s);
  const std::string expected = std::string("#!/bin/sh\n") + "#CBATCH --nodelist=icx36\n" +
                               "#CBATCH --job-name=lbm/" + j.job_key + "\n" + "#CBATCH --time=120\n" +
                               "module load gcc\n./lbm\n";
  EXPECT_EQ(script.text, expected);
  EXPECT_EQ(script.job_name(), "lbm/" + j.job_key);
  EXPECT_TRUE(script.env.empty());
}

TEST(AssembleScript, VariantsBecomeEnvironment) {
  const auto s = spec({{"collision", {"srt", "trt"}}});
  const auto j = instance(s, {{"collision", "it's"}});
  const auto script = assemble_script("b\n", "x\n", j, s);
  EXPECT_EQ(script.env.at("CB_PARAM_collision"), "it's");
  EXPECT_NE(script.text.find("export CB_PARAM_collision='it'\\''s'\n"), std::string::npos);
}

TEST(AssembleScript, SbatchStyle) {
  const auto s = spec();
  const auto script = assemble_script("b\n", "x\n", instance(s), s, DirectiveStyle::sbatch);
  EXPECT_NE(script.text.find("#SBATCH --nodelist=icx36\n"), std::string::npos);
  EXPECT_EQ(script.text.find("#CBATCH"), std::string::npos);
}

TEST(AssembleScript, PureAndBaseNewlineInserted) {
  const auto s = spec();
  const auto j = instance(s);
  EXPECT_EQ(assemble_script("a", "b", j, s), assemble_script("a", "b", j, s));
  EXPECT_TRUE(assemble_script("a", "b", j, s).text.ends_with("\na\nb"));
}

TEST(AssembleScript, TemplateErrors) {
  const auto s = spec();
  const auto j = instance(s);
  EXPECT_EQ(code_of([&] { assemble_script("", "x", j, s); }), Errc::template_error);
  EXPECT_EQ(code_of([&] { assemble_script("a", "", j, s); }), Errc::template_error);
  EXPECT_EQ(code_of([&] { assemble_script("echo ${HOME\n", "x", j, s); }), Errc::template_error);
  EXPECT_EQ(code_of([&] { assemble_script("echo ${}\n", "x", j, s); }), Errc::template_error);
  EXPECT_NO_THROW(assemble_script("echo ${HOME}\n", "x", j, s));
  auto other = s;
  other.name = "other";
  EXPECT_EQ(code_of([&] { assemble_script("a", "b", j, other); }), Errc::invalid_argument);
}

TEST(Executor, RunsScriptAndCapturesLog) {
  const auto dir = temp_dir("echo");
  Executor ex({ExecutorKind::local, 1, dir, {{"CB_GREETING", "hi"}}});
  const auto script = shell("echo \"$CB_GREETING there\"\necho err >&2\n");
  const auto h = ex.submit(script, instance(spec()));
  const auto out = ex.await(h, 30s);
  EXPECT_EQ(out.status, JobStatus::completed);
  EXPECT_EQ(out.exit_code, 0);
  EXPECT_NE(out.log.find("hi there\n"), std::string::npos);
  EXPECT_NE(out.log.find("err\n"), std::string::npos);
  EXPECT_EQ(read(out.log_path), out.log);
  EXPECT_EQ(read(out.script_path), script.text);
  auto named = spec();
  named.name = "t";
  EXPECT_EQ(out.log_path.filename().string(), "t_" + instance(named).job_key + ".o" + h.job_id + ".log");
  EXPECT_GE(out.finished_at, out.started_at);
  fs::remove_all(dir);
}

TEST(Executor, NonZeroExitIsFailure) {
  const auto dir = temp_dir("fail");
  Executor ex({ExecutorKind::local, 1, dir, {}});
  const auto out = ex.await(ex.submit(shell("exit 3\n"), instance(spec())), 30s);
  EXPECT_EQ(out.status, JobStatus::failed);
  EXPECT_EQ(out.exit_code, 3);
  fs::remove_all(dir);
}

TEST(Executor, SerializesWithOneSlot) {
  const auto dir = temp_dir("serial");
  Executor ex({ExecutorKind::local, 1, dir, {}});
  const auto a = ex.submit(shell("sleep 0.3\n"), instance(spec()));
  const auto b = ex.submit(shell("sleep 0.3\n"), instance(spec()));
  const auto oa = ex.await(a, 30s);
  const auto ob = ex.await(b, 30s);
  EXPECT_EQ(oa.status, JobStatus::completed);
  EXPECT_EQ(ob.status, JobStatus::completed);
  EXPECT_GE(ob.started_at, oa.finished_at);
  EXPECT_EQ(ex.max_observed_concurrency(), 1);
  fs::remove_all(dir);
}

TEST(Executor, ConcurrencyNeverExceedsLimit) {
  const auto dir = temp_dir("gauge");
  Executor ex({ExecutorKind::local, 3, dir, {}});
  std::vector<SubmissionHandle> hs;
  for (int i = 0; i < 8; ++i) hs.push_back(ex.submit(shell("sleep 0.1\n"), instance(spec())));
  for (const auto& h : hs) EXPECT_EQ(ex.await(h, 30s).status, JobStatus::completed);
  EXPECT_LE(ex.max_observed_concurrency(), 3);
  EXPECT_GE(ex.max_observed_concurrency(), 1);
  fs::remove_all(dir);
}

TEST(Executor, TimeoutKillsProcessGroup) {
  const auto dir = temp_dir("timeout");
  Executor ex({ExecutorKind::local, 1, dir, {}});
  const auto pidfile = dir / "pids";
  const auto h = ex.submit(shell("sleep 60 &\necho $$ $! > " + pidfile.string() + "\nwait\n"), instance(spec()));
  const auto out = ex.await(h, 500ms);
  EXPECT_EQ(out.status, JobStatus::timeout);
  pid_t shell_pid = 0, sleep_pid = 0;
  std::ifstream(pidfile) >> shell_pid >> sleep_pid;
  ASSERT_GT(shell_pid, 0);
  ASSERT_GT(sleep_pid, 0);
  EXPECT_EQ(::kill(shell_pid, 0), -1);
  EXPECT_EQ(errno, ESRCH);
  bool gone = false;
  for (int i = 0; i < 100 && !gone; ++i) {
    gone = process_gone(sleep_pid);
    if (!gone) std::this_thread::sleep_for(10ms);
  }
  EXPECT_TRUE(gone);
  EXPECT_EQ(ex.await(h, 1ms).status, JobStatus::timeout);
  fs::remove_all(dir);
}

TEST(Executor, QueuedJobTimesOutWithoutStarting) {
  const auto dir = temp_dir("queued");
  Executor ex({ExecutorKind::local, 1, dir, {}});
  const auto a = ex.submit(shell("sleep 1\n"), instance(spec()));
  const auto b = ex.submit(shell("touch " + (dir / "ran").string() + "\n"), instance(spec()));
  EXPECT_EQ(ex.await(b, 100ms).status, JobStatus::timeout);
  EXPECT_EQ(ex.await(a, 30s).status, JobStatus::completed);
  ex.shutdown();
  EXPECT_FALSE(fs::exists(dir / "ran"));
  fs::remove_all(dir);
}

TEST(Executor, DirectiveFileEmitsWithoutRunning) {
  const auto dir = temp_dir("emit");
  Executor ex({ExecutorKind::directive_file, 1, dir, {}});
  const auto script = shell("touch " + (dir / "ran").string() + "\n");
  const auto out = ex.await(ex.submit(script, instance(spec())), 1s);
  EXPECT_EQ(out.status, JobStatus::emitted);
  EXPECT_EQ(read(out.script_path), script.text);
  EXPECT_FALSE(fs::exists(dir / "ran"));
  fs::remove_all(dir);
}

TEST(Executor, HandleAndQueueErrors) {
  const auto dir = temp_dir("errors");
  Executor ex({ExecutorKind::local, 1, dir, {}});
  EXPECT_EQ(code_of([&] { ex.await({"999", "k", 0}, 10ms); }), Errc::unknown_handle);
  ex.shutdown();
  EXPECT_EQ(code_of([&] { ex.submit(shell("true\n"), instance(spec())); }), Errc::queue_closed);
  EXPECT_EQ(code_of([&] { Executor bad({ExecutorKind::local, 0, dir, {}}); }), Errc::invalid_argument);
  fs::remove_all(dir);
}
