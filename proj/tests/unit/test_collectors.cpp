#include <cstdlib>

#include <gtest/gtest.h>

#include "cb/collectors.hpp"
#include "cb/error.hpp"
#include "cb/model.hpp"

using namespace cb;
using namespace cb::collect;

namespace {

JobInstance job() {
  JobInstance j;
  j.job_key = "k1";
  j.spec_name = "lbm";
  j.host = "icx36";
  j.compiler = "gcc";
  j.commit_id = "abc";
  j.variant_assignment = {{"collision", "srt"}};
  j.pipeline_timestamp = 1000;
  return j;
}

const char* kCounters =
    "--------------------------------------------------------------------------------\n"
    "Region solve, Group 1: MEM_DP\n"
    "+----------------------+-----------+\n"
    "|        Metric        | HWThread 0 |\n"
    "+----------------------+-----------+\n"
    "| DP [MFLOP/s]         | 25000     |\n"
    "| Memory bandwidth [MB/s] | 180000 |\n"
    "+----------------------+-----------+\n";

}  // namespace

TEST(PerfCounters, ParsesRegionTable) {
  const auto points = parse_perf_counters(kCounters, job());
  ASSERT_EQ(points.size(), 2u);
  EXPECT_EQ(points[0].measurement, kCounterMeasurement);
  EXPECT_EQ(points[0].tags.at("region"), "solve");
  EXPECT_EQ(points[0].tags.at("metric"), "DP [MFLOP/s]");
  EXPECT_EQ(points[0].tags.at("unit"), "MFLOP/s");
  EXPECT_EQ(points[0].tags.at("host"), "icx36");
  EXPECT_EQ(points[0].tags.at("collision"), "srt");
  EXPECT_EQ(std::get<double>(points[0].fields.at("value")), 25000.0);
  EXPECT_EQ(points[1].tags.at("unit"), "MB/s");
  EXPECT_EQ(std::get<double>(points[1].fields.at("value")), 180000.0);
  EXPECT_EQ(points[1].timestamp, 1000);
  for (const auto& p : points) EXPECT_NO_THROW(p.validate());
}

TEST(PerfCounters, IgnoresInterleavedNoise) {
  std::string noisy = kCounters;
  noisy.insert(noisy.find("| DP"), "WARN: counter multiplexing active\n\n");
  noisy.insert(noisy.find("| Memory"), "| garbage | not-a-number |\n");
  EXPECT_EQ(parse_perf_counters(noisy, job()), parse_perf_counters(kCounters, job()));
}

TEST(PerfCounters, EmptyInputIsAnError) {
  try {
    parse_perf_counters("nothing here\n", job());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::empty_input);
  }
}

TEST(PerfCounters, MultipleRegions) {
  const std::string text = std::string(kCounters) + "Region init\n| DP [MFLOP/s] | 12.5 |\n";
  const auto points = parse_perf_counters(text, job());
  ASSERT_EQ(points.size(), 3u);
  EXPECT_EQ(points[2].tags.at("region"), "init");
  EXPECT_EQ(std::get<double>(points[2].fields.at("value")), 12.5);
}

TEST(AppOutput, LbmRulesExtractMetrics) {
  const std::string out =
      "collision: srt\ncells: 32768\nsteps: 100\nMLUPS per process: 12.345678\ntime to solution: 0.265432100 s\n";
  const auto points = parse_app_output(out, lbm_rules(), job());
  ASSERT_EQ(points.size(), 2u);
  EXPECT_EQ(points[0].measurement, "mlups");
  EXPECT_DOUBLE_EQ(std::get<double>(points[0].fields.at("mlups_per_process")), 12.345678);
  EXPECT_EQ(points[0].tags.at("unit"), "MLUPS");
  EXPECT_EQ(points[1].measurement, "tts");
  EXPECT_DOUBLE_EQ(std::get<double>(points[1].fields.at("seconds")), 0.2654321);
}

TEST(AppOutput, MissingMetricsYieldNoPoints) {
  EXPECT_TRUE(parse_app_output("segfault\n", lbm_rules(), job()).empty());
}

TEST(AppOutput, FirstMatchWins) {
  const auto points = parse_app_output("MLUPS per process: 1\nMLUPS per process: 2\n", lbm_rules(), job());
  ASSERT_EQ(points.size(), 1u);
  EXPECT_EQ(std::get<double>(points[0].fields.at("mlups_per_process")), 1.0);
}

TEST(ExtractionRule, RejectsBadPatterns) {
  EXPECT_THROW(ExtractionRule("no group", "f", "", "m"), Error);
  EXPECT_THROW(ExtractionRule("(a)(b)", "f", "", "m"), Error);
  EXPECT_THROW(ExtractionRule("(unclosed", "f", "", "m"), Error);
  EXPECT_THROW(ExtractionRule("(x)", "host", "", "m"), Error);
  EXPECT_NO_THROW(ExtractionRule("v=(\\d+)", "v", "", "m"));
}

TEST(MachineState, RoundTrip) {
  ::setenv("CB_TEST_VALUE", "a\\b\nc", 1);
  const auto s = capture_machine_state();
  EXPECT_FALSE(s.hostname.empty());
  EXPECT_GT(s.core_count, 0);
  EXPECT_EQ(s.env_snapshot.at("CB_TEST_VALUE"), "a\\b\nc");
  EXPECT_EQ(parse_machine_state(serialize(s)), s);
  ::unsetenv("CB_TEST_VALUE");
}

TEST(MachineState, EnvFilter) {
  EXPECT_TRUE(env_allowed("CB_PARAM_nx"));
  EXPECT_TRUE(env_allowed("OMP_NUM_THREADS"));
  EXPECT_TRUE(env_allowed("PATH"));
  EXPECT_FALSE(env_allowed("HOME"));
  EXPECT_FALSE(env_allowed("AWS_SECRET_ACCESS_KEY"));
}

TEST(MachineState, MalformedLineReportsOffset) {
  try {
    parse_machine_state("hostname: a\nbroken\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 12u);
  }
}
