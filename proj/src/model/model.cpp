#include "cb/model.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"

#include "cb/digest.hpp"
#include "cb/error.hpp"

namespace cb {

std::string job_key(const std::string& spec_name, const std::string& host,
                    const std::string& compiler, const VariantAssignment& variants,
                    int repetition) {
  // nlohmann::json objects are std::map backed, so dump() is key-sorted.
  nlohmann::json canonical = {
      {"spec", spec_name},   {"host", host},           {"compiler", compiler},
      {"variants", variants}, {"repetition", repetition},
  };
  return sha256_hex(canonical.dump());
}

std::size_t matrix_cardinality(const BenchmarkSpec& spec) {
  std::set<std::pair<std::string, std::string>> excluded(spec.exclusions.begin(),
                                                         spec.exclusions.end());
  std::size_t pairs = 0;
  for (const auto& h : spec.hosts)
    for (const auto& c : spec.compilers)
      if (!excluded.count({h, c})) ++pairs;
  std::size_t product = 1;
  for (const auto& [key, values] : spec.variants) product *= values.size();
  return pairs * product * static_cast<std::size_t>(spec.repetitions);
}

std::vector<JobInstance> expand_matrix(const BenchmarkSpec& spec, const std::string& commit_id,
                                       TimestampNs timestamp, const HostRegistry& known_hosts) {
  spec.validate();
  for (const auto& h : spec.hosts) {
    if (!known_hosts.count(h)) throw Error(Errc::invalid_spec, spec.name + ": unknown host '" + h + "'");
  }
  std::set<std::pair<std::string, std::string>> excluded(spec.exclusions.begin(),
                                                         spec.exclusions.end());

  std::vector<std::string> hosts = spec.hosts;
  std::vector<std::string> compilers = spec.compilers;
  std::sort(hosts.begin(), hosts.end());
  std::sort(compilers.begin(), compilers.end());

  // Earlier (key-sorted) axes vary slowest, giving lexicographic order.
  std::vector<VariantAssignment> assignments{VariantAssignment{}};
  for (const auto& [key, values] : spec.variants) {
    auto sorted = values;
    std::sort(sorted.begin(), sorted.end());
    std::vector<VariantAssignment> next;
    next.reserve(assignments.size() * sorted.size());
    for (const auto& partial : assignments) {
      for (const auto& value : sorted) {
        auto extended = partial;
        extended[key] = value;
        next.push_back(std::move(extended));
      }
    }
    assignments = std::move(next);
  }

  std::vector<JobInstance> jobs;
  jobs.reserve(matrix_cardinality(spec));
  for (const auto& host : hosts) {
    for (const auto& compiler : compilers) {
      if (excluded.count({host, compiler})) continue;
      for (const auto& assignment : assignments) {
        for (int rep = 0; rep < spec.repetitions; ++rep) {
          JobInstance job;
          job.spec_name = spec.name;
          job.host = host;
          job.compiler = compiler;
          job.variant_assignment = assignment;
          job.repetition = rep;
          job.commit_id = commit_id;
          job.pipeline_timestamp = timestamp;
          job.job_key = job_key(spec.name, host, compiler, assignment, rep);
          jobs.push_back(std::move(job));
        }
      }
    }
  }
  return jobs;
}

TagMap job_tags(const JobInstance& job) {
  TagMap tags = job.variant_assignment;
  tags["spec"] = job.spec_name;
  tags["host"] = job.host;
  tags["compiler"] = job.compiler;
  tags["commit"] = job.commit_id;
  tags["job_key"] = job.job_key;
  std::erase_if(tags, [](const auto& kv) { return kv.second.empty(); });
  return tags;
}

}  // namespace cb
