#pragma once

#include <string>
#include <vector>

#include "cb/types.hpp"

namespace cb {

/// Stable identity of a job: hex SHA-256 over a canonical, key-sorted
/// serialization of the identifying fields.
std::string job_key(const std::string& spec_name, const std::string& host,
                    const std::string& compiler, const VariantAssignment& variants,
                    int repetition);

/// Expands the benchmark matrix into concrete jobs.
///
/// The result is the Cartesian product hosts x compilers x variants x
/// repetitions minus excluded (host, compiler) pairs, ordered
/// lexicographically by (host, compiler, variant values in key order,
/// repetition). Throws Error(invalid_spec) if the spec is invalid or names
/// a host missing from `known_hosts`.
std::vector<JobInstance> expand_matrix(const BenchmarkSpec& spec, const std::string& commit_id,
                                       TimestampNs timestamp, const HostRegistry& known_hosts);

/// Number of jobs expand_matrix yields for `spec`, computed without
/// materializing them.
std::size_t matrix_cardinality(const BenchmarkSpec& spec);

/// Tags every point produced for `job` carries.
TagMap job_tags(const JobInstance& job);

}  // namespace cb
