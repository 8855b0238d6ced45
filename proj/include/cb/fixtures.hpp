#pragma once

// Golden datasets: a manifest (runs.json) naming runs and their line-format
// data files, plus a host registry (hosts.json).

#include <filesystem>
#include <string>
#include <vector>

#include "cb/pipeline.hpp"

namespace cb::fixtures {

struct ImportSummary {
  std::size_t points = 0;
  std::vector<std::string> run_ids;
  std::size_t hosts = 0;
};

/// Idempotent: re-importing replaces points with identical tags and
/// timestamps and overwrites the run documents.
ImportSummary import_fixtures(pipeline::Workspace& ws, const std::filesystem::path& dir);

}  // namespace cb::fixtures
