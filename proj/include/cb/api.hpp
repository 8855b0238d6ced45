#pragma once

// HTTP/JSON API over a Workspace.
//
//   POST /api/v1/ingest                      line-format body
//   POST /api/v1/query                       JSON query
//   GET  /api/v1/measurements
//   GET  /api/v1/tags?measurement=
//   GET  /api/v1/runs
//   GET  /api/v1/runs/{id}
//   GET  /api/v1/hosts
//   GET  /api/v1/analysis/roofline?run=[&kind=]
//   GET  /api/v1/analysis/timeshare?run=
//   GET  /api/v1/analysis/regressions?metric=<measurement>.<field>[&window=&threshold=&direction=]
//   GET  /api/v1/analysis/relperf?run=&metric=&bytes_per_update=[&kind=]
//
// Errors are problem documents (application/problem+json) with status
// 400, 404 or 503.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "cb/error.hpp"
#include "cb/pipeline.hpp"
#include "cb/tsdb.hpp"

namespace httplib {
class Server;
}

namespace cb::api {

/// {"groups":[{"tags":{...},"rows":[{"timestamp":..,"tags":{..},"fields":{..}}],"aggregate":..}]}
std::string query_result_json(const tsdb::QueryResult& result);

/// Keys: measurement, tags, group_by, start, end, aggregate, field.
/// Throws Error(invalid_query).
tsdb::Query query_from_json(const std::string& body);

int http_status(Errc code) noexcept;

struct ServerOptions {
  std::optional<std::filesystem::path> static_dir;
};

class Server {
 public:
  Server(pipeline::Workspace& ws, ServerOptions options = {});
  ~Server();

  /// Binds and serves until stop(). Returns false if binding fails.
  bool listen(const std::string& host, int port);
  /// Binds to an ephemeral port and returns it, or -1.
  int bind_any(const std::string& host);
  /// Serves on a socket bound with bind_any.
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

 private:
  void routes();

  pipeline::Workspace& ws_;
  ServerOptions options_;
  std::unique_ptr<httplib::Server> http_;
};

}  // namespace cb::api
