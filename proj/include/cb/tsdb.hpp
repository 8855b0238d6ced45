#pragma once

// Embedded time-series store for MetricPoints.
//
// Line grammar (bit-exact):
//
//   <measurement>[,<tagkey>=<tagval>...] <fieldkey>=<fieldval>[,...] <timestamp_ns>
//
// Measurements escape backslash, space and comma with a backslash; tag
// keys, tag values and field keys additionally escape '='. Float fields
// are bare (shortest round-trip form), integer fields carry an 'i' suffix
// and string fields are double-quoted with '"' and '\' escaped. Tags and
// fields are written key-sorted.
//
// On disk every measurement owns one append-only log under the data
// directory, starting with a version header line. The in-memory tag index
// is rebuilt from the logs on open.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "cb/types.hpp"

namespace cb::tsdb {

inline constexpr const char* kLogHeader = "# cb-tsdb v1";

/// Throws ParseError carrying the byte offset of the failure.
MetricPoint parse_line(std::string_view line);
std::string serialize_line(const MetricPoint& point);

enum class Aggregate { none, mean, min, max, last };

const char* to_string(Aggregate a) noexcept;
std::optional<Aggregate> aggregate_from_string(const std::string& s);

struct Query {
  std::string measurement;
  TagMap tag_filters;
  std::vector<std::string> group_by;
  TimestampNs start = std::numeric_limits<TimestampNs>::min();
  TimestampNs end = std::numeric_limits<TimestampNs>::max();
  Aggregate aggregate = Aggregate::none;
  /// Required when aggregating; otherwise restricts rows to points that
  /// carry this field and projects onto it.
  std::string field;

  /// Throws Error(invalid_query).
  void validate() const;
};

struct Row {
  TimestampNs timestamp = 0;
  TagMap tags;
  FieldMap fields;

  bool operator==(const Row&) const = default;
};

struct Group {
  /// One entry per group_by key; "" when a series lacks that tag.
  TagMap tags;
  /// Merged over the group's series, ordered by (timestamp, series tags).
  std::vector<Row> rows;
  /// Set when aggregating and at least one numeric value matched.
  std::optional<double> aggregate;

  bool operator==(const Group&) const = default;
};

using QueryResult = std::vector<Group>;

/// Folds time-ordered rows of one group into the requested aggregate over
/// the numeric values of `field`.
std::optional<double> fold(const std::vector<Row>& rows, Aggregate aggregate, const std::string& field);

struct StoreOptions {
  /// Ingest fails with StorageFull beyond this many stored points.
  std::size_t max_points = std::numeric_limits<std::size_t>::max();
  /// fsync after every append rather than relying on write(2) alone.
  bool sync = false;
};

class Store {
 public:
  /// Opens (creating if needed) the store under `dir` and replays its logs.
  /// Throws Error(store_unavailable) on I/O or format failure.
  explicit Store(std::filesystem::path dir, StoreOptions options = {});
  ~Store();

  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  /// Durable once this returns. A point with the same measurement, tag set
  /// and timestamp as a stored point replaces its fields.
  void ingest(const MetricPoint& point);
  void ingest_line(std::string_view line);

  QueryResult query(const Query& q) const;

  std::vector<std::string> measurements() const;
  /// Distinct values per tag key within a measurement.
  std::map<std::string, std::set<std::string>> tag_values(const std::string& measurement) const;
  std::size_t point_count() const;

  /// Every stored point, ordered by measurement, series tags, timestamp.
  std::vector<MetricPoint> dump() const;

  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  struct Series {
    TagMap tags;
    std::map<TimestampNs, FieldMap> points;
  };
  struct Measurement {
    std::vector<Series> series;
    std::map<TagMap, std::size_t> by_tags;
    // tag key -> tag value -> series indices
    std::map<std::string, std::map<std::string, std::set<std::size_t>>> index;
    int fd = -1;
  };

  void apply(const MetricPoint& point);
  void append(Measurement& m, const std::string& measurement, const std::string& line);
  std::filesystem::path log_path(const std::string& measurement) const;

  std::filesystem::path dir_;
  StoreOptions options_;
  std::map<std::string, Measurement> measurements_;
  std::size_t points_ = 0;
  mutable std::shared_mutex mutex_;
};

}  // namespace cb::tsdb
