#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

#include "cb/error.hpp"
#include "cb/tsdb.hpp"

namespace cb::tsdb {

namespace fs = std::filesystem;

const char* to_string(Aggregate a) noexcept {
  switch (a) {
    case Aggregate::none: return "none";
    case Aggregate::mean: return "mean";
    case Aggregate::min: return "min";
    case Aggregate::max: return "max";
    case Aggregate::last: return "last";
  }
  return "none";
}

std::optional<Aggregate> aggregate_from_string(const std::string& s) {
  for (Aggregate a : {Aggregate::none, Aggregate::mean, Aggregate::min, Aggregate::max, Aggregate::last})
    if (s == to_string(a)) return a;
  return std::nullopt;
}

void Query::validate() const {
  if (measurement.empty()) throw Error(Errc::invalid_query, "query without measurement");
  if (!(start < end)) throw Error(Errc::invalid_query, "time range must satisfy start < end");
  if (aggregate != Aggregate::none && field.empty())
    throw Error(Errc::invalid_query, "aggregate requires a field");
}

std::optional<double> fold(const std::vector<Row>& rows, Aggregate aggregate, const std::string& field) {
  std::optional<double> acc;
  std::size_t count = 0;
  for (const auto& row : rows) {
    auto it = row.fields.find(field);
    if (it == row.fields.end()) continue;
    const auto v = numeric_value(it->second);
    if (!v) continue;
    ++count;
    switch (aggregate) {
      case Aggregate::mean: acc = acc.value_or(0.0) + *v; break;
      case Aggregate::min: acc = acc ? std::min(*acc, *v) : *v; break;
      case Aggregate::max: acc = acc ? std::max(*acc, *v) : *v; break;
      case Aggregate::last: acc = *v; break;
      case Aggregate::none: return std::nullopt;
    }
  }
  if (aggregate == Aggregate::mean && acc) *acc /= static_cast<double>(count);
  return acc;
}

namespace {

std::string hex_encode(std::string_view s) {
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned char c : s) {
    out += hex[c >> 4];
    out += hex[c & 0xf];
  }
  return out;
}

void write_all(int fd, const std::string& data) {
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == ENOSPC || errno == EDQUOT) throw Error(Errc::storage_full, "no space left for metrics log");
      throw Error(Errc::storage_error, std::string("metrics log write failed: ") + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
}

}  // namespace

Store::Store(fs::path dir, StoreOptions options) : dir_(std::move(dir)), options_(options) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec || !fs::is_directory(dir_))
    throw Error(Errc::store_unavailable, "cannot open metrics directory " + dir_.string());

  std::vector<fs::path> logs;
  for (const auto& entry : fs::directory_iterator(dir_, ec)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.starts_with("m-") && name.ends_with(".lp")) logs.push_back(entry.path());
  }
  if (ec) throw Error(Errc::store_unavailable, "cannot list metrics directory " + dir_.string());
  std::sort(logs.begin(), logs.end());

  for (const auto& path : logs) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string content = buf.str();
    std::size_t pos = content.find('\n');
    if (pos == std::string::npos || content.substr(0, pos) != kLogHeader)
      throw Error(Errc::store_unavailable, "unrecognised metrics log header in " + path.string());
    ++pos;
    while (pos < content.size()) {
      const std::size_t end = content.find('\n', pos);
      // An unterminated tail is a torn append; it was never acknowledged.
      if (end == std::string::npos) break;
      const std::string_view line(content.data() + pos, end - pos);
      if (!line.empty()) {
        try {
          apply(parse_line(line));
        } catch (const ParseError& e) {
          throw Error(Errc::store_unavailable, "corrupt metrics log " + path.string() + ": " + e.what());
        }
      }
      pos = end + 1;
    }
  }
}

Store::~Store() {
  for (auto& [name, m] : measurements_)
    if (m.fd >= 0) ::close(m.fd);
}

fs::path Store::log_path(const std::string& measurement) const {
  return dir_ / ("m-" + hex_encode(measurement) + ".lp");
}

void Store::apply(const MetricPoint& point) {
  auto& m = measurements_[point.measurement];
  auto it = m.by_tags.find(point.tags);
  std::size_t idx = 0;
  if (it == m.by_tags.end()) {
    idx = m.series.size();
    m.series.push_back(Series{point.tags, {}});
    m.by_tags.emplace(point.tags, idx);
    for (const auto& [k, v] : point.tags) m.index[k][v].insert(idx);
  } else {
    idx = it->second;
  }
  auto [pit, inserted] = m.series[idx].points.insert_or_assign(point.timestamp, point.fields);
  if (inserted) ++points_;
}

void Store::append(Measurement& m, const std::string& measurement, const std::string& line) {
  if (m.fd < 0) {
    const fs::path path = log_path(measurement);
    const bool fresh = !fs::exists(path);
    m.fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (m.fd < 0) throw Error(Errc::storage_error, "cannot open metrics log " + path.string());
    if (fresh) write_all(m.fd, std::string(kLogHeader) + "\n");
  }
  write_all(m.fd, line);
  if (options_.sync && ::fdatasync(m.fd) != 0)
    throw Error(Errc::storage_error, "fdatasync failed on metrics log");
}

void Store::ingest(const MetricPoint& point) {
  point.validate();
  const std::string line = serialize_line(point) + "\n";
  std::unique_lock lock(mutex_);
  auto& m = measurements_[point.measurement];
  const auto existing = m.by_tags.find(point.tags);
  const bool replaces = existing != m.by_tags.end() && m.series[existing->second].points.count(point.timestamp);
  if (!replaces && points_ >= options_.max_points)
    throw Error(Errc::storage_full, "metrics store is full");
  append(m, point.measurement, line);
  apply(point);
}

void Store::ingest_line(std::string_view line) { ingest(parse_line(line)); }

QueryResult Store::query(const Query& q) const {
  q.validate();
  std::shared_lock lock(mutex_);
  auto mit = measurements_.find(q.measurement);
  if (mit == measurements_.end()) return {};
  const Measurement& m = mit->second;

  std::optional<std::set<std::size_t>> candidates;
  for (const auto& [key, value] : q.tag_filters) {
    auto kit = m.index.find(key);
    if (kit == m.index.end()) return {};
    auto vit = kit->second.find(value);
    if (vit == kit->second.end()) return {};
    if (!candidates) {
      candidates = vit->second;
    } else {
      std::set<std::size_t> both;
      std::set_intersection(candidates->begin(), candidates->end(), vit->second.begin(), vit->second.end(),
                            std::inserter(both, both.end()));
      candidates = std::move(both);
    }
  }
  std::vector<std::size_t> series_ids;
  if (candidates) {
    series_ids.assign(candidates->begin(), candidates->end());
  } else {
    series_ids.resize(m.series.size());
    for (std::size_t i = 0; i < series_ids.size(); ++i) series_ids[i] = i;
  }

  std::map<std::vector<std::string>, std::vector<Row>> groups;
  for (std::size_t id : series_ids) {
    const Series& s = m.series[id];
    std::vector<std::string> key;
    key.reserve(q.group_by.size());
    for (const auto& g : q.group_by) {
      auto t = s.tags.find(g);
      key.push_back(t == s.tags.end() ? std::string() : t->second);
    }
    std::vector<Row>* rows = nullptr;
    for (auto it = s.points.lower_bound(q.start); it != s.points.end() && it->first < q.end; ++it) {
      FieldMap fields;
      if (!q.field.empty()) {
        auto f = it->second.find(q.field);
        if (f == it->second.end()) continue;
        fields.emplace(f->first, f->second);
      } else {
        fields = it->second;
      }
      if (!rows) rows = &groups[key];
      rows->push_back(Row{it->first, s.tags, std::move(fields)});
    }
  }

  QueryResult result;
  result.reserve(groups.size());
  for (auto& [key, rows] : groups) {
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
      return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.tags < b.tags;
    });
    Group g;
    for (std::size_t i = 0; i < q.group_by.size(); ++i) g.tags[q.group_by[i]] = key[i];
    if (q.aggregate == Aggregate::none) {
      g.rows = std::move(rows);
    } else {
      g.aggregate = fold(rows, q.aggregate, q.field);
    }
    result.push_back(std::move(g));
  }
  return result;
}

std::vector<std::string> Store::measurements() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [name, m] : measurements_)
    if (!m.series.empty()) out.push_back(name);
  return out;
}

std::map<std::string, std::set<std::string>> Store::tag_values(const std::string& measurement) const {
  std::shared_lock lock(mutex_);
  std::map<std::string, std::set<std::string>> out;
  auto it = measurements_.find(measurement);
  if (it == measurements_.end()) return out;
  for (const auto& [key, values] : it->second.index)
    for (const auto& [value, ids] : values) out[key].insert(value);
  return out;
}

std::size_t Store::point_count() const {
  std::shared_lock lock(mutex_);
  return points_;
}

std::vector<MetricPoint> Store::dump() const {
  std::shared_lock lock(mutex_);
  std::vector<MetricPoint> out;
  for (const auto& [name, m] : measurements_) {
    for (const auto& [tags, idx] : m.by_tags) {
      for (const auto& [ts, fields] : m.series[idx].points) out.push_back(MetricPoint{name, tags, fields, ts});
    }
  }
  return out;
}

}  // namespace cb::tsdb
