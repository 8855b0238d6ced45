#include <charconv>
#include <cmath>

#include "cb/error.hpp"
#include "cb/tsdb.hpp"

namespace cb::tsdb {

namespace {

void escape_into(std::string& out, std::string_view s, std::string_view specials) {
  for (char c : s) {
    if (c == '\n') {
      out += "\\n";
    } else {
      if (c == '\\' || specials.find(c) != std::string_view::npos) out += '\\';
      out += c;
    }
  }
}

void format_double(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}

class Cursor {
 public:
  explicit Cursor(std::string_view s) : s_(s) {}

  bool done() const { return pos_ >= s_.size(); }
  char peek() const { return s_[pos_]; }
  std::size_t pos() const { return pos_; }
  void advance() { ++pos_; }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(pos_, what); }

  // Reads an escaped token up to (not including) an unescaped stop char.
  std::string token(std::string_view stops, const char* what) {
    std::string out;
    while (!done()) {
      char c = peek();
      if (c == '\\') {
        advance();
        if (done()) fail(std::string("dangling escape in ") + what);
        c = peek();
        out += c == 'n' ? '\n' : c;
        advance();
        continue;
      }
      if (stops.find(c) != std::string_view::npos) break;
      if (c == '\n' || c == '\r') fail(std::string("unexpected line break in ") + what);
      out += c;
      advance();
    }
    return out;
  }

  void expect(char c, const char* what) {
    if (done() || peek() != c) fail(std::string("expected ") + what);
    advance();
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

FieldValue parse_field_value(Cursor& cur) {
  const std::size_t start = cur.pos();
  if (!cur.done() && cur.peek() == '"') {
    cur.advance();
    std::string out;
    while (true) {
      if (cur.done()) cur.fail("unterminated string field");
      char c = cur.peek();
      if (c == '"') {
        cur.advance();
        return out;
      }
      if (c == '\\') {
        cur.advance();
        if (cur.done()) cur.fail("dangling escape in string field");
        c = cur.peek();
        out += c == 'n' ? '\n' : c;
      } else {
        out += c;
      }
      cur.advance();
    }
  }
  std::string raw;
  while (!cur.done() && cur.peek() != ',' && cur.peek() != ' ') {
    raw += cur.peek();
    cur.advance();
  }
  if (raw.empty()) throw ParseError(start, "empty field value");
  if (raw.back() == 'i') {
    std::int64_t v = 0;
    const char* end = raw.data() + raw.size() - 1;
    const auto [ptr, ec] = std::from_chars(raw.data(), end, v);
    if (ec != std::errc{} || ptr != end) throw ParseError(start, "malformed integer field '" + raw + "'");
    return v;
  }
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
  if (ec != std::errc{} || ptr != raw.data() + raw.size() || !std::isfinite(v))
    throw ParseError(start, "malformed float field '" + raw + "'");
  return v;
}

}  // namespace

std::string serialize_line(const MetricPoint& p) {
  std::string out;
  escape_into(out, p.measurement, " ,");
  for (const auto& [k, v] : p.tags) {
    out += ',';
    escape_into(out, k, " ,=");
    out += '=';
    escape_into(out, v, " ,=");
  }
  out += ' ';
  bool first = true;
  for (const auto& [k, v] : p.fields) {
    if (!first) out += ',';
    first = false;
    escape_into(out, k, " ,=");
    out += '=';
    if (const auto* d = std::get_if<double>(&v)) {
      format_double(out, *d);
    } else if (const auto* i = std::get_if<std::int64_t>(&v)) {
      out += std::to_string(*i);
      out += 'i';
    } else {
      out += '"';
      for (char c : std::get<std::string>(v)) {
        if (c == '\n') {
          out += "\\n";
          continue;
        }
        if (c == '"' || c == '\\') out += '\\';
        out += c;
      }
      out += '"';
    }
  }
  out += ' ';
  out += std::to_string(p.timestamp);
  return out;
}

MetricPoint parse_line(std::string_view line) {
  Cursor cur(line);
  MetricPoint p;
  p.measurement = cur.token(", ", "measurement");
  if (p.measurement.empty()) cur.fail("empty measurement");

  while (!cur.done() && cur.peek() == ',') {
    cur.advance();
    const std::size_t key_pos = cur.pos();
    std::string key = cur.token("=, ", "tag key");
    if (key.empty()) cur.fail("empty tag key");
    cur.expect('=', "'=' after tag key");
    std::string value = cur.token(", ", "tag value");
    if (value.empty()) cur.fail("empty tag value");
    if (!p.tags.emplace(std::move(key), std::move(value)).second)
      throw ParseError(key_pos, "duplicate tag key");
  }

  if (cur.done()) cur.fail("missing fields section");
  cur.expect(' ', "space before fields");
  while (true) {
    const std::size_t key_pos = cur.pos();
    std::string key = cur.token("=, ", "field key");
    if (key.empty()) cur.fail("empty field key");
    cur.expect('=', "'=' after field key");
    FieldValue value = parse_field_value(cur);
    if (!p.fields.emplace(std::move(key), std::move(value)).second)
      throw ParseError(key_pos, "duplicate field key");
    if (!cur.done() && cur.peek() == ',') {
      cur.advance();
      continue;
    }
    break;
  }

  if (cur.done()) cur.fail("missing timestamp");
  cur.expect(' ', "space before timestamp");
  const std::size_t ts_pos = cur.pos();
  const std::string_view ts = line.substr(ts_pos);
  const auto [ptr, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), p.timestamp);
  if (ts.empty() || ec != std::errc{} || ptr != ts.data() + ts.size())
    throw ParseError(ts_pos, "malformed timestamp");
  return p;
}

}  // namespace cb::tsdb
