#pragma once
// Independent reference implementations and random generators shared by
// the unit tests and the acceptance runner.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "cb/lbm.hpp"
#include "cb/tsdb.hpp"

namespace cb::testing {

using namespace cb::lbm;
using namespace cb::tsdb;

// Straightforward pull-scheme reference: every destination cell gathers
// from its upwind neighbour, collision written out from the textbook
// formulas with explicit c_s^2.
struct OracleLattice {
  int nx, ny;
  std::vector<std::array<double, 9>> f;

  static constexpr int cx[9] = {0, 1, 0, -1, 0, 1, -1, -1, 1};
  static constexpr int cy[9] = {0, 0, 1, 0, -1, 1, 1, -1, -1};
  static constexpr double w[9] = {4. / 9, 1. / 9, 1. / 9, 1. / 9, 1. / 9, 1. / 36, 1. / 36, 1. / 36, 1. / 36};

  static int opposite(int i) {
    for (int j = 0; j < 9; ++j)
      if (cx[j] == -cx[i] && cy[j] == -cy[i]) return j;
    return -1;
  }

  std::array<double, 9> post(int x, int y, double tau, double gx, double gy) const {
    const auto& c = f[static_cast<std::size_t>(y) * nx + x];
    double rho = 0, mx = 0, my = 0;
    for (int i = 0; i < 9; ++i) {
      rho += c[i];
      mx += cx[i] * c[i];
      my += cy[i] * c[i];
    }
    const double ux = (mx + 0.5 * gx) / rho;
    const double uy = (my + 0.5 * gy) / rho;
    const double cs2 = 1.0 / 3.0;
    std::array<double, 9> out{};
    for (int i = 0; i < 9; ++i) {
      const double cu = cx[i] * ux + cy[i] * uy;
      const double feq = w[i] * rho * (1 + cu / cs2 + cu * cu / (2 * cs2 * cs2) - (ux * ux + uy * uy) / (2 * cs2));
      const double fx = ((cx[i] - ux) / cs2 + cu * cx[i] / (cs2 * cs2)) * gx;
      const double fy = ((cy[i] - uy) / cs2 + cu * cy[i] / (cs2 * cs2)) * gy;
      out[i] = c[i] - (c[i] - feq) / tau + (1 - 1 / (2 * tau)) * w[i] * (fx + fy);
    }
    return out;
  }

  void step(double tau, double gx, double gy, bool walls) {
    std::vector<std::array<double, 9>> collided(f.size());
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) collided[static_cast<std::size_t>(y) * nx + x] = post(x, y, tau, gx, gy);
    std::vector<std::array<double, 9>> next(f.size());
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x)
        for (int i = 0; i < 9; ++i) {
          const int sx = ((x - cx[i]) % nx + nx) % nx;
          int sy = y - cy[i];
          if (sy < 0 || sy >= ny) {
            if (walls) {
              next[static_cast<std::size_t>(y) * nx + x][i] = collided[static_cast<std::size_t>(y) * nx + x][opposite(i)];
              continue;
            }
            sy = (sy + ny) % ny;
          }
          next[static_cast<std::size_t>(y) * nx + x][i] = collided[static_cast<std::size_t>(sy) * nx + sx][i];
        }
    f = std::move(next);
  }
};

inline LatticeField random_field(int nx, int ny, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> rho(0.9, 1.1), u(-0.05, 0.05), noise(-1e-3, 1e-3);
  LatticeField field(nx, ny);
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) {
      auto f = equilibrium(rho(rng), {u(rng), u(rng)});
      for (auto& v : f) v += noise(rng) * v;
      field.set_cell(x, y, f);
    }
  return field;
}

// Reference evaluation: a flat list scanned in full for every query.
inline QueryResult full_scan(const std::vector<MetricPoint>& points, const Query& q) {
  std::map<std::pair<TagMap, TimestampNs>, MetricPoint> latest;
  for (const auto& p : points)
    if (p.measurement == q.measurement) latest[{p.tags, p.timestamp}] = p;
  std::map<std::vector<std::string>, std::vector<Row>> groups;
  for (const auto& [key, p] : latest) {
    bool match = p.timestamp >= q.start && p.timestamp < q.end;
    for (const auto& [k, v] : q.tag_filters) {
      auto it = p.tags.find(k);
      match = match && it != p.tags.end() && it->second == v;
    }
    if (!match) continue;
    FieldMap fields = p.fields;
    if (!q.field.empty()) {
      auto it = p.fields.find(q.field);
      if (it == p.fields.end()) continue;
      fields = {{it->first, it->second}};
    }
    std::vector<std::string> gk;
    for (const auto& g : q.group_by) gk.push_back(p.tags.count(g) ? p.tags.at(g) : "");
    groups[gk].push_back(Row{p.timestamp, p.tags, fields});
  }
  QueryResult out;
  for (auto& [gk, rows] : groups) {
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
      return std::tie(a.timestamp, a.tags) < std::tie(b.timestamp, b.tags);
    });
    Group g;
    for (std::size_t i = 0; i < q.group_by.size(); ++i) g.tags[q.group_by[i]] = gk[i];
    if (q.aggregate == Aggregate::none) {
      g.rows = rows;
    } else {
      std::vector<double> vals;
      for (const auto& r : rows)
        if (auto v = numeric_value(r.fields.at(q.field))) vals.push_back(*v);
      if (!vals.empty()) {
        double acc = vals[0];
        if (q.aggregate == Aggregate::mean) {
          acc = 0;
          for (double v : vals) acc += v;
          acc /= static_cast<double>(vals.size());
        } else if (q.aggregate == Aggregate::min) {
          acc = *std::min_element(vals.begin(), vals.end());
        } else if (q.aggregate == Aggregate::max) {
          acc = *std::max_element(vals.begin(), vals.end());
        } else {
          acc = vals.back();
        }
        g.aggregate = acc;
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

inline MetricPoint random_point(std::mt19937& rng) {
  static const std::vector<std::string> hosts = {"icx36", "rome1", "skylakesp2"};
  static const std::vector<std::string> solvers = {"ilu", "pardiso", "umfpack"};
  MetricPoint p;
  p.measurement = rng() % 4 == 0 ? "tts" : "mlups";
  p.tags["host"] = hosts[rng() % hosts.size()];
  p.tags["solver"] = solvers[rng() % solvers.size()];
  if (rng() % 3 == 0) p.tags["case"] = "c" + std::to_string(rng() % 2);
  p.fields["value"] = std::uniform_real_distribution<double>(0, 100)(rng);
  if (rng() % 2) p.fields["n"] = static_cast<std::int64_t>(rng() % 1000);
  if (rng() % 5 == 0) p.fields["note"] = std::string("x y,z=\"q\"");
  p.timestamp = static_cast<TimestampNs>(rng() % 5000);
  return p;
}

inline Query random_query(std::mt19937& rng) {
  Query q;
  q.measurement = rng() % 4 == 0 ? "tts" : "mlups";
  if (rng() % 2) q.tag_filters["host"] = rng() % 2 ? "icx36" : "rome1";
  if (rng() % 3 == 0) q.tag_filters["case"] = "c1";
  if (rng() % 2) q.group_by.push_back("solver");
  if (rng() % 3 == 0) q.group_by.push_back("case");
  if (rng() % 2) {
    q.start = static_cast<TimestampNs>(rng() % 2500);
    q.end = q.start + 1 + static_cast<TimestampNs>(rng() % 2500);
  }
  switch (rng() % 5) {
    case 0: q.field = "value"; break;
    case 1: q.field = "n"; q.aggregate = Aggregate::max; break;
    case 2: q.field = "value"; q.aggregate = Aggregate::mean; break;
    case 3: q.field = "value"; q.aggregate = rng() % 2 ? Aggregate::min : Aggregate::last; break;
    default: break;
  }
  return q;
}

// Points built from an alphabet heavy in characters the line format must
// escape.
inline MetricPoint random_wire_point(std::mt19937& rng) {
  const std::string alphabet = "ab =,\\\"\nxyz_-.";
  auto word = [&](bool nonempty) {
    std::string s;
    const int n = (nonempty ? 1 : 0) + static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) s += alphabet[rng() % alphabet.size()];
    return s;
  };
  MetricPoint p;
  p.measurement = word(true);
  for (int t = 0; t < static_cast<int>(rng() % 3); ++t) p.tags[word(true)] = word(true);
  const int nf = 1 + static_cast<int>(rng() % 3);
  for (int f = 0; f < nf; ++f) {
    const auto key = word(true);
    switch (rng() % 3) {
      case 0: p.fields[key] = std::ldexp(static_cast<double>(rng()), -static_cast<int>(rng() % 60)) - 1e3; break;
      case 1: p.fields[key] = static_cast<std::int64_t>(rng()) - (1ll << 31); break;
      default: p.fields[key] = word(false); break;
    }
  }
  p.timestamp = static_cast<TimestampNs>(rng()) * 1000;
  return p;
}

}  // namespace cb::testing
