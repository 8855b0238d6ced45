#include "cb/lbm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "cb/error.hpp"

namespace cb::lbm {

void KernelConfig::validate() const {
  if (nx < 1 || ny < 1) throw Error(Errc::invalid_argument, "lattice dimensions must be >= 1");
  if (steps < 1) throw Error(Errc::invalid_argument, "steps must be >= 1");
  if (!(tau > 0.5)) throw Error(Errc::subcritical_tau, "tau must exceed 0.5");
  if (!std::isfinite(force.x) || !std::isfinite(force.y))
    throw Error(Errc::invalid_argument, "force must be finite");
}

Boundary boundary_from_string(const std::string& s) {
  if (s == "periodic") return Boundary::periodic;
  if (s == "channel-walls-y" || s == "channel") return Boundary::channel_walls_y;
  throw Error(Errc::invalid_argument, "unknown boundary '" + s + "'");
}

Initial initial_from_string(const std::string& s) {
  if (s == "uniform-rest" || s == "rest") return Initial::uniform_rest;
  if (s == "shear-perturbation" || s == "shear") return Initial::shear_perturbation;
  throw Error(Errc::invalid_argument, "unknown initial condition '" + s + "'");
}

Populations equilibrium(double rho, Vec2 u) {
  const double usq = u.x * u.x + u.y * u.y;
  Populations feq{};
  for (int i = 0; i < kQ; ++i) {
    const double cu = kCx[i] * u.x + kCy[i] * u.y;
    // 1/c_s^2 = 3, 1/(2 c_s^4) = 4.5, 1/(2 c_s^2) = 1.5
    feq[i] = kWeights[i] * rho * (1.0 + 3.0 * cu + 4.5 * cu * cu - 1.5 * usq);
  }
  return feq;
}

Moments macroscopics(const Populations& f, Vec2 force) {
  double rho = 0.0;
  double jx = 0.0;
  double jy = 0.0;
  for (int i = 0; i < kQ; ++i) {
    rho += f[i];
    jx += kCx[i] * f[i];
    jy += kCy[i] * f[i];
  }
  if (!(rho > 0.0)) throw Error(Errc::nonpositive_density, "density must be positive");
  return {rho, {force.x / (2.0 * rho) + jx / rho, force.y / (2.0 * rho) + jy / rho}};
}

double viscosity(double tau) {
  if (!(tau > 0.5)) throw Error(Errc::subcritical_tau, "tau must exceed 0.5");
  return kCs2 * (tau - 0.5);
}

Populations collide(const Populations& f, double tau, Vec2 force) {
  const Moments m = macroscopics(f, force);
  const Populations feq = equilibrium(m.rho, m.u);
  const double omega = 1.0 / tau;
  Populations out{};
  for (int i = 0; i < kQ; ++i) out[i] = (1.0 - omega) * f[i] + omega * feq[i];
  if (force.x != 0.0 || force.y != 0.0) {
    const double prefactor = 1.0 - 0.5 / tau;
    for (int i = 0; i < kQ; ++i) {
      const double cu = kCx[i] * m.u.x + kCy[i] * m.u.y;
      const double gx = 3.0 * (kCx[i] - m.u.x) + 9.0 * cu * kCx[i];
      const double gy = 3.0 * (kCy[i] - m.u.y) + 9.0 * cu * kCy[i];
      out[i] += prefactor * kWeights[i] * (gx * force.x + gy * force.y);
    }
  }
  return out;
}

LatticeField::LatticeField(int nx, int ny) : nx_(nx), ny_(ny) {
  if (nx < 1 || ny < 1) throw Error(Errc::invalid_argument, "lattice dimensions must be >= 1");
  src_.assign(cells() * kQ, 0.0);
  dst_.assign(cells() * kQ, 0.0);
}

Populations LatticeField::cell(int x, int y) const {
  Populations f{};
  const std::size_t base = index(x, y);
  for (int i = 0; i < kQ; ++i) f[i] = src_[base + i];
  return f;
}

void LatticeField::set_cell(int x, int y, const Populations& f) {
  const std::size_t base = index(x, y);
  for (int i = 0; i < kQ; ++i) src_[base + i] = f[i];
}

void LatticeField::fill_equilibrium(double rho, Vec2 u) {
  const Populations feq = equilibrium(rho, u);
  for (int y = 0; y < ny_; ++y)
    for (int x = 0; x < nx_; ++x) set_cell(x, y, feq);
}

double LatticeField::total_mass() const {
  double m = 0.0;
  for (double v : src_) m += v;
  return m;
}

Vec2 LatticeField::total_lattice_momentum() const {
  Vec2 p;
  for (std::size_t c = 0; c < cells(); ++c) {
    for (int i = 0; i < kQ; ++i) {
      p.x += kCx[i] * src_[c * kQ + i];
      p.y += kCy[i] * src_[c * kQ + i];
    }
  }
  return p;
}

std::vector<double> LatticeField::density() const {
  std::vector<double> rho(cells());
  for (int y = 0; y < ny_; ++y)
    for (int x = 0; x < nx_; ++x) {
      double r = 0.0;
      for (int i = 0; i < kQ; ++i) r += src_[index(x, y) + i];
      rho[static_cast<std::size_t>(y) * nx_ + x] = r;
    }
  return rho;
}

std::vector<Vec2> LatticeField::velocity(Vec2 force) const {
  std::vector<Vec2> u(cells());
  for (int y = 0; y < ny_; ++y)
    for (int x = 0; x < nx_; ++x) u[static_cast<std::size_t>(y) * nx_ + x] = macroscopics(cell(x, y), force).u;
  return u;
}

void LatticeField::step(const KernelConfig& cfg) {
  const bool walls = cfg.boundary == Boundary::channel_walls_y;
  double checksum = 0.0;
  for (int y = 0; y < ny_; ++y) {
    for (int x = 0; x < nx_; ++x) {
      const Populations pre = cell(x, y);
      double rho = 0.0;
      for (double v : pre) rho += v;
      if (!std::isfinite(rho)) throw InstabilityError(step_, "non-finite population");
      const Populations post = collide(pre, cfg.tau, cfg.force);
      for (int i = 0; i < kQ; ++i) {
        checksum += post[i];
        int tx = x + kCx[i];
        int ty = y + kCy[i];
        if (tx < 0) tx += nx_;
        else if (tx >= nx_) tx -= nx_;
        if (ty < 0 || ty >= ny_) {
          if (walls) {
            // Half-way bounce-back: the population returns to its own cell
            // with reversed direction.
            dst_[index(x, y) + kOpposite[i]] = post[i];
            continue;
          }
          ty = ty < 0 ? ty + ny_ : ty - ny_;
        }
        dst_[index(tx, ty) + i] = post[i];
      }
    }
  }
  if (!std::isfinite(checksum)) throw InstabilityError(step_, "non-finite population");
  src_.swap(dst_);
  ++step_;
}

LatticeField make_initial_field(const KernelConfig& cfg) {
  LatticeField field(cfg.nx, cfg.ny);
  switch (cfg.initial) {
    case Initial::uniform_rest:
      field.fill_equilibrium(1.0, {});
      break;
    case Initial::shear_perturbation: {
      const double two_pi = 2.0 * std::numbers::pi;
      for (int y = 0; y < cfg.ny; ++y)
        for (int x = 0; x < cfg.nx; ++x) {
          const Vec2 u{0.05 * std::sin(two_pi * y / cfg.ny), 0.01 * std::sin(two_pi * x / cfg.nx)};
          field.set_cell(x, y, equilibrium(1.0, u));
        }
      break;
    }
  }
  return field;
}

void collide_stream(LatticeField& field, const KernelConfig& cfg) { field.step(cfg); }

KernelReport run_benchmark(const KernelConfig& cfg) {
  cfg.validate();
  LatticeField field = make_initial_field(cfg);

  const auto t0 = std::chrono::steady_clock::now();
  for (long s = 0; s < cfg.steps; ++s) field.step(cfg);
  const auto t1 = std::chrono::steady_clock::now();

  KernelReport report;
  report.wall_seconds = std::max(std::chrono::duration<double>(t1 - t0).count(), 1e-9);
  report.cells = field.cells();
  report.steps = cfg.steps;
  report.mlups = static_cast<double>(report.cells) * static_cast<double>(report.steps) /
                 report.wall_seconds / 1e6;
  report.rho = field.density();
  report.u = field.velocity(cfg.force);
  return report;
}

std::string format_metric_lines(const KernelReport& report) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "cells: %zu\nsteps: %ld\nMLUPS per process: %.6f\ntime to solution: %.9f s\n",
                report.cells, report.steps, report.mlups, report.wall_seconds);
  return buf;
}

std::string format_model_counters(const KernelReport& report, const std::string& region) {
  const double updates = static_cast<double>(report.cells) * static_cast<double>(report.steps);
  const double flops = updates * kFlopsPerUpdate;
  const double bytes = updates * kBytesPerUpdate;
  const double t = report.wall_seconds;
  const char* rule = "+-----------------------------------+------------------+\n";
  std::string out = "Region " + region + ", Group 1: MODEL\n";
  out += rule;
  out += "|              Metric               |    HWThread 0    |\n";
  out += rule;
  char row[128];
  auto add = [&](const char* name, double value) {
    std::snprintf(row, sizeof row, "| %-33s | %16.6f |\n", name, value);
    out += row;
  };
  add("Runtime (RDTSC) [s]", t);
  add("DP [MFLOP/s]", flops / t / 1e6);
  add("Memory bandwidth [MBytes/s]", bytes / t / 1e6);
  add("Memory data volume [GBytes]", bytes / 1e9);
  add("Operational intensity [FLOP/Byte]", flops / bytes);
  out += rule;
  return out;
}

}  // namespace cb::lbm
