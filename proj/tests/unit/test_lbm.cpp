#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cb/error.hpp"
#include "cb/lbm.hpp"
#include "oracles.hpp"

using namespace cb;
using namespace cb::lbm;

using cb::testing::OracleLattice;
using cb::testing::random_field;

TEST(Equilibrium, MomentIdentities) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> rho_d(0.5, 2.0), ang(0, 2 * M_PI), mag(0, 0.1);
  for (int t = 0; t < 1000; ++t) {
    const double rho = rho_d(rng);
    const double a = ang(rng), m = mag(rng);
    const Vec2 u{m * std::cos(a), m * std::sin(a)};
    const auto feq = equilibrium(rho, u);
    double s = 0, jx = 0, jy = 0;
    for (int i = 0; i < kQ; ++i) {
      s += feq[i];
      jx += kCx[i] * feq[i];
      jy += kCy[i] * feq[i];
    }
    EXPECT_NEAR(s, rho, 1e-13);
    EXPECT_NEAR(jx, rho * u.x, 1e-13);
    EXPECT_NEAR(jy, rho * u.y, 1e-13);
  }
}

TEST(Equilibrium, WeightsAndLattice) {
  double sum = 0;
  for (double w : kWeights) sum += w;
  EXPECT_DOUBLE_EQ(sum, 1.0);
  for (int i = 0; i < kQ; ++i) {
    EXPECT_EQ(kCx[kOpposite[i]], -kCx[i]);
    EXPECT_EQ(kCy[kOpposite[i]], -kCy[i]);
  }
  EXPECT_EQ(kBytesPerUpdate, 144.0);
}

TEST(Viscosity, Values) {
  EXPECT_DOUBLE_EQ(viscosity(1.0), 1.0 / 6.0);
  EXPECT_NEAR(viscosity(0.8), 0.1, 1e-15);
  EXPECT_NEAR(viscosity(0.5 + 1e-12), 0.0, 1e-12);
  EXPECT_THROW(viscosity(0.5), Error);
}

TEST(Collide, TauOneGivesEquilibrium) {
  Populations f = equilibrium(1.0, {0.02, -0.01});
  f[3] += 0.01;
  const auto m = macroscopics(f, {});
  const auto post = collide(f, 1.0, {});
  const auto feq = equilibrium(m.rho, m.u);
  for (int i = 0; i < kQ; ++i) EXPECT_NEAR(post[i], feq[i], 1e-16);
}

TEST(Collide, NonPositiveDensityThrows) {
  Populations f{};
  try {
    collide(f, 1.0, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::nonpositive_density);
  }
}

TEST(Stepper, RestStateIsFixedPoint) {
  for (auto boundary : {Boundary::periodic, Boundary::channel_walls_y}) {
    KernelConfig cfg;
    cfg.nx = 16;
    cfg.ny = 12;
    cfg.tau = 0.7;
    cfg.boundary = boundary;
    LatticeField field = make_initial_field(cfg);
    const auto initial = field.raw();
    for (int s = 0; s < 20; ++s) {
      const auto before = field.raw();
      field.step(cfg);
      for (std::size_t i = 0; i < before.size(); ++i) ASSERT_NEAR(field.raw()[i], before[i], 1e-15);
    }
    for (std::size_t i = 0; i < initial.size(); ++i) EXPECT_NEAR(field.raw()[i], initial[i], 1e-14);
  }
}

TEST(Stepper, MassConservedPeriodicAndWalled) {
  for (auto boundary : {Boundary::periodic, Boundary::channel_walls_y}) {
    KernelConfig cfg;
    cfg.nx = 32;
    cfg.ny = 24;
    cfg.tau = 0.8;
    cfg.boundary = boundary;
    LatticeField field = random_field(cfg.nx, cfg.ny, 3);
    const double m0 = field.total_mass();
    for (int s = 0; s < 1000; ++s) field.step(cfg);
    EXPECT_LE(std::abs(field.total_mass() - m0) / m0, 1e-10);
  }
}

TEST(Stepper, MatchesOracle) {
  for (auto boundary : {Boundary::periodic, Boundary::channel_walls_y}) {
    KernelConfig cfg;
    cfg.nx = 8;
    cfg.ny = 8;
    cfg.tau = 0.85;
    cfg.force = {1e-5, -2e-5};
    cfg.boundary = boundary;
    LatticeField field = random_field(8, 8, 11);
    OracleLattice oracle{8, 8, {}};
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) oracle.f.push_back(field.cell(x, y));
    for (int s = 0; s < 10; ++s) {
      field.step(cfg);
      oracle.step(cfg.tau, cfg.force.x, cfg.force.y, boundary == Boundary::channel_walls_y);
    }
    double diff = 0;
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        const auto a = field.cell(x, y);
        for (int i = 0; i < kQ; ++i) diff = std::max(diff, std::abs(a[i] - oracle.f[y * 8 + x][i]));
      }
    EXPECT_LE(diff, 1e-13);
  }
}

TEST(Stepper, MomentumGrowsWithForce) {
  KernelConfig cfg;
  cfg.nx = 16;
  cfg.ny = 16;
  cfg.tau = 0.9;
  cfg.force = {2e-6, -1e-6};
  LatticeField field = make_initial_field(cfg);
  const double n = static_cast<double>(field.cells());
  for (int s = 0; s < 100; ++s) field.step(cfg);
  const auto p = field.total_lattice_momentum();
  EXPECT_NEAR(p.x, n * cfg.force.x * 100, 1e-8 * n * std::abs(cfg.force.x) * 100);
  EXPECT_NEAR(p.y, n * cfg.force.y * 100, 1e-8 * n * std::abs(cfg.force.y) * 100);
}

TEST(Stepper, PoiseuilleProfile) {
  KernelConfig cfg;
  cfg.nx = 1;
  cfg.ny = 64;
  cfg.tau = 0.9;
  cfg.force = {1e-6, 0.0};
  cfg.boundary = Boundary::channel_walls_y;
  LatticeField field = make_initial_field(cfg);
  for (int s = 0; s < 60000; ++s) field.step(cfg);
  const auto u = field.velocity(cfg.force);
  const double nu = viscosity(cfg.tau);
  const double h = 64.0;
  double umax = 0, err = 0;
  for (int j = 0; j < 64; ++j) {
    const double y = j + 0.5;
    const double exact = cfg.force.x / (2 * nu) * y * (h - y);
    umax = std::max(umax, exact);
    err = std::max(err, std::abs(u[j].x - exact));
  }
  EXPECT_LE(err / umax, 0.02);
}

TEST(Stepper, InstabilityIsDetected) {
  KernelConfig cfg;
  cfg.nx = 4;
  cfg.ny = 4;
  LatticeField field(4, 4);
  field.fill_equilibrium(1.0, {});
  Populations f = field.cell(1, 1);
  f[2] = std::numeric_limits<double>::quiet_NaN();
  field.set_cell(1, 1, f);
  EXPECT_THROW(field.step(cfg), InstabilityError);
}

TEST(KernelConfig, Preconditions) {
  KernelConfig cfg;
  cfg.steps = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg.steps = 1;
  cfg.tau = 0.5;
  try {
    cfg.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::subcritical_tau);
  }
}

TEST(Benchmark, DeterministicFieldsAndCounts) {
  KernelConfig cfg;
  cfg.nx = 256;
  cfg.ny = 128;
  cfg.steps = 5;
  cfg.initial = Initial::shear_perturbation;
  const auto a = run_benchmark(cfg);
  const auto b = run_benchmark(cfg);
  EXPECT_EQ(a.cells, 32768u);
  EXPECT_EQ(a.rho, b.rho);
  ASSERT_EQ(a.u.size(), b.u.size());
  for (std::size_t i = 0; i < a.u.size(); ++i) {
    EXPECT_EQ(a.u[i].x, b.u[i].x);
    EXPECT_EQ(a.u[i].y, b.u[i].y);
  }
  EXPECT_NEAR(a.mlups, 32768.0 * 5 / a.wall_seconds / 1e6, 1e-9 * a.mlups);
}

TEST(Benchmark, MetricLinesAreFrozen) {
  KernelReport r;
  r.cells = 100;
  r.steps = 10;
  r.mlups = 12.5;
  r.wall_seconds = 0.25;
  EXPECT_EQ(format_metric_lines(r),
            "cells: 100\nsteps: 10\nMLUPS per process: 12.500000\ntime to solution: 0.250000000 s\n");
  const auto table = format_model_counters(r, "lbm");
  EXPECT_NE(table.find("Region lbm"), std::string::npos);
  EXPECT_NE(table.find("| Operational intensity [FLOP/Byte] |"), std::string::npos);
}
