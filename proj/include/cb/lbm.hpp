#pragma once

// D2Q9 single-relaxation-time lattice-Boltzmann stepper used as the
// reference benchmark workload. Lattice units throughout (dx = dt = 1).

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace cb::lbm {

inline constexpr int kQ = 9;
inline constexpr double kCs2 = 1.0 / 3.0;

/// Velocity set ordering: rest, +x, +y, -x, -y, then the four diagonals
/// (+x+y, -x+y, -x-y, +x-y).
inline constexpr std::array<int, kQ> kCx = {0, 1, 0, -1, 0, 1, -1, -1, 1};
inline constexpr std::array<int, kQ> kCy = {0, 0, 1, 0, -1, 1, 1, -1, -1};
inline constexpr std::array<int, kQ> kOpposite = {0, 3, 4, 1, 2, 7, 8, 5, 6};
inline constexpr std::array<double, kQ> kWeights = {
    4.0 / 9.0,  1.0 / 9.0,  1.0 / 9.0,  1.0 / 9.0, 1.0 / 9.0,
    1.0 / 36.0, 1.0 / 36.0, 1.0 / 36.0, 1.0 / 36.0};

/// Two-population streaming reads and writes 9 doubles each per cell update.
inline constexpr double kBytesPerUpdate = 2.0 * kQ * sizeof(double);

/// Nominal floating-point operations of one fused collide/stream update in
/// this kernel, used for the model counter table.
inline constexpr double kFlopsPerUpdate = 150.0;

using Populations = std::array<double, kQ>;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct Moments {
  double rho = 0.0;
  Vec2 u;
};

enum class Boundary { periodic, channel_walls_y };
enum class Initial { uniform_rest, shear_perturbation };

struct KernelConfig {
  int nx = 64;
  int ny = 64;
  double tau = 1.0;
  long steps = 100;
  Vec2 force;
  Boundary boundary = Boundary::periodic;
  Initial initial = Initial::uniform_rest;

  /// Throws Error(invalid_argument) or Error(subcritical_tau).
  void validate() const;
};

Boundary boundary_from_string(const std::string& s);
Initial initial_from_string(const std::string& s);

/// Second-order equilibrium distribution.
Populations equilibrium(double rho, Vec2 u);

/// Density and force-corrected velocity. Throws on rho <= 0.
Moments macroscopics(const Populations& f, Vec2 force);

/// Kinematic viscosity c_s^2 (tau - 1/2). Throws Error(subcritical_tau).
double viscosity(double tau);

/// Post-collision populations of one cell (SRT relaxation plus Guo forcing).
Populations collide(const Populations& f, double tau, Vec2 force);

/// Source/destination population pair over an nx-by-ny lattice, stored
/// cell-major with the nine directions contiguous.
class LatticeField {
 public:
  LatticeField(int nx, int ny);

  int nx() const noexcept { return nx_; }
  int ny() const noexcept { return ny_; }
  std::size_t cells() const noexcept { return static_cast<std::size_t>(nx_) * ny_; }
  long step_count() const noexcept { return step_; }

  Populations cell(int x, int y) const;
  void set_cell(int x, int y, const Populations& f);

  /// Sets every cell to equilibrium at the given density and velocity.
  void fill_equilibrium(double rho, Vec2 u);

  double total_mass() const;
  /// Sum over cells of sum_i c_i f_i (without the force half-step).
  Vec2 total_lattice_momentum() const;

  std::vector<double> density() const;
  std::vector<Vec2> velocity(Vec2 force) const;

  const std::vector<double>& raw() const noexcept { return src_; }

  /// Advances one collide-and-stream step. Throws InstabilityError.
  void step(const KernelConfig& cfg);

 private:
  std::size_t index(int x, int y) const noexcept {
    return (static_cast<std::size_t>(y) * nx_ + x) * kQ;
  }

  int nx_;
  int ny_;
  long step_ = 0;
  std::vector<double> src_;
  std::vector<double> dst_;
};

/// Builds the initial field for `cfg`.
LatticeField make_initial_field(const KernelConfig& cfg);

/// One step of `field` under `cfg`.
void collide_stream(LatticeField& field, const KernelConfig& cfg);

struct KernelReport {
  double mlups = 0.0;
  double wall_seconds = 0.0;
  std::size_t cells = 0;
  long steps = 0;
  std::vector<double> rho;
  std::vector<Vec2> u;
};

/// Runs `cfg.steps` timed iterations (initialization excluded).
KernelReport run_benchmark(const KernelConfig& cfg);

/// Application-output lines the collectors parse:
///   "MLUPS per process: <float>" and "time to solution: <float> s".
std::string format_metric_lines(const KernelReport& report);

/// Counter table in the frozen region grammar with model-derived FLOP and
/// traffic estimates for the timed loop.
std::string format_model_counters(const KernelReport& report, const std::string& region);

}  // namespace cb::lbm
