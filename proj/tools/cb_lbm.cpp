// Reference workload: times the D2Q9 kernel and prints the metric lines the
// collectors parse. Parameters come from flags or CB_PARAM_* variables.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "cb/error.hpp"
#include "cb/lbm.hpp"

int main(int argc, char** argv) {
  CLI::App app{"D2Q9 lattice Boltzmann benchmark"};
  cb::lbm::KernelConfig cfg;
  cfg.nx = 256;
  cfg.ny = 128;
  cfg.steps = 100;
  std::string boundary = "periodic";
  std::string initial = "shear";
  std::string collision = "srt";
  std::string region = "lbm";
  bool counters = false;
  double throttle = 0.0;

  app.add_option("--nx", cfg.nx, "Lattice width")->envname("CB_PARAM_nx");
  app.add_option("--ny", cfg.ny, "Lattice height")->envname("CB_PARAM_ny");
  app.add_option("--tau", cfg.tau, "Relaxation time")->envname("CB_PARAM_tau");
  app.add_option("--steps", cfg.steps, "Timed iterations")->envname("CB_PARAM_steps");
  app.add_option("--force-x", cfg.force.x, "Body force, x")->envname("CB_PARAM_force_x");
  app.add_option("--force-y", cfg.force.y, "Body force, y")->envname("CB_PARAM_force_y");
  app.add_option("--boundary", boundary, "periodic | channel")->envname("CB_PARAM_boundary");
  app.add_option("--initial", initial, "rest | shear")->envname("CB_PARAM_initial");
  app.add_option("--collision", collision, "Collision operator; every srt* value runs SRT")
      ->envname("CB_PARAM_collision");
  app.add_flag("--counters", counters, "Also print a model-derived counter table")->envname("CB_PARAM_counters");
  app.add_option("--region", region, "Region name of the counter table");
  app.add_option("--throttle", throttle, "Slow the timed loop down by this fraction of its MLUPS")
      ->envname("CB_LBM_THROTTLE")
      ->check(CLI::Range(0.0, 0.9));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (collision.rfind("srt", 0) != 0) {
      std::cerr << "cb-lbm: unsupported collision operator '" << collision << "'\n";
      return 2;
    }
    cfg.boundary = cb::lbm::boundary_from_string(boundary);
    cfg.initial = cb::lbm::initial_from_string(initial);
    cfg.validate();

    auto report = cb::lbm::run_benchmark(cfg);
    if (throttle > 0.0) {
      const double extra = report.wall_seconds * throttle / (1.0 - throttle);
      const auto t0 = std::chrono::steady_clock::now();
      std::this_thread::sleep_for(std::chrono::duration<double>(extra));
      report.wall_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      report.mlups = static_cast<double>(report.cells) * static_cast<double>(report.steps) / report.wall_seconds / 1e6;
    }
    std::cout << "collision: " << collision << "\n" << cb::lbm::format_metric_lines(report);
    if (counters) std::cout << cb::lbm::format_model_counters(report, region);
    return 0;
  } catch (const cb::Error& e) {
    std::cerr << "cb-lbm: " << e.what() << "\n";
    return 1;
  }
}
