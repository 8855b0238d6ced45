#include "cb/benchhost.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <thread>
#include <vector>

#include "cb/collectors.hpp"
#include "cb/error.hpp"

namespace cb::benchhost {

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
double best_seconds(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(Clock::now() - t0).count());
  }
  return std::max(best, 1e-9);
}

volatile double sink = 0.0;

}  // namespace

HostProfile measure(const Options& options) {
  if (options.elements < 1024 || options.repetitions < 1)
    throw Error(Errc::invalid_argument, "bench-host needs at least 1024 elements and one repetition");
  const std::size_t n = options.elements;
  std::vector<double> a(n, 1.0), b(n, 2.0), c(n, 0.5);
  const double bytes = static_cast<double>(n) * sizeof(double);

  HostProfile h;
  const MachineState state = collect::capture_machine_state();
  h.hostname = options.hostname.empty() ? state.hostname : options.hostname;
  h.cpu_model = state.cpu_model;
  h.cores = std::max(1u, std::thread::hardware_concurrency());

  const double t_copy = best_seconds(options.repetitions, [&] {
    std::copy(b.begin(), b.end(), a.begin());
    sink = sink + a[n / 2];
  });
  const double t_load = best_seconds(options.repetitions, [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i];
    sink = sink + s;
  });
  const double t_triad = best_seconds(options.repetitions, [&] {
    const double s = 3.0;
    for (std::size_t i = 0; i < n; ++i) a[i] = b[i] + s * c[i];
    sink = sink + a[n / 3];
  });
  h.bandwidths_gbps["copy"] = 2 * bytes / t_copy / 1e9;
  h.bandwidths_gbps["load"] = bytes / t_load / 1e9;
  h.bandwidths_gbps["triad"] = 3 * bytes / t_triad / 1e9;
  h.bandwidths_gbps["stream"] = h.bandwidths_gbps["triad"];

  constexpr int kLanes = 8;
  constexpr long kIters = 1 << 22;
  const double t_fma = best_seconds(options.repetitions, [&] {
    double acc[kLanes];
    for (int l = 0; l < kLanes; ++l) acc[l] = 1.0 + l * 1e-3;
    for (long i = 0; i < kIters; ++i)
      for (int l = 0; l < kLanes; ++l) acc[l] = acc[l] * 0.999999 + 1e-7;
    double s = 0.0;
    for (double v : acc) s += v;
    sink = sink + s;
  });
  h.peak_flops_gflops = 2.0 * kLanes * static_cast<double>(kIters) / t_fma / 1e9 * h.cores;
  h.validate();
  return h;
}

}  // namespace cb::benchhost
