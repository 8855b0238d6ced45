#pragma once

// Performance-model computations over measured results.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cb/types.hpp"

namespace cb::analysis {

struct RooflinePoint {
  std::string label;
  double operational_intensity = 0.0;  // FLOP/byte
  double achieved_gflops = 0.0;

  bool operator==(const RooflinePoint&) const = default;
};

/// Attainable GFLOP/s: min(peak, intensity * bandwidth).
double roofline_bound(double intensity, const HostProfile& host, const std::string& bandwidth_kind);

/// Intensity at which the memory and compute ceilings meet.
double roofline_knee(const HostProfile& host, const std::string& bandwidth_kind);

/// Memory-bound ceiling in million lattice updates per second.
double mlups_bound(const HostProfile& host, const std::string& bandwidth_kind, double bytes_per_update);

/// Same ceiling from a raw bandwidth in GB/s.
double mlups_bound(double bandwidth_gbps, double bytes_per_update);

struct RelativePerformance {
  double fraction = 0.0;
  /// Set when the measurement exceeds the bound (the bound was pessimistic).
  bool exceeds_bound = false;
};

RelativePerformance relative_performance(double measured, double bound);

enum class Category { computation, synchronization, communication };

inline constexpr Category kCategories[] = {Category::computation, Category::synchronization,
                                           Category::communication};

const char* to_string(Category c) noexcept;
std::optional<Category> category_from_string(const std::string& s);

struct TimeShare {
  Category category = Category::computation;
  double fraction = 0.0;
  std::map<std::string, double> substeps;
};

using Durations = std::map<Category, double>;
using SubstepDurations = std::map<Category, std::map<std::string, double>>;

/// Normalized time shares, one entry per category in declaration order.
/// Substep durations of a category must add up to that category's
/// duration; their fractions are taken against the overall total.
std::vector<TimeShare> time_share(const Durations& durations, const SubstepDurations& substeps = {});

enum class Direction { higher_is_better, lower_is_better };

const char* to_string(Direction d) noexcept;
std::optional<Direction> direction_from_string(const std::string& s);

struct RegressionConfig {
  int window = 3;
  double threshold_fraction = 0.10;
  Direction direction = Direction::higher_is_better;

  void validate() const;
};

struct RegressionVerdict {
  bool regression = false;
  /// Relative deviation of the latest value from the baseline median;
  /// positive means worse.
  double magnitude = 0.0;
  double baseline = 0.0;
  double latest = 0.0;
};

/// Compares the last value against the median of the `window` values
/// immediately before it.
RegressionVerdict detect_regression(std::span<const double> series, const RegressionConfig& cfg);

struct NumericsCheck {
  bool pass = false;
  double max_abs_diff = 0.0;
};

NumericsCheck verify_numerics(std::span<const double> result, std::span<const double> reference,
                              double tolerance);

double median(std::vector<double> values);

}  // namespace cb::analysis
