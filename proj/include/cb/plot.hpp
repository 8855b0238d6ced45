#pragma once

// Self-contained HTML and SVG emitters for roofline and time-share views.

#include <string>
#include <utility>
#include <vector>

#include "cb/analysis.hpp"
#include "cb/types.hpp"

namespace cb::plot {

struct LabeledPoint {
  analysis::RooflinePoint point;
  std::string host;
  /// Colour key, e.g. a variant value.
  std::string series;
};

struct RooflineData {
  std::string title;
  std::vector<HostProfile> hosts;
  std::vector<LabeledPoint> points;
};

/// Static log-log roofline: one compute ceiling and one memory ceiling per
/// host bandwidth kind, plus labelled points.
std::string roofline_svg(const RooflineData& data);

/// Single-file interactive page (wheel zoom, drag pan, hover details). The
/// static SVG is embedded as a no-script fallback.
std::string roofline_html(const RooflineData& data);

struct TimeShareBar {
  std::string label;
  std::vector<analysis::TimeShare> shares;
};

/// Stacked horizontal bars, one per label.
std::string timeshare_html(const std::string& title, const std::vector<TimeShareBar>& bars);

}  // namespace cb::plot
