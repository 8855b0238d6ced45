#pragma once

// Rough host calibration: streaming loops over buffers larger than the
// caches estimate memory bandwidth, an FMA loop estimates peak FLOP rate.

#include <string>

#include "cb/types.hpp"

namespace cb::benchhost {

struct Options {
  std::string hostname;
  /// Elements per buffer (doubles).
  std::size_t elements = std::size_t{1} << 22;
  int repetitions = 5;
};

/// Bandwidth kinds: copy (a = b), load (sum over a), triad (a = b + s c) and
/// stream, which reports the triad figure. Peak is single-thread FMA rate
/// times the logical core count.
HostProfile measure(const Options& options);

}  // namespace cb::benchhost
