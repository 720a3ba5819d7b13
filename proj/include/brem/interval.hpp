#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace brem {

/// Half-open temporal segment [start, end) in real-valued timesteps (or any
/// consistent unit: frames, seconds).
struct Interval {
  double start = 0.0;
  double end = 0.0;

  constexpr double length() const { return end - start; }
  constexpr double center() const { return 0.5 * (start + end); }

  bool valid() const {
    return std::isfinite(start) && std::isfinite(end) && start <= end;
  }

  friend bool operator==(const Interval&, const Interval&) = default;
};

using ClassId = int;

struct GroundTruthAction {
  Interval interval;
  ClassId label = 0;
};

enum class BoundarySide { Start, End };

inline double boundary_of(const Interval& iv, BoundarySide side) {
  return side == BoundarySide::Start ? iv.start : iv.end;
}

inline double intersection_length(const Interval& a, const Interval& b) {
  return std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
}

/// Temporal IoU. Zero-length union yields 0.
inline double tiou(const Interval& a, const Interval& b) {
  const double inter = intersection_length(a, b);
  const double uni = a.length() + b.length() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

/// Anchor of size `scale` centred on `t`. Not clipped to the sequence.
inline Interval anchor_interval(double t, double scale) {
  if (!(scale > 0.0)) {
    throw std::invalid_argument("anchor_interval: scale must be positive, got " +
                                std::to_string(scale));
  }
  return {t - 0.5 * scale, t + 0.5 * scale};
}

}  // namespace brem
