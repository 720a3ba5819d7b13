#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "brem/interval.hpp"
#include "brem/matrix.hpp"

namespace brem {

/// `count` evenly spaced anchor scales from r_min to r_max inclusive.
/// A single-scale set has count == 1 and r_min == r_max.
class AnchorScaleSet {
 public:
  AnchorScaleSet() : AnchorScaleSet(single(1.0)) {}

  AnchorScaleSet(double r_min, double r_max, std::size_t count)
      : r_min_(r_min), r_max_(r_max) {
    if (!(std::isfinite(r_min) && std::isfinite(r_max))) {
      throw std::invalid_argument("AnchorScaleSet: non-finite bounds");
    }
    if (count < 2) throw std::invalid_argument("AnchorScaleSet: count must be >= 2");
    if (!(r_min > 0.0) || !(r_min < r_max)) {
      throw std::invalid_argument("AnchorScaleSet: need 0 < r_min < r_max, got " +
                                  std::to_string(r_min) + ", " + std::to_string(r_max));
    }
    scales_.resize(count);
    const double step = (r_max - r_min) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) scales_[i] = r_min + step * static_cast<double>(i);
    scales_.back() = r_max;
  }

  static AnchorScaleSet single(double r) {
    if (!(r > 0.0) || !std::isfinite(r)) {
      throw std::invalid_argument("AnchorScaleSet::single: scale must be positive");
    }
    AnchorScaleSet s(Tag{});
    s.r_min_ = r;
    s.r_max_ = r;
    s.scales_ = {r};
    return s;
  }

  double r_min() const { return r_min_; }
  double r_max() const { return r_max_; }
  std::size_t count() const { return scales_.size(); }
  bool is_single() const { return scales_.size() == 1; }
  double operator[](std::size_t i) const { return scales_[i]; }
  std::span<const double> scales() const { return scales_; }

  /// Distance between adjacent scales; 0 for a single-scale set.
  double spacing() const {
    return is_single() ? 0.0 : (r_max_ - r_min_) / static_cast<double>(count() - 1);
  }

  friend bool operator==(const AnchorScaleSet&, const AnchorScaleSet&) = default;

 private:
  struct Tag {};
  explicit AnchorScaleSet(Tag) {}

  double r_min_ = 1.0;
  double r_max_ = 1.0;
  std::vector<double> scales_;
};

/// Start/end quality maps of shape T x I. Used for both predictions and labels.
struct QualityMapPair {
  Matrix start_map;
  Matrix end_map;
  AnchorScaleSet scale_set;

  std::size_t length() const { return start_map.rows(); }
  std::size_t scale_count() const { return start_map.cols(); }
  const Matrix& side(BoundarySide s) const { return s == BoundarySide::Start ? start_map : end_map; }
  Matrix& side(BoundarySide s) { return s == BoundarySide::Start ? start_map : end_map; }
};

using GridIndex = std::pair<std::size_t, std::size_t>;

/// Grid points (t, i) whose label is strictly positive, per side.
struct PositiveMask {
  std::vector<GridIndex> start_positives;
  std::vector<GridIndex> end_positives;

  const std::vector<GridIndex>& side(BoundarySide s) const {
    return s == BoundarySide::Start ? start_positives : end_positives;
  }
};

/// Quality of every grid timestep 0..length-1 at one scale: the best tIoU
/// between the anchor at t and any ground-truth boundary region of `side`.
inline std::vector<double> single_scale_quality(std::span<const GroundTruthAction> gts,
                                                std::size_t length, double scale,
                                                BoundarySide side) {
  if (length < 1) throw std::invalid_argument("single_scale_quality: length must be >= 1");
  if (!(scale > 0.0)) throw std::invalid_argument("single_scale_quality: scale must be positive");
  std::vector<double> out(length, 0.0);
  std::vector<Interval> regions;
  regions.reserve(gts.size());
  for (const auto& gt : gts) regions.push_back(anchor_interval(boundary_of(gt.interval, side), scale));
  for (std::size_t t = 0; t < length; ++t) {
    const Interval anchor = anchor_interval(static_cast<double>(t), scale);
    double best = 0.0;
    for (const auto& region : regions) best = std::max(best, tiou(anchor, region));
    out[t] = best;
  }
  return out;
}

inline QualityMapPair multi_scale_quality_maps(std::span<const GroundTruthAction> gts,
                                               std::size_t length,
                                               const AnchorScaleSet& scale_set) {
  const std::size_t scales = scale_set.count();
  QualityMapPair maps{Matrix(length, scales), Matrix(length, scales), scale_set};
  for (std::size_t i = 0; i < scales; ++i) {
    for (BoundarySide side : {BoundarySide::Start, BoundarySide::End}) {
      const auto column = single_scale_quality(gts, length, scale_set[i], side);
      Matrix& m = maps.side(side);
      for (std::size_t t = 0; t < length; ++t) m(t, i) = column[t];
    }
  }
  return maps;
}

inline PositiveMask positive_mask(const QualityMapPair& labels) {
  PositiveMask mask;
  for (BoundarySide side : {BoundarySide::Start, BoundarySide::End}) {
    const Matrix& m = labels.side(side);
    auto& out = side == BoundarySide::Start ? mask.start_positives : mask.end_positives;
    for (std::size_t t = 0; t < m.rows(); ++t)
      for (std::size_t i = 0; i < m.cols(); ++i)
        if (m(t, i) > 0.0) out.emplace_back(t, i);
  }
  return mask;
}

struct BemSideLoss {
  double value = 0.0;
  /// d(side loss)/d(prediction); nonzero only at positives.
  Matrix gradient;
};

struct BemLossResult {
  /// 0.5 * (start.value + end.value)
  double value = 0.0;
  BemSideLoss start;
  BemSideLoss end;
  /// d(value)/d(predicted start map) and d(value)/d(predicted end map).
  Matrix grad_start;
  Matrix grad_end;
};

/// Masked L2 loss between predicted and label quality maps. Each side averages
/// squared error over its positive set; an empty set contributes 0.
inline BemLossResult bem_loss(const QualityMapPair& pred, const QualityMapPair& label,
                              const PositiveMask& mask) {
  if (pred.start_map.rows() != label.start_map.rows() ||
      pred.start_map.cols() != label.start_map.cols() ||
      pred.end_map.rows() != label.end_map.rows() ||
      pred.end_map.cols() != label.end_map.cols()) {
    throw std::invalid_argument("bem_loss: prediction and label shapes differ");
  }
  BemLossResult result;
  for (BoundarySide side : {BoundarySide::Start, BoundarySide::End}) {
    const Matrix& p = pred.side(side);
    const Matrix& o = label.side(side);
    const auto& positives = mask.side(side);
    BemSideLoss s{0.0, Matrix(p.rows(), p.cols())};
    if (!positives.empty()) {
      const double n = static_cast<double>(positives.size());
      for (const auto& [t, i] : positives) {
        if (t >= p.rows() || i >= p.cols()) {
          throw std::out_of_range("bem_loss: positive index outside map");
        }
        const double diff = p(t, i) - o(t, i);
        s.value += diff * diff;
        s.gradient(t, i) += 2.0 * diff / n;
      }
      s.value /= n;
    }
    (side == BoundarySide::Start ? result.start : result.end) = std::move(s);
  }
  result.value = 0.5 * (result.start.value + result.end.value);
  result.grad_start = result.start.gradient;
  result.grad_end = result.end.gradient;
  for (double& g : result.grad_start.data()) g *= 0.5;
  for (double& g : result.grad_end.data()) g *= 0.5;
  return result;
}

}  // namespace brem
