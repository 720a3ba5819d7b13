#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "brem/inference.hpp"
#include "brem/interval.hpp"

namespace brem {

inline constexpr double kLogEpsilon = 1e-7;

struct LossResult {
  double value = 0.0;
  /// d(value)/d(prediction), aligned with the prediction argument.
  std::vector<double> gradient;
  /// Set when the sample was ignored (e.g. zero-width proposal).
  bool skipped = false;
};

/// eta balances the boundary loss; lambda and gamma weight classification and quality.
struct LossWeights {
  double eta = 5.0;
  double lambda = 1.0;
  double gamma = 0.5;
};

struct FocalParams {
  double alpha = 0.25;
  double focusing = 2.0;
};

inline double clamp_probability(double p) { return std::clamp(p, kLogEpsilon, 1.0 - kLogEpsilon); }

/// Sigmoid focal loss summed over classes. `target` is the positive class, or
/// nullopt for a background location.
inline LossResult focal_loss(std::span<const double> probs, std::optional<ClassId> target,
                             const FocalParams& fp = {}) {
  if (target && (*target < 0 || static_cast<std::size_t>(*target) >= probs.size())) {
    throw std::out_of_range("focal_loss: target class outside score vector");
  }
  const double a = fp.alpha, g = fp.focusing;
  LossResult r;
  r.gradient.resize(probs.size());
  for (std::size_t c = 0; c < probs.size(); ++c) {
    const double p = clamp_probability(probs[c]);
    if (target && static_cast<std::size_t>(*target) == c) {
      const double m = 1.0 - p;
      const double mg = std::pow(m, g);
      r.value += -a * mg * std::log(p);
      const double dmg = g == 0.0 ? 0.0 : -g * std::pow(m, g - 1.0);
      r.gradient[c] = -a * (dmg * std::log(p) + mg / p);
    } else {
      const double pg = std::pow(p, g);
      r.value += -(1.0 - a) * pg * std::log(1.0 - p);
      const double dpg = g == 0.0 ? 0.0 : g * std::pow(p, g - 1.0);
      r.gradient[c] = -(1.0 - a) * (dpg * std::log(1.0 - p) - pg / (1.0 - p));
    }
  }
  return r;
}

/// 1 - GIoU for intervals; gradient w.r.t. (pred.start, pred.end).
inline LossResult giou_loss_1d(const Interval& pred, const Interval& gt) {
  if (!pred.valid() || !gt.valid()) throw std::invalid_argument("giou_loss_1d: invalid interval");
  const double lo = std::max(pred.start, gt.start), hi = std::min(pred.end, gt.end);
  const double inter = std::max(0.0, hi - lo);
  const double uni = pred.length() + gt.length() - inter;
  const double hull = std::max(pred.end, gt.end) - std::min(pred.start, gt.start);
  LossResult r;
  r.gradient = {0.0, 0.0};
  if (hull <= 0.0) {
    r.value = 1.0;
    return r;
  }
  const double iou = uni > 0.0 ? inter / uni : 0.0;
  const double giou = iou - (hull - uni) / hull;
  r.value = 1.0 - giou;

  const bool overlapping = inter > 0.0;
  const double d_inter[2] = {overlapping && pred.start > gt.start ? -1.0 : 0.0,
                             overlapping && pred.end < gt.end ? 1.0 : 0.0};
  const double d_len[2] = {-1.0, 1.0};
  const double d_hull[2] = {pred.start < gt.start ? -1.0 : 0.0, pred.end > gt.end ? 1.0 : 0.0};
  for (int k = 0; k < 2; ++k) {
    const double d_uni = d_len[k] - d_inter[k];
    const double d_iou = uni > 0.0 ? (d_inter[k] * uni - inter * d_uni) / (uni * uni) : 0.0;
    // giou = iou - 1 + uni / hull
    const double d_ratio = (d_uni * hull - uni * d_hull[k]) / (hull * hull);
    r.gradient[static_cast<std::size_t>(k)] = -(d_iou + d_ratio);
  }
  return r;
}

struct OffsetPair {
  double start = 0.0;
  double end = 0.0;
};

/// Normalised refinement target 2 * (gt - coarse) / width, per side.
inline OffsetPair refinement_target(const OffsetPair& gt_offsets, const OffsetPair& coarse_offsets,
                                    double width) {
  return {2.0 * (gt_offsets.start - coarse_offsets.start) / width,
          2.0 * (gt_offsets.end - coarse_offsets.end) / width};
}

inline double sign_or_zero(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

/// |pred - target| summed over both sides; zero-width proposals are skipped.
inline LossResult l1_refine_loss(const OffsetPair& pred_refine, const OffsetPair& gt_offsets,
                                 const OffsetPair& coarse_offsets, double width) {
  LossResult r;
  r.gradient = {0.0, 0.0};
  if (width == 0.0) {
    r.skipped = true;
    return r;
  }
  if (width < 0.0) throw std::invalid_argument("l1_refine_loss: negative proposal width");
  const OffsetPair target = refinement_target(gt_offsets, coarse_offsets, width);
  const double ds = pred_refine.start - target.start;
  const double de = pred_refine.end - target.end;
  r.value = std::abs(ds) + std::abs(de);
  r.gradient = {sign_or_zero(ds), sign_or_zero(de)};
  return r;
}

inline double binary_cross_entropy(double p, double target) {
  p = clamp_probability(p);
  return -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
}

/// BCE of the predicted quality against tIoU(proposal, gt).
inline LossResult quality_bce_loss(double predicted_quality, const Interval& proposal,
                                   const Interval& gt) {
  const double target = tiou(proposal, gt);
  const double p = clamp_probability(predicted_quality);
  LossResult r;
  r.value = binary_cross_entropy(p, target);
  r.gradient = {(p - target) / (p * (1.0 - p))};
  return r;
}

/// One positive location with everything the six region-evaluation terms need.
/// Offsets are in level-grid units relative to `t`.
struct RemSample {
  double t = 0.0;
  OffsetPair gt_offsets;
  OffsetPair coarse_offsets;
  OffsetPair refine_pred;
  std::vector<double> coarse_class_probs;
  std::vector<double> refined_class_probs;
  ClassId label = 0;
  double coarse_quality = 0.5;
  double refined_quality = 0.5;

  Interval ground_truth() const { return {t - gt_offsets.start, t + gt_offsets.end}; }
  Interval coarse_proposal() const { return {t - coarse_offsets.start, t + coarse_offsets.end}; }
  Interval refined_proposal() const {
    return refine(t, coarse_offsets.start, coarse_offsets.end, refine_pred.start, refine_pred.end);
  }
};

/// Background location scored by the classification terms only.
struct RemBackground {
  std::vector<double> coarse_class_probs;
  std::vector<double> refined_class_probs;
};

struct RemBatch {
  std::vector<RemSample> positives;
  std::vector<RemBackground> backgrounds;
};

enum class ClassificationNorm {
  /// Divide classification sums by |positives| + |backgrounds|.
  PositivesAndBackground,
  /// Divide by |positives| only.
  Positives,
};

struct RemTerms {
  double coarse_loc = 0.0;
  double coarse_cls = 0.0;
  double coarse_quality = 0.0;
  double refined_loc = 0.0;
  double refined_cls = 0.0;
  double refined_quality = 0.0;
};

inline double combine_rem_terms(const RemTerms& t, const LossWeights& w) {
  return t.coarse_loc + w.lambda * t.coarse_cls + w.gamma * t.coarse_quality + t.refined_loc +
         w.lambda * t.refined_cls + w.gamma * t.refined_quality;
}

struct RemLossResult {
  RemTerms terms;
  double value = 0.0;
  std::size_t skipped_refinements = 0;
};

inline RemLossResult rem_loss(const RemBatch& batch, const LossWeights& weights,
                              const FocalParams& focal = {},
                              ClassificationNorm norm = ClassificationNorm::PositivesAndBackground) {
  RemLossResult r;
  if (batch.positives.empty()) return r;
  RemTerms& t = r.terms;
  // Summation order is fixed (input order) for reproducibility.
  for (const auto& s : batch.positives) {
    const Interval gt = s.ground_truth();
    const Interval coarse = s.coarse_proposal();
    t.coarse_loc += giou_loss_1d(coarse, gt).value;
    t.coarse_cls += focal_loss(s.coarse_class_probs, s.label, focal).value;
    t.coarse_quality += quality_bce_loss(s.coarse_quality, coarse, gt).value;
    const auto l1 = l1_refine_loss(s.refine_pred, s.gt_offsets, s.coarse_offsets,
                                   s.coarse_offsets.start + s.coarse_offsets.end);
    if (l1.skipped) ++r.skipped_refinements;
    t.refined_loc += l1.value;
    t.refined_cls += focal_loss(s.refined_class_probs, s.label, focal).value;
    t.refined_quality += quality_bce_loss(s.refined_quality, s.refined_proposal(), gt).value;
  }
  for (const auto& b : batch.backgrounds) {
    t.coarse_cls += focal_loss(b.coarse_class_probs, std::nullopt, focal).value;
    t.refined_cls += focal_loss(b.refined_class_probs, std::nullopt, focal).value;
  }
  const double n_pos = static_cast<double>(batch.positives.size());
  const double n_cls = norm == ClassificationNorm::Positives
                           ? n_pos
                           : n_pos + static_cast<double>(batch.backgrounds.size());
  t.coarse_loc /= n_pos;
  t.coarse_quality /= n_pos;
  t.refined_loc /= n_pos;
  t.refined_quality /= n_pos;
  t.coarse_cls /= n_cls;
  t.refined_cls /= n_cls;
  r.value = combine_rem_terms(t, weights);
  return r;
}

inline double total_loss(double rem, double bem, double eta) {
  if (!std::isfinite(rem) || !std::isfinite(bem) || !std::isfinite(eta)) {
    throw std::invalid_argument("total_loss: non-finite input");
  }
  return rem + eta * bem;
}

}  // namespace brem
