#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "brem/interval.hpp"
#include "brem/matrix.hpp"
#include "brem/quality_maps.hpp"

namespace brem {

/// Frames-per-timestep of each pyramid level, strictly increasing.
struct PyramidConfig {
  std::vector<double> strides{1.0};

  std::size_t levels() const { return strides.size(); }

  void validate() const {
    if (strides.empty()) throw std::invalid_argument("PyramidConfig: need at least one level");
    for (std::size_t l = 0; l < strides.size(); ++l) {
      if (!(strides[l] > 0.0)) throw std::invalid_argument("PyramidConfig: strides must be positive");
      if (l > 0 && !(strides[l] > strides[l - 1])) {
        throw std::invalid_argument("PyramidConfig: strides must be strictly increasing");
      }
    }
  }
};

/// Output of the shared detection head at one pyramid location, in level-grid units.
struct CoarsePrediction {
  std::size_t level = 0;
  double t = 0.0;
  double start_offset = 0.0;
  double end_offset = 0.0;
  std::vector<double> class_scores;
  double quality = 0.0;

  double width() const { return start_offset + end_offset; }
};

/// Region-evaluation output for the same location. Offsets are relative to the
/// coarse width.
struct RefinedPrediction {
  double start_refine = 0.0;
  double end_refine = 0.0;
  std::vector<double> class_scores;
  double quality = 0.0;
};

struct LocationPrediction {
  CoarsePrediction coarse;
  RefinedPrediction refined;
};

struct Detection {
  Interval interval;
  ClassId label = 0;
  double class_score = 1.0;
  double quality = 1.0;
  double start_quality = 1.0;
  double end_quality = 1.0;
  double score = 1.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

enum class NmsDecay { Linear, Gaussian };

inline NmsDecay parse_nms_decay(const std::string& s) {
  if (s == "linear") return NmsDecay::Linear;
  if (s == "gaussian") return NmsDecay::Gaussian;
  throw std::invalid_argument("unknown Soft-NMS decay '" + s + "'");
}

struct SoftNmsOptions {
  NmsDecay decay = NmsDecay::Linear;
  double gaussian_sigma = 0.5;
  bool per_class = false;
};

struct InferenceConfig {
  AnchorScaleSet scale_set{1.0, 50.0, 20};
  double tau = 2.0;
  double nms_threshold = 0.5;
  double score_floor = 1e-4;
  SoftNmsOptions nms;
  PyramidConfig pyramid;
  /// Frames per quality-map timestep.
  double map_stride = 1.0;

  void validate() const {
    if (!(tau > 0.0)) throw std::invalid_argument("InferenceConfig: tau must be positive");
    if (!(nms_threshold > 0.0 && nms_threshold < 1.0)) {
      throw std::invalid_argument("InferenceConfig: nms threshold must lie in (0, 1)");
    }
    if (!(map_stride > 0.0)) throw std::invalid_argument("InferenceConfig: map stride must be positive");
    pyramid.validate();
  }
};

inline std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("argmax: empty score vector");
  return static_cast<std::size_t>(std::distance(v.begin(), std::max_element(v.begin(), v.end())));
}

/// Coarse proposal in global frame units.
inline Interval decode_coarse(const CoarsePrediction& pred, const PyramidConfig& cfg) {
  if (pred.level >= cfg.levels()) {
    throw std::out_of_range("decode_coarse: level " + std::to_string(pred.level) +
                            " outside pyramid of " + std::to_string(cfg.levels()));
  }
  const double v = cfg.strides[pred.level];
  return {(pred.t - pred.start_offset) * v, (pred.t + pred.end_offset) * v};
}

/// Refined proposal around location t (same units as the offsets). Crossed
/// boundaries collapse to a zero-length interval at their midpoint.
inline Interval refine(double t, double start_offset, double end_offset, double start_refine,
                       double end_refine) {
  const double width = start_offset + end_offset;
  if (width < 0.0) throw std::invalid_argument("refine: coarse width must be non-negative");
  Interval out{t - start_offset - 0.5 * start_refine * width,
               t + end_offset + 0.5 * end_refine * width};
  if (out.start > out.end) {
    const double mid = out.center();
    out = {mid, mid};
  }
  return out;
}

struct FusedScores {
  std::vector<double> class_scores;
  double quality = 0.0;
};

inline double fuse_scores(double coarse, double refined) { return 0.5 * (coarse + refined); }

inline FusedScores fuse_scores(std::span<const double> coarse_classes,
                               std::span<const double> refined_classes, double coarse_quality,
                               double refined_quality) {
  if (coarse_classes.size() != refined_classes.size()) {
    throw std::invalid_argument("fuse_scores: class dimensions differ");
  }
  FusedScores out;
  out.class_scores.resize(coarse_classes.size());
  for (std::size_t c = 0; c < coarse_classes.size(); ++c) {
    out.class_scores[c] = fuse_scores(coarse_classes[c], refined_classes[c]);
  }
  out.quality = fuse_scores(coarse_quality, refined_quality);
  return out;
}

/// Fractional anchor-scale index for a proposal of length `duration`: the
/// scale r = duration / tau located between its two neighbouring scales.
inline double scale_index(double duration, double tau, const AnchorScaleSet& scales) {
  if (duration < 0.0) throw std::invalid_argument("scale_index: negative duration");
  if (!(tau > 0.0)) throw std::invalid_argument("scale_index: tau must be positive");
  if (scales.is_single()) return 0.0;
  const double r = duration / tau;
  const auto s = scales.scales();
  if (r <= s.front()) return 0.0;
  if (r >= s.back()) return static_cast<double>(s.size() - 1);
  const auto upper = std::upper_bound(s.begin(), s.end(), r);
  const auto i = static_cast<std::size_t>(std::distance(s.begin(), upper)) - 1;
  return (r - s[i]) / (s[i + 1] - s[i]) + static_cast<double>(i);
}

/// Bilinear interpolation of a T x I map at (t, idx), clamped to the grid.
inline double boundary_quality_lookup(const Matrix& map, double t, double idx) {
  if (map.empty()) throw std::invalid_argument("boundary_quality_lookup: empty map");
  auto axis = [](double x, std::size_t n) {
    const double last = static_cast<double>(n - 1);
    x = std::clamp(std::isnan(x) ? 0.0 : x, 0.0, last);
    const auto lo = static_cast<std::size_t>(std::floor(x));
    const std::size_t hi = std::min(lo + 1, n - 1);
    return std::tuple{lo, hi, x - static_cast<double>(lo)};
  };
  const auto [t0, t1, ft] = axis(t, map.rows());
  const auto [i0, i1, fi] = axis(idx, map.cols());
  const double top = (1.0 - fi) * map(t0, i0) + fi * map(t0, i1);
  const double bottom = (1.0 - fi) * map(t1, i0) + fi * map(t1, i1);
  return (1.0 - ft) * top + ft * bottom;
}

/// y * q * sqrt(p_s * p_e).
inline double final_score(double class_score, double quality, double start_quality,
                          double end_quality) {
  for (double v : {class_score, quality, start_quality, end_quality}) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("final_score: inputs must lie in [0, 1], got " + std::to_string(v));
    }
  }
  return class_score * quality * std::sqrt(start_quality * end_quality);
}

namespace detail {

inline std::vector<Detection> soft_nms_single(std::vector<Detection> pool, double threshold,
                                              double score_floor, const SoftNmsOptions& opt) {
  std::vector<Detection> kept;
  kept.reserve(pool.size());
  std::erase_if(pool, [&](const Detection& d) { return d.score < score_floor; });
  while (!pool.empty()) {
    // Highest score first; ties go to the earlier start, then to input order.
    auto best = pool.begin();
    for (auto it = pool.begin() + 1; it != pool.end(); ++it) {
      if (it->score > best->score ||
          (it->score == best->score && it->interval.start < best->interval.start)) {
        best = it;
      }
    }
    Detection selected = *best;
    pool.erase(best);
    for (auto& d : pool) {
      const double o = tiou(selected.interval, d.interval);
      if (opt.decay == NmsDecay::Linear) {
        if (o > threshold) d.score *= 1.0 - o;
      } else {
        d.score *= std::exp(-(o * o) / opt.gaussian_sigma);
      }
    }
    std::erase_if(pool, [&](const Detection& d) { return d.score < score_floor; });
    kept.push_back(selected);
  }
  return kept;
}

}  // namespace detail

/// Greedy Soft-NMS. Output is in selection order (non-increasing decayed score
/// within each class pass).
inline std::vector<Detection> soft_nms(std::vector<Detection> dets, double threshold,
                                       double score_floor, const SoftNmsOptions& opt = {}) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw std::invalid_argument("soft_nms: threshold must lie in (0, 1)");
  }
  if (!opt.per_class) return detail::soft_nms_single(std::move(dets), threshold, score_floor, opt);

  std::vector<ClassId> labels;
  for (const auto& d : dets) labels.push_back(d.label);
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  std::vector<Detection> out;
  for (ClassId c : labels) {
    std::vector<Detection> group;
    for (const auto& d : dets) if (d.label == c) group.push_back(d);
    auto kept = detail::soft_nms_single(std::move(group), threshold, score_floor, opt);
    out.insert(out.end(), kept.begin(), kept.end());
  }
  std::stable_sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.interval.start < b.interval.start;
  });
  return out;
}

/// Predictions of one pyramid level.
using LevelPredictions = std::vector<LocationPrediction>;

/// Detection before suppression for a single location.
inline Detection score_location(const LocationPrediction& p, const QualityMapPair& maps,
                                const InferenceConfig& cfg) {
  const auto& c = p.coarse;
  if (c.start_offset < 0.0 || c.end_offset < 0.0) {
    throw std::invalid_argument("run_pipeline: coarse offsets must be non-negative");
  }
  if (c.level >= cfg.pyramid.levels()) throw std::out_of_range("run_pipeline: level outside pyramid");
  const double v = cfg.pyramid.strides[c.level];
  const Interval grid = refine(c.t, c.start_offset, c.end_offset, p.refined.start_refine,
                               p.refined.end_refine);
  const Interval frames{grid.start * v, grid.end * v};
  const auto fused = fuse_scores(c.class_scores, p.refined.class_scores, c.quality, p.refined.quality);
  const std::size_t label = argmax(fused.class_scores);

  Detection d;
  d.interval = frames;
  d.label = static_cast<ClassId>(label);
  d.class_score = fused.class_scores[label];
  d.quality = fused.quality;
  const double idx = scale_index(frames.length() / cfg.map_stride, cfg.tau, cfg.scale_set);
  d.start_quality = boundary_quality_lookup(maps.start_map, frames.start / cfg.map_stride, idx);
  d.end_quality = boundary_quality_lookup(maps.end_map, frames.end / cfg.map_stride, idx);
  d.score = final_score(d.class_score, d.quality, d.start_quality, d.end_quality);
  return d;
}

/// decode -> refine -> fuse -> boundary quality lookup -> final score -> Soft-NMS.
inline std::vector<Detection> run_pipeline(std::span<const LevelPredictions> levels,
                                           const QualityMapPair& maps, const InferenceConfig& cfg) {
  cfg.validate();
  if (maps.scale_count() != cfg.scale_set.count()) {
    throw std::invalid_argument("run_pipeline: quality maps have " +
                                std::to_string(maps.scale_count()) + " scales, config has " +
                                std::to_string(cfg.scale_set.count()));
  }
  std::vector<Detection> dets;
  for (const auto& level : levels) {
    for (const auto& p : level) dets.push_back(score_location(p, maps, cfg));
  }
  return soft_nms(std::move(dets), cfg.nms_threshold, cfg.score_floor, cfg.nms);
}

}  // namespace brem
