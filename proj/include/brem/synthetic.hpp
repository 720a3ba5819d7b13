#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "brem/anchor_sampling.hpp"
#include "brem/dataset.hpp"
#include "brem/inference.hpp"
#include "brem/random.hpp"

namespace brem {

/// Durations and lengths are in seconds; with fps = 1 they equal timesteps.
struct CorpusConfig {
  std::size_t videos = 200;
  double duration_min = 300.0;
  double duration_max = 600.0;
  std::size_t actions_min = 1;
  std::size_t actions_max = 6;
  std::size_t classes = 5;
  double length_min = 2.0;   // log-uniform action length bounds
  double length_max = 100.0;
  double fps = 1.0;
  std::uint64_t seed = 0;
  std::size_t max_retries = 200;

  void validate() const {
    if (classes < 1) throw std::invalid_argument("CorpusConfig: need at least one class");
    if (!(duration_min > 0.0 && duration_min <= duration_max)) {
      throw std::invalid_argument("CorpusConfig: invalid duration range");
    }
    if (actions_min > actions_max) throw std::invalid_argument("CorpusConfig: invalid actions range");
    if (!(length_min > 0.0 && length_min <= length_max)) {
      throw std::invalid_argument("CorpusConfig: invalid length range");
    }
    if (!(fps > 0.0)) throw std::invalid_argument("CorpusConfig: fps must be positive");
  }
};

enum class JitterMode { Absolute, Proportional };

struct NoiseConfig {
  /// Boundary jitter std-dev: seconds (absolute) or fraction of action length.
  double boundary_jitter = 0.2;
  JitterMode jitter_mode = JitterMode::Proportional;
  /// Std-dev of the additive noise separating scores from true tIoU.
  double score_noise = 0.3;
  /// Expected false positives per ground-truth action.
  double false_positive_rate = 1.0;
  double miss_rate = 0.0;
  std::size_t proposals_per_gt = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (boundary_jitter < 0.0 || score_noise < 0.0 || false_positive_rate < 0.0 || miss_rate < 0.0 ||
        miss_rate > 1.0) {
      throw std::invalid_argument("NoiseConfig: rates and deviations must be non-negative");
    }
  }
};

namespace detail {
enum Stream : std::uint64_t { kGroundTruth = 1, kDetections = 2, kFeatures = 3, kPredictions = 4 };

inline std::string numbered(const char* prefix, std::size_t i, int width) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

inline double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

inline double best_same_class_tiou(const Interval& iv, ClassId label,
                                   const std::vector<GroundTruthAction>& gts) {
  double best = 0.0;
  for (const auto& g : gts) if (g.label == label) best = std::max(best, tiou(iv, g.interval));
  return best;
}
}  // namespace detail

inline Corpus generate_ground_truth(const CorpusConfig& cfg) {
  cfg.validate();
  Corpus corpus;
  for (std::size_t c = 0; c < cfg.classes; ++c) corpus.classes.push_back(detail::numbered("class_", c, 2));
  for (std::size_t v = 0; v < cfg.videos; ++v) {
    SplitMix64 rng(derive_seed(cfg.seed, detail::kGroundTruth, v));
    VideoAnnotation video;
    video.id = detail::numbered("video_", v, 4);
    video.fps = cfg.fps;
    video.duration = rng.uniform(cfg.duration_min, cfg.duration_max);
    const auto count = static_cast<std::size_t>(rng.uniform_int(
        static_cast<std::int64_t>(cfg.actions_min), static_cast<std::int64_t>(cfg.actions_max)));
    const double max_len = std::min(cfg.length_max, video.duration);
    if (cfg.length_min > max_len) {
      throw std::runtime_error("generate_ground_truth: minimum action length exceeds duration of " + video.id);
    }
    for (std::size_t a = 0; a < count; ++a) {
      bool placed = false;
      for (std::size_t attempt = 0; attempt < cfg.max_retries && !placed; ++attempt) {
        const auto label = static_cast<ClassId>(rng.uniform_int(0, static_cast<std::int64_t>(cfg.classes) - 1));
        const double len = rng.log_uniform(cfg.length_min, max_len);
        const double start = rng.uniform(0.0, video.duration - len);
        const Interval iv{start, start + len};
        const bool clash = std::any_of(video.actions.begin(), video.actions.end(), [&](const auto& o) {
          return o.label == label && intersection_length(o.interval, iv) > 0.0;
        });
        if (!clash) {
          video.actions.push_back({iv, label});
          placed = true;
        }
      }
      if (!placed) {
        throw std::runtime_error("generate_ground_truth: could not place action " + std::to_string(a) +
                                 " in " + video.id + " after " + std::to_string(cfg.max_retries) +
                                 " attempts");
      }
    }
    std::sort(video.actions.begin(), video.actions.end(), [](const auto& x, const auto& y) {
      return x.interval.start < y.interval.start;
    });
    corpus.videos.push_back(std::move(video));
  }
  return corpus;
}

/// Detector-like output: jittered copies of the ground truth whose scores are
/// true tIoU plus Gaussian noise, and random false positives scored the same way.
inline DetectionSet generate_noisy_detections(const Corpus& corpus, const NoiseConfig& noise) {
  noise.validate();
  DetectionSet out;
  const std::size_t classes = std::max<std::size_t>(1, corpus.classes.size());
  for (std::size_t v = 0; v < corpus.videos.size(); ++v) {
    const auto& video = corpus.videos[v];
    SplitMix64 rng(derive_seed(noise.seed, detail::kDetections, v));
    auto& dets = out[video.id];
    auto emit = [&](const Interval& iv, ClassId label) {
      Detection d;
      d.interval = iv;
      d.label = label;
      const double s = detail::clamp01(detail::best_same_class_tiou(iv, label, video.actions) +
                                       noise.score_noise * rng.normal());
      d.class_score = s;
      d.score = s;
      dets.push_back(d);
    };
    for (const auto& gt : video.actions) {
      const bool missed = rng.uniform() < noise.miss_rate;
      const double sigma = noise.jitter_mode == JitterMode::Proportional
                               ? noise.boundary_jitter * gt.interval.length()
                               : noise.boundary_jitter;
      for (std::size_t p = 0; p < noise.proposals_per_gt; ++p) {
        const double zs = rng.normal(), ze = rng.normal();
        if (missed) continue;
        double s = gt.interval.start + sigma * zs;
        double e = gt.interval.end + sigma * ze;
        if (s > e) std::swap(s, e);
        s = std::clamp(s, 0.0, video.duration);
        e = std::clamp(e, 0.0, video.duration);
        emit({s, e}, gt.label);
      }
    }
    const double expected_fp = noise.false_positive_rate * static_cast<double>(video.actions.size());
    auto fp_count = static_cast<std::size_t>(std::floor(expected_fp));
    if (rng.uniform() < expected_fp - std::floor(expected_fp)) ++fp_count;
    for (std::size_t k = 0; k < fp_count; ++k) {
      const auto label = static_cast<ClassId>(rng.uniform_int(0, static_cast<std::int64_t>(classes) - 1));
      const double len = rng.log_uniform(std::min(1.0, video.duration), video.duration);
      const double start = rng.uniform(0.0, video.duration - len);
      emit({start, start + len}, label);
    }
  }
  return out;
}

/// Smooth AR(1) noise plus Gaussian bumps at action boundaries (frame units).
/// Even channels carry start bumps, odd channels end bumps; a single channel carries both.
inline FeatureSequence generate_feature_stream(const VideoAnnotation& video, std::size_t channels,
                                               std::uint64_t seed) {
  if (channels < 1) throw std::invalid_argument("generate_feature_stream: need at least one channel");
  constexpr double kNoiseScale = 0.25, kCorrelation = 0.7, kBumpWidth = 1.5;
  const std::size_t T = video.frame_count();
  FeatureSequence f{Matrix(T, channels), 1.0};
  SplitMix64 rng(derive_seed(seed, detail::kFeatures, fnv1a(video.id)));
  const double innovation = kNoiseScale * std::sqrt(1.0 - kCorrelation * kCorrelation);
  for (std::size_t c = 0; c < channels; ++c) {
    double state = kNoiseScale * rng.normal();
    for (std::size_t t = 0; t < T; ++t) {
      if (t > 0) state = kCorrelation * state + innovation * rng.normal();
      f.data(t, c) = state;
    }
  }
  const auto actions = video.actions_in_frames();
  for (std::size_t t = 0; t < T; ++t) {
    for (const auto& a : actions) {
      const double ds = (static_cast<double>(t) - a.interval.start) / kBumpWidth;
      const double de = (static_cast<double>(t) - a.interval.end) / kBumpWidth;
      const double bs = std::exp(-0.5 * ds * ds), be = std::exp(-0.5 * de * de);
      for (std::size_t c = 0; c < channels; ++c) {
        if (channels == 1) f.data(t, c) += bs + be;
        else f.data(t, c) += (c % 2 == 0) ? bs : be;
      }
    }
  }
  return f;
}

/// Ground-truth-to-level assignment: level l takes actions with frame length at
/// most max_length[l]; the last level takes everything longer.
struct LevelRanges {
  std::vector<double> max_length{16.0, 64.0, std::numeric_limits<double>::infinity()};

  std::size_t level_for(double length) const {
    for (std::size_t l = 0; l < max_length.size(); ++l) if (length <= max_length[l]) return l;
    return max_length.empty() ? 0 : max_length.size() - 1;
  }
};

struct PredictionNoise {
  double boundary_jitter = 0.15;     // fraction of action length
  double score_noise = 0.15;
  double refine_gain = 0.6;          // share of the coarse error the refinement recovers
  std::size_t locations_per_gt = 3;
  double background_rate = 1.0;      // background locations per ground truth
  std::uint64_t seed = 0;
};

/// Synthetic per-level head outputs for one video, in level-grid units.
inline std::vector<LevelPredictions> generate_location_predictions(const VideoAnnotation& video,
                                                                   std::size_t classes,
                                                                   const PyramidConfig& pyramid,
                                                                   const LevelRanges& ranges,
                                                                   const PredictionNoise& noise,
                                                                   std::size_t video_index) {
  pyramid.validate();
  if (classes < 1) throw std::invalid_argument("generate_location_predictions: need classes");
  SplitMix64 rng(derive_seed(noise.seed, detail::kPredictions, video_index));
  std::vector<LevelPredictions> levels(pyramid.levels());
  auto scores = [&](ClassId label, double level_true) {
    std::vector<double> s(classes);
    for (std::size_t c = 0; c < classes; ++c) {
      const double base = static_cast<ClassId>(c) == label ? level_true : 0.1 * rng.uniform();
      s[c] = detail::clamp01(base + noise.score_noise * rng.normal());
    }
    return s;
  };
  for (const auto& gt : video.actions_in_frames()) {
    const std::size_t level = std::min(ranges.level_for(gt.interval.length()), pyramid.levels() - 1);
    const double v = pyramid.strides[level];
    const double gs = gt.interval.start / v, ge = gt.interval.end / v;
    for (std::size_t k = 0; k < noise.locations_per_gt; ++k) {
      const double t = std::clamp(std::round(rng.uniform(gs, ge)), std::ceil(gs), std::max(std::ceil(gs), std::floor(ge)));
      const double sigma = noise.boundary_jitter * (ge - gs);
      LocationPrediction p;
      p.coarse.level = level;
      p.coarse.t = t;
      const double true_s = std::max(0.0, t - gs), true_e = std::max(0.0, ge - t);
      p.coarse.start_offset = std::max(0.0, true_s + sigma * rng.normal());
      p.coarse.end_offset = std::max(0.0, true_e + sigma * rng.normal());
      const Interval coarse{t - p.coarse.start_offset, t + p.coarse.end_offset};
      const double coarse_iou = tiou(coarse, {gs, ge});
      p.coarse.class_scores = scores(gt.label, 0.8);
      p.coarse.quality = detail::clamp01(coarse_iou + noise.score_noise * rng.normal());
      const double w = p.coarse.width();
      if (w > 0.0) {
        p.refined.start_refine = noise.refine_gain * 2.0 * (true_s - p.coarse.start_offset) / w +
                                 0.05 * rng.normal();
        p.refined.end_refine = noise.refine_gain * 2.0 * (true_e - p.coarse.end_offset) / w +
                               0.05 * rng.normal();
      }
      const Interval refined = refine(t, p.coarse.start_offset, p.coarse.end_offset,
                                      p.refined.start_refine, p.refined.end_refine);
      p.refined.class_scores = scores(gt.label, 0.85);
      p.refined.quality = detail::clamp01(tiou(refined, {gs, ge}) + noise.score_noise * rng.normal());
      levels[level].push_back(std::move(p));
    }
  }
  const auto background = static_cast<std::size_t>(
      std::round(noise.background_rate * static_cast<double>(video.actions.size())));
  const double frames = static_cast<double>(video.frame_count());
  for (std::size_t k = 0; k < background; ++k) {
    const auto level = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pyramid.levels()) - 1));
    const double v = pyramid.strides[level];
    LocationPrediction p;
    p.coarse.level = level;
    p.coarse.t = std::floor(rng.uniform(0.0, frames / v));
    p.coarse.start_offset = rng.uniform(0.5, 8.0);
    p.coarse.end_offset = rng.uniform(0.5, 8.0);
    p.coarse.class_scores = scores(-1, 0.0);
    p.coarse.quality = detail::clamp01(0.2 + noise.score_noise * rng.normal());
    p.refined.class_scores = scores(-1, 0.0);
    p.refined.quality = detail::clamp01(0.2 + noise.score_noise * rng.normal());
    levels[level].push_back(std::move(p));
  }
  return levels;
}

}  // namespace brem
