#pragma once

#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "brem/anchor_sampling.hpp"
#include "brem/dataset.hpp"
#include "brem/evaluation.hpp"
#include "brem/inference.hpp"
#include "brem/quality_maps.hpp"
#include "brem/stats.hpp"
#include "brem/synthetic.hpp"

namespace brem {

/// Scores detections (seconds) against frame-level quality maps of their
/// video: score = y * q * sqrt(p_s * p_e).
inline std::vector<Detection> apply_boundary_quality(std::vector<Detection> dets, const VideoAnnotation& video,
                                                     const QualityMapPair& maps, const InferenceConfig& cfg) {
  for (auto& d : dets) {
    const double start = d.interval.start * video.fps / cfg.map_stride;
    const double end = d.interval.end * video.fps / cfg.map_stride;
    const double idx = scale_index(end - start, cfg.tau, cfg.scale_set);
    d.start_quality = boundary_quality_lookup(maps.start_map, start, idx);
    d.end_quality = boundary_quality_lookup(maps.end_map, end, idx);
    d.score = final_score(d.class_score, d.quality, d.start_quality, d.end_quality);
  }
  return dets;
}

enum class QualitySource {
  /// Maps computed from the ground truth (a perfect boundary evaluator).
  Labels,
  /// Maps predicted by bem_forward on synthetic feature streams with a fixed head.
  BemForward,
};

struct RescoreConfig {
  InferenceConfig inference;
  QualitySource source = QualitySource::Labels;
  Reduction reduction = Reduction::Max;
  std::size_t bem_samples = kDefaultSamplesPerAnchor;
  std::size_t feature_channels = 4;
  std::uint64_t seed = 0;
  bool apply_nms = true;
};

/// Fixed, untrained boundary head for the synthetic feature streams: even
/// channels vote for starts, odd channels for ends.
inline BemHeadParams constructed_bem_head(std::size_t channels, std::size_t samples) {
  BemHeadParams p = BemHeadParams::zeros(channels);
  for (std::size_t c = 0; c < channels; ++c) p.projection.weight(c, c) = 1.0;
  const std::size_t evens = (channels + 1) / 2, odds = std::max<std::size_t>(1, channels / 2);
  for (std::size_t c = 0; c < channels; ++c) {
    if (channels == 1 || c % 2 == 0) p.start_head.weight(0, c) = 6.0 / static_cast<double>(evens);
    if (channels == 1 || c % 2 == 1) p.end_head.weight(0, c) = 6.0 / static_cast<double>(odds);
  }
  p.start_head.bias = {-3.0};
  p.end_head.bias = {-3.0};
  p.reduction.fc = {Matrix(channels, samples * channels), std::vector<double>(channels, 0.0)};
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t k = 0; k < samples; ++k) p.reduction.fc.weight(c, k * channels + c) = 1.0 / static_cast<double>(samples);
  p.reduction.mean_and_max = {Matrix(channels, 2 * channels), std::vector<double>(channels, 0.0)};
  for (std::size_t c = 0; c < channels; ++c) {
    p.reduction.mean_and_max.weight(c, c) = 0.5;
    p.reduction.mean_and_max.weight(c, channels + c) = 0.5;
  }
  return p;
}

inline QualityMapPair quality_maps_for(const VideoAnnotation& video, const RescoreConfig& cfg) {
  const auto frames = static_cast<std::size_t>(
      std::max(1.0, std::ceil(static_cast<double>(video.frame_count()) / cfg.inference.map_stride)));
  if (cfg.source == QualitySource::Labels) {
    auto actions = video.actions_in_frames();
    for (auto& a : actions) a.interval = {a.interval.start / cfg.inference.map_stride, a.interval.end / cfg.inference.map_stride};
    return multi_scale_quality_maps(actions, frames, cfg.inference.scale_set);
  }
  const auto features = generate_feature_stream(video, cfg.feature_channels, cfg.seed);
  return bem_forward(features, cfg.inference.scale_set, cfg.bem_samples,
                     constructed_bem_head(cfg.feature_channels, cfg.bem_samples), cfg.reduction);
}

inline DetectionSet rescore_detections(const DetectionSet& dets, const Corpus& corpus, const RescoreConfig& cfg) {
  cfg.inference.validate();
  DetectionSet out;
  for (const auto& [id, list] : dets) {
    const auto* video = corpus.find(id);
    if (!video) throw std::invalid_argument("rescore_detections: no annotation for video '" + id + "'");
    auto scored = apply_boundary_quality(list, *video, quality_maps_for(*video, cfg), cfg.inference);
    if (cfg.apply_nms) {
      scored = soft_nms(std::move(scored), cfg.inference.nms_threshold, cfg.inference.score_floor, cfg.inference.nms);
    }
    out[id] = std::move(scored);
  }
  return out;
}

struct OracleExperimentResult {
  MapTable raw;
  MapTable oracle;
};

inline OracleExperimentResult oracle_experiment(const DetectionSet& dets, const Corpus& corpus,
                                                const EvalProtocol& protocol) {
  for (const auto& [id, list] : dets) {
    if (!corpus.find(id)) throw std::invalid_argument("oracle: detections reference unknown video '" + id + "'");
  }
  return {map_table(dets, corpus, protocol), map_table(oracle_rescore(dets, corpus), corpus, protocol)};
}

/// Rank correlation between fused scores and true proposal tIoU for multi-scale
/// versus single-scale boundary quality lookup.
struct MultiScaleStudyConfig {
  CorpusConfig corpus;
  NoiseConfig noise;
  AnchorScaleSet multi_scale{1.0, 50.0, 20};
  double tau = 2.0;
  std::vector<double> single_scales{4.0, 16.0, 28.0, 40.0};

  MultiScaleStudyConfig() {
    corpus.videos = 40;
    corpus.duration_min = 300.0;
    corpus.duration_max = 600.0;
    corpus.length_min = 2.0;
    corpus.length_max = 100.0;
    noise.jitter_mode = JitterMode::Proportional;
    noise.boundary_jitter = 0.2;
    noise.score_noise = 0.3;
    noise.false_positive_rate = 0.0;
    noise.proposals_per_gt = 4;
  }
};

struct MultiScaleStudyResult {
  double multi_scale = 0.0;
  std::vector<double> single_scale;  // aligned with config.single_scales
  std::size_t proposals = 0;
};

inline MultiScaleStudyResult multi_scale_study(const MultiScaleStudyConfig& cfg, std::uint64_t seed) {
  CorpusConfig cc = cfg.corpus;
  cc.seed = seed;
  NoiseConfig nc = cfg.noise;
  nc.seed = seed;
  const Corpus corpus = generate_ground_truth(cc);
  const DetectionSet dets = generate_noisy_detections(corpus, nc);

  std::vector<AnchorScaleSet> settings{cfg.multi_scale};
  for (double r : cfg.single_scales) settings.push_back(AnchorScaleSet::single(r));
  std::vector<std::vector<double>> fused(settings.size());
  std::vector<double> truth;
  for (const auto& video : corpus.videos) {
    const auto it = dets.find(video.id);
    if (it == dets.end()) continue;
    const auto actions = video.actions_in_frames();
    for (const auto& d : it->second) truth.push_back(detail::best_same_class_tiou(d.interval, d.label, video.actions));
    for (std::size_t s = 0; s < settings.size(); ++s) {
      InferenceConfig ic;
      ic.scale_set = settings[s];
      ic.tau = cfg.tau;
      const auto maps = multi_scale_quality_maps(actions, video.frame_count(), settings[s]);
      for (const auto& d : apply_boundary_quality(it->second, video, maps, ic)) fused[s].push_back(d.score);
    }
  }
  MultiScaleStudyResult r;
  r.proposals = truth.size();
  r.multi_scale = spearman(fused[0], truth);
  for (std::size_t s = 1; s < settings.size(); ++s) r.single_scale.push_back(spearman(fused[s], truth));
  return r;
}

enum class SweepKind { Tau, AnchorSet, Nms, Reduction };

inline SweepKind parse_sweep_kind(const std::string& s) {
  if (s == "tau") return SweepKind::Tau;
  if (s == "anchor-set") return SweepKind::AnchorSet;
  if (s == "nms") return SweepKind::Nms;
  if (s == "reduction") return SweepKind::Reduction;
  throw std::invalid_argument("unknown sweep '" + s + "' (expected tau, anchor-set, nms or reduction)");
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    const auto b = cur.find_first_not_of(" \t"), e = cur.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? std::string() : cur.substr(b, e - b + 1));
  }
  return out;
}

inline double parse_number(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("not a number: '" + s + "'");
  }
  if (used != s.size()) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

/// "rmin,rmax,count" for a multi-scale set, or a single "r".
inline AnchorScaleSet parse_anchor_set(const std::string& s) {
  const auto parts = split(s, ',');
  if (parts.size() == 1) return AnchorScaleSet::single(parse_number(parts[0]));
  if (parts.size() == 3) {
    const double count = parse_number(parts[2]);
    if (count < 1 || count != std::floor(count)) throw std::invalid_argument("anchor set count must be a positive integer");
    if (count == 1) return AnchorScaleSet::single(parse_number(parts[0]));
    return {parse_number(parts[0]), parse_number(parts[1]), static_cast<std::size_t>(count)};
  }
  throw std::invalid_argument("anchor set must be 'r' or 'rmin,rmax,count', got '" + s + "'");
}

inline std::string anchor_set_label(const AnchorScaleSet& s) {
  auto num = [](double v) {
    std::ostringstream o;
    o << v;
    return o.str();
  };
  if (s.is_single()) return num(s.r_min());
  return "{" + num(s.r_min()) + " " + num(s.r_max()) + " " + std::to_string(s.count()) + "}";
}

struct SweepRow {
  std::string parameter;
  MapTable table;
};

/// One evaluation per grid point. Grid syntax: comma separated values, except
/// anchor-set which separates entries with ';'.
inline std::vector<SweepRow> run_sweep(const DetectionSet& dets, const Corpus& corpus, SweepKind kind,
                                       const std::string& grid, const RescoreConfig& base,
                                       const EvalProtocol& protocol) {
  const auto entries = split(grid, kind == SweepKind::AnchorSet ? ';' : ',');
  if (entries.empty() || (entries.size() == 1 && entries[0].empty())) {
    throw std::invalid_argument("sweep grid is empty");
  }
  std::vector<SweepRow> rows;
  for (const auto& entry : entries) {
    if (entry.empty()) throw std::invalid_argument("sweep grid has an empty entry");
    RescoreConfig cfg = base;
    switch (kind) {
      case SweepKind::Tau: cfg.inference.tau = parse_number(entry); break;
      case SweepKind::AnchorSet: cfg.inference.scale_set = parse_anchor_set(entry); break;
      case SweepKind::Nms: cfg.inference.nms_threshold = parse_number(entry); break;
      case SweepKind::Reduction:
        cfg.reduction = parse_reduction(entry);
        cfg.source = QualitySource::BemForward;
        break;
    }
    cfg.inference.validate();
    rows.push_back({kind == SweepKind::AnchorSet ? anchor_set_label(cfg.inference.scale_set) : entry,
                    map_table(rescore_detections(dets, corpus, cfg), corpus, protocol)});
  }
  return rows;
}

}  // namespace brem
