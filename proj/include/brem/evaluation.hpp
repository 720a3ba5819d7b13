#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "brem/dataset.hpp"
#include "brem/interval.hpp"
#include "brem/matrix.hpp"

namespace brem {

enum class ApInterpolation { AllPoint, ElevenPoint };

struct EvalProtocol {
  std::vector<double> thresholds{0.3, 0.4, 0.5, 0.6, 0.7};
  ApInterpolation interpolation = ApInterpolation::AllPoint;

  void validate() const {
    if (thresholds.empty()) throw std::invalid_argument("EvalProtocol: no thresholds");
    for (std::size_t k = 0; k < thresholds.size(); ++k) {
      if (!(thresholds[k] > 0.0 && thresholds[k] < 1.0)) {
        throw std::invalid_argument("EvalProtocol: thresholds must lie in (0, 1)");
      }
      if (k > 0 && !(thresholds[k] > thresholds[k - 1])) {
        throw std::invalid_argument("EvalProtocol: thresholds must be strictly increasing");
      }
    }
  }
};

struct MatchResult {
  std::size_t detection = 0;  // index into the input list
  bool true_positive = false;
  int ground_truth = -1;      // matched gt index, -1 for false positives
};

/// Detection reference used when ranking across videos.
struct RankedDetection {
  const Detection* det = nullptr;
  std::size_t video = 0;  // index into the gt-per-video list
  const std::string* video_id = nullptr;
  std::size_t order = 0;  // position in the original input
};

/// Descending score; ties by earlier start, then video id, then end, then input order.
inline bool ranks_before(const RankedDetection& a, const RankedDetection& b) {
  if (a.det->score != b.det->score) return a.det->score > b.det->score;
  if (a.det->interval.start != b.det->interval.start) return a.det->interval.start < b.det->interval.start;
  if (a.video_id && b.video_id && *a.video_id != *b.video_id) return *a.video_id < *b.video_id;
  if (a.det->interval.end != b.det->interval.end) return a.det->interval.end < b.det->interval.end;
  return a.order < b.order;
}

/// Greedy one-to-one matching in rank order: each detection takes the unmatched
/// same-class ground truth (in its video) with the highest tIoU >= threshold.
inline std::vector<MatchResult> match_ranked(
    std::vector<RankedDetection> ranked,
    std::span<const std::vector<GroundTruthAction>> gts_per_video, double threshold) {
  std::sort(ranked.begin(), ranked.end(), ranks_before);
  std::vector<std::vector<char>> used(gts_per_video.size());
  for (std::size_t v = 0; v < gts_per_video.size(); ++v) used[v].assign(gts_per_video[v].size(), 0);
  std::vector<MatchResult> out;
  out.reserve(ranked.size());
  for (const auto& r : ranked) {
    MatchResult m{r.order, false, -1};
    const auto& gts = gts_per_video[r.video];
    double best = -1.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[r.video][g] || gts[g].label != r.det->label) continue;
      const double o = tiou(r.det->interval, gts[g].interval);
      if (o >= threshold && o > best) {
        best = o;
        m.ground_truth = static_cast<int>(g);
      }
    }
    if (m.ground_truth >= 0) {
      m.true_positive = true;
      used[r.video][static_cast<std::size_t>(m.ground_truth)] = 1;
    }
    out.push_back(m);
  }
  return out;
}

/// Single-video matching; results are in rank order.
inline std::vector<MatchResult> match_detections(std::span<const Detection> dets,
                                                 std::span<const GroundTruthAction> gts,
                                                 double threshold) {
  std::vector<RankedDetection> ranked;
  for (std::size_t k = 0; k < dets.size(); ++k) ranked.push_back({&dets[k], 0, nullptr, k});
  const std::vector<std::vector<GroundTruthAction>> per_video{{gts.begin(), gts.end()}};
  return match_ranked(std::move(ranked), per_video, threshold);
}

struct PRPoint {
  double precision = 0.0;
  double recall = 0.0;
};

/// Precision/recall after each ranked detection.
inline std::vector<PRPoint> pr_curve(const std::vector<bool>& tp_in_rank_order, std::size_t num_gt) {
  std::vector<PRPoint> curve;
  curve.reserve(tp_in_rank_order.size());
  std::size_t tp = 0;
  for (std::size_t k = 0; k < tp_in_rank_order.size(); ++k) {
    if (tp_in_rank_order[k]) ++tp;
    curve.push_back({static_cast<double>(tp) / static_cast<double>(k + 1),
                     num_gt == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(num_gt)});
  }
  return curve;
}

/// AP from TP/FP labels already sorted by descending score. Zero when there is
/// no ground truth.
inline double average_precision(const std::vector<bool>& tp_in_rank_order, std::size_t num_gt,
                                ApInterpolation mode = ApInterpolation::AllPoint) {
  if (num_gt == 0 || tp_in_rank_order.empty()) return 0.0;
  const auto curve = pr_curve(tp_in_rank_order, num_gt);
  if (mode == ApInterpolation::ElevenPoint) {
    double ap = 0.0;
    for (int j = 0; j <= 10; ++j) {
      const double level = j / 10.0;
      double best = 0.0;
      for (const auto& p : curve) if (p.recall >= level) best = std::max(best, p.precision);
      ap += best / 11.0;
    }
    return ap;
  }
  // Precision envelope from the right, integrated over recall steps.
  std::vector<double> envelope(curve.size());
  double running = 0.0;
  for (std::size_t k = curve.size(); k-- > 0;) {
    running = std::max(running, curve[k].precision);
    envelope[k] = running;
  }
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t k = 0; k < curve.size(); ++k) {
    ap += (curve[k].recall - prev_recall) * envelope[k];
    prev_recall = curve[k].recall;
  }
  return ap;
}

inline std::vector<bool> true_positive_flags(std::span<const MatchResult> matches) {
  std::vector<bool> out;
  out.reserve(matches.size());
  for (const auto& m : matches) out.push_back(m.true_positive);
  return out;
}

inline double average_precision(std::span<const MatchResult> matches, std::size_t num_gt,
                                ApInterpolation mode = ApInterpolation::AllPoint) {
  return average_precision(true_positive_flags(matches), num_gt, mode);
}

struct MapTable {
  std::vector<ClassId> classes;      // classes with at least one ground truth
  std::vector<double> thresholds;
  Matrix ap;                         // classes x thresholds
  std::vector<double> map;           // per threshold
  double average_map = 0.0;
};

inline MapTable map_table(const DetectionSet& dets, const Corpus& corpus,
                          const EvalProtocol& protocol) {
  protocol.validate();
  std::vector<std::vector<GroundTruthAction>> gts;
  std::vector<std::size_t> gt_count(corpus.classes.size(), 0);
  std::size_t total = 0;
  for (const auto& v : corpus.videos) {
    gts.push_back(v.actions);
    for (const auto& a : v.actions) {
      if (a.label < 0 || static_cast<std::size_t>(a.label) >= corpus.classes.size()) {
        throw std::invalid_argument("map_table: ground-truth label outside class set in video " + v.id);
      }
      ++gt_count[static_cast<std::size_t>(a.label)];
      ++total;
    }
  }
  if (total == 0) throw std::invalid_argument("map_table: corpus has no ground truth");

  MapTable table;
  table.thresholds = protocol.thresholds;
  for (std::size_t c = 0; c < gt_count.size(); ++c) {
    if (gt_count[c] > 0) table.classes.push_back(static_cast<ClassId>(c));
  }
  table.ap = Matrix(table.classes.size(), protocol.thresholds.size());

  for (std::size_t ci = 0; ci < table.classes.size(); ++ci) {
    const ClassId c = table.classes[ci];
    std::vector<RankedDetection> ranked;
    std::size_t order = 0;
    for (std::size_t v = 0; v < corpus.videos.size(); ++v) {
      const auto it = dets.find(corpus.videos[v].id);
      if (it == dets.end()) continue;
      for (const auto& d : it->second) {
        if (d.label == c) ranked.push_back({&d, v, &corpus.videos[v].id, order});
        ++order;
      }
    }
    for (std::size_t k = 0; k < protocol.thresholds.size(); ++k) {
      const auto matches = match_ranked(ranked, gts, protocol.thresholds[k]);
      table.ap(ci, k) = average_precision(matches, gt_count[static_cast<std::size_t>(c)],
                                          protocol.interpolation);
    }
  }
  table.map.assign(protocol.thresholds.size(), 0.0);
  for (std::size_t k = 0; k < protocol.thresholds.size(); ++k) {
    double sum = 0.0;
    for (std::size_t ci = 0; ci < table.classes.size(); ++ci) sum += table.ap(ci, k);
    table.map[k] = sum / static_cast<double>(table.classes.size());
  }
  table.average_map = std::accumulate(table.map.begin(), table.map.end(), 0.0) /
                      static_cast<double>(table.map.size());
  return table;
}

/// Replace each score with the best tIoU against a same-class ground truth.
inline std::vector<Detection> oracle_rescore(std::span<const Detection> dets,
                                             std::span<const GroundTruthAction> gts) {
  std::vector<Detection> out(dets.begin(), dets.end());
  for (auto& d : out) {
    double best = 0.0;
    for (const auto& g : gts) if (g.label == d.label) best = std::max(best, tiou(d.interval, g.interval));
    d.score = best;
  }
  return out;
}

inline DetectionSet oracle_rescore(const DetectionSet& dets, const Corpus& corpus) {
  DetectionSet out;
  for (const auto& [id, list] : dets) {
    const auto* video = corpus.find(id);
    const std::vector<GroundTruthAction> none;
    out[id] = oracle_rescore(list, video ? std::span<const GroundTruthAction>(video->actions)
                                         : std::span<const GroundTruthAction>(none));
  }
  return out;
}

}  // namespace brem
