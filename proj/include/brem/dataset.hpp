#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "brem/inference.hpp"
#include "brem/interval.hpp"

namespace brem {

/// Ground truth for one video. Segment times are in seconds.
struct VideoAnnotation {
  std::string id;
  double duration = 0.0;
  double fps = 1.0;
  std::vector<GroundTruthAction> actions;

  /// Number of frame-level timesteps covering the video.
  std::size_t frame_count() const {
    return static_cast<std::size_t>(std::max(1.0, std::ceil(duration * fps)));
  }

  /// Actions converted to frame units.
  std::vector<GroundTruthAction> actions_in_frames() const {
    std::vector<GroundTruthAction> out = actions;
    for (auto& a : out) a.interval = {a.interval.start * fps, a.interval.end * fps};
    return out;
  }
};

struct Corpus {
  std::vector<std::string> classes;
  std::vector<VideoAnnotation> videos;

  const VideoAnnotation* find(const std::string& id) const {
    for (const auto& v : videos) if (v.id == id) return &v;
    return nullptr;
  }

  ClassId class_index(const std::string& name) const {
    for (std::size_t i = 0; i < classes.size(); ++i) if (classes[i] == name) return static_cast<ClassId>(i);
    throw std::invalid_argument("unknown class label '" + name + "'");
  }
};

/// Detections keyed by video id. Intervals in seconds.
using DetectionSet = std::map<std::string, std::vector<Detection>>;

}  // namespace brem
