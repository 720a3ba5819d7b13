#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "brem/matrix.hpp"
#include "brem/quality_maps.hpp"

namespace brem {

inline constexpr std::size_t kDefaultSamplesPerAnchor = 16;

/// T x C feature rows; `stride` is frames per timestep.
struct FeatureSequence {
  Matrix data;
  double stride = 1.0;

  std::size_t length() const { return data.rows(); }
  std::size_t channels() const { return data.cols(); }
};

namespace detail {

struct InterpWeights {
  std::size_t lo = 0;
  std::size_t hi = 0;
  double w_lo = 1.0;
  double w_hi = 0.0;
};

// Linear interpolation weights with replicate padding outside [0, length-1].
inline InterpWeights interp_weights(double t, std::size_t length) {
  const double last = static_cast<double>(length - 1);
  if (!(t > 0.0)) return {0, 0, 1.0, 0.0};
  if (t >= last) return {length - 1, length - 1, 1.0, 0.0};
  const double fl = std::floor(t);
  const auto lo = static_cast<std::size_t>(fl);
  const double frac = t - fl;
  if (frac == 0.0) return {lo, lo, 1.0, 0.0};
  return {lo, lo + 1, 1.0 - frac, frac};
}

inline void require_features(const FeatureSequence& f, const char* where) {
  if (f.length() < 1 || f.channels() < 1) {
    throw std::invalid_argument(std::string(where) + ": empty feature sequence");
  }
}

}  // namespace detail

/// Feature at real-valued timestep `t`, linearly interpolated; clamps outside the grid.
inline std::vector<double> sample_point(const FeatureSequence& f, double t) {
  detail::require_features(f, "sample_point");
  const auto w = detail::interp_weights(t, f.length());
  std::vector<double> out(f.channels());
  const auto lo = f.data.row(w.lo);
  const auto hi = f.data.row(w.hi);
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = w.w_lo * lo[c] + w.w_hi * hi[c];
  return out;
}

/// Output row j sits at input position j / factor; trailing rows replicate the last input row.
inline FeatureSequence temporal_upsample(const FeatureSequence& f, std::size_t factor) {
  if (factor < 1) throw std::invalid_argument("temporal_upsample: factor must be >= 1");
  detail::require_features(f, "temporal_upsample");
  const std::size_t out_len = f.length() * factor;
  FeatureSequence out{Matrix(out_len, f.channels()), f.stride / static_cast<double>(factor)};
  for (std::size_t j = 0; j < out_len; ++j) {
    const auto v = sample_point(f, static_cast<double>(j) / static_cast<double>(factor));
    std::copy(v.begin(), v.end(), out.data.row(j).begin());
  }
  return out;
}

/// Sparse (T*I*N) x T interpolation matrix. Row ((t*I + i)*N + k) samples the
/// k-th uniform point of the anchor of scale i centred at t.
class SamplingMatrix {
 public:
  struct Row {
    std::size_t col[2];
    double weight[2];
  };

  SamplingMatrix(std::size_t length, AnchorScaleSet scale_set, std::size_t samples)
      : length_(length), scale_set_(std::move(scale_set)), samples_(samples) {}

  std::size_t length() const { return length_; }
  const AnchorScaleSet& scale_set() const { return scale_set_; }
  std::size_t samples() const { return samples_; }
  std::size_t row_count() const { return rows_.size(); }
  std::span<const Row> rows() const { return rows_; }

  std::size_t row_index(std::size_t t, std::size_t i, std::size_t k) const {
    return (t * scale_set_.count() + i) * samples_ + k;
  }
  const Row& row(std::size_t t, std::size_t i, std::size_t k) const {
    return rows_[row_index(t, i, k)];
  }

  /// Dense expansion of one row (test and debugging aid).
  std::vector<double> dense_row(std::size_t r) const {
    std::vector<double> out(length_, 0.0);
    out[rows_[r].col[0]] += rows_[r].weight[0];
    out[rows_[r].col[1]] += rows_[r].weight[1];
    return out;
  }

 private:
  friend SamplingMatrix build_sampling_matrix(std::size_t, const AnchorScaleSet&, std::size_t);

  std::size_t length_;
  AnchorScaleSet scale_set_;
  std::size_t samples_;
  std::vector<Row> rows_;
};

/// Positions of the `samples` uniform points spanning the anchor of `scale` at `t`.
inline double anchor_sample_position(double t, double scale, std::size_t k, std::size_t samples) {
  return t - 0.5 * scale + static_cast<double>(k) * scale / static_cast<double>(samples - 1);
}

inline SamplingMatrix build_sampling_matrix(std::size_t length, const AnchorScaleSet& scale_set,
                                            std::size_t samples) {
  if (samples < 2) throw std::invalid_argument("build_sampling_matrix: need at least 2 samples");
  if (length < 1) throw std::invalid_argument("build_sampling_matrix: length must be >= 1");
  SamplingMatrix m(length, scale_set, samples);
  m.rows_.reserve(length * scale_set.count() * samples);
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t i = 0; i < scale_set.count(); ++i) {
      for (std::size_t k = 0; k < samples; ++k) {
        const double pos = anchor_sample_position(static_cast<double>(t), scale_set[i], k, samples);
        const auto w = detail::interp_weights(pos, length);
        m.rows_.push_back({{w.lo, w.hi}, {w.w_lo, w.w_hi}});
      }
    }
  }
  return m;
}

/// T x I x N x C anchor feature grid.
struct AnchorFeatureMap {
  Tensor4 data;

  std::size_t length() const { return data.dim(0); }
  std::size_t scale_count() const { return data.dim(1); }
  std::size_t samples() const { return data.dim(2); }
  std::size_t channels() const { return data.dim(3); }
};

/// Sparse product W * f reshaped to (T, I, N, C).
inline AnchorFeatureMap sample_anchor_features(const FeatureSequence& f, const SamplingMatrix& w) {
  detail::require_features(f, "sample_anchor_features");
  if (w.length() != f.length()) {
    throw std::invalid_argument("sample_anchor_features: sampling matrix built for length " +
                                std::to_string(w.length()) + ", features have " +
                                std::to_string(f.length()));
  }
  const std::size_t T = w.length(), I = w.scale_set().count(), N = w.samples(), C = f.channels();
  AnchorFeatureMap out{Tensor4(T, I, N, C)};
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < I; ++i)
      for (std::size_t k = 0; k < N; ++k) {
        const auto& r = w.row(t, i, k);
        const auto a = f.data.row(r.col[0]);
        const auto b = f.data.row(r.col[1]);
        auto dst = out.data.vec(t, i, k);
        for (std::size_t c = 0; c < C; ++c) dst[c] = r.weight[0] * a[c] + r.weight[1] * b[c];
      }
  return out;
}

enum class Reduction { Max, Mean, FullyConnected, MeanAndMax };

inline Reduction parse_reduction(const std::string& s) {
  if (s == "max") return Reduction::Max;
  if (s == "mean") return Reduction::Mean;
  if (s == "fc") return Reduction::FullyConnected;
  if (s == "mean_and_max") return Reduction::MeanAndMax;
  throw std::invalid_argument("unknown reduction method '" + s + "'");
}

inline const char* to_string(Reduction r) {
  switch (r) {
    case Reduction::Max: return "max";
    case Reduction::Mean: return "mean";
    case Reduction::FullyConnected: return "fc";
    case Reduction::MeanAndMax: return "mean_and_max";
  }
  return "?";
}

/// Dense affine layer y = W x + b, W stored out x in.
struct Linear {
  Matrix weight;
  std::vector<double> bias;

  std::size_t in_features() const { return weight.cols(); }
  std::size_t out_features() const { return weight.rows(); }

  std::vector<double> operator()(std::span<const double> x) const {
    if (x.size() != weight.cols()) {
      throw std::invalid_argument("Linear: input has " + std::to_string(x.size()) +
                                  " features, expected " + std::to_string(weight.cols()));
    }
    std::vector<double> y(weight.rows());
    for (std::size_t o = 0; o < y.size(); ++o) {
      double acc = bias.empty() ? 0.0 : bias[o];
      const auto w = weight.row(o);
      for (std::size_t j = 0; j < x.size(); ++j) acc += w[j] * x[j];
      y[o] = acc;
    }
    return y;
  }
};

/// Projections used by the parametric reductions.
struct ReductionParams {
  Linear fc;            // (N*C) -> C
  Linear mean_and_max;  // (2*C) -> C
};

inline Tensor3 reduce_anchor_features(const AnchorFeatureMap& m, Reduction method,
                                      const ReductionParams& params = {}) {
  const std::size_t T = m.length(), I = m.scale_count(), N = m.samples(), C = m.channels();
  if (method == Reduction::FullyConnected &&
      (params.fc.in_features() != N * C || params.fc.out_features() != C)) {
    throw std::invalid_argument("reduce_anchor_features: fc projection must be C x (N*C)");
  }
  if (method == Reduction::MeanAndMax &&
      (params.mean_and_max.in_features() != 2 * C || params.mean_and_max.out_features() != C)) {
    throw std::invalid_argument("reduce_anchor_features: mean_and_max projection must be C x 2C");
  }
  Tensor3 out(T, I, C);
  std::vector<double> mean(C), maxv(C), buf;
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < I; ++i) {
      auto dst = out.vec(t, i);
      if (method == Reduction::FullyConnected) {
        const auto y = params.fc(m.data.slab(t, i));
        std::copy(y.begin(), y.end(), dst.begin());
        continue;
      }
      std::fill(mean.begin(), mean.end(), 0.0);
      std::fill(maxv.begin(), maxv.end(), -std::numeric_limits<double>::infinity());
      for (std::size_t k = 0; k < N; ++k) {
        const auto v = m.data.vec(t, i, k);
        for (std::size_t c = 0; c < C; ++c) {
          mean[c] += v[c];
          maxv[c] = std::max(maxv[c], v[c]);
        }
      }
      for (double& x : mean) x /= static_cast<double>(N);
      switch (method) {
        case Reduction::Max: std::copy(maxv.begin(), maxv.end(), dst.begin()); break;
        case Reduction::Mean: std::copy(mean.begin(), mean.end(), dst.begin()); break;
        case Reduction::MeanAndMax: {
          buf.assign(mean.begin(), mean.end());
          buf.insert(buf.end(), maxv.begin(), maxv.end());
          const auto y = params.mean_and_max(buf);
          std::copy(y.begin(), y.end(), dst.begin());
          break;
        }
        case Reduction::FullyConnected: break;
      }
    }
  }
  return out;
}

/// Boundary head: 1x1 projection over the reduced anchor features followed by
/// one linear scorer per side.
struct BemHeadParams {
  Linear projection;  // C -> C
  Linear start_head;  // C -> 1
  Linear end_head;    // C -> 1
  ReductionParams reduction;

  std::size_t channels() const { return projection.in_features(); }

  static BemHeadParams zeros(std::size_t channels) {
    BemHeadParams p;
    p.projection = {Matrix(channels, channels), std::vector<double>(channels, 0.0)};
    p.start_head = {Matrix(1, channels), {0.0}};
    p.end_head = {Matrix(1, channels), {0.0}};
    return p;
  }

  void validate() const {
    const std::size_t C = channels();
    if (C == 0 || projection.out_features() != C || start_head.in_features() != C ||
        end_head.in_features() != C || start_head.out_features() != 1 ||
        end_head.out_features() != 1 || projection.bias.size() != C ||
        start_head.bias.size() != 1 || end_head.bias.size() != 1) {
      throw std::invalid_argument("BemHeadParams: inconsistent dimensions");
    }
    auto finite = [](const Linear& l) {
      for (double v : l.weight.data()) if (!std::isfinite(v)) return false;
      for (double v : l.bias) if (!std::isfinite(v)) return false;
      return true;
    };
    if (!finite(projection) || !finite(start_head) || !finite(end_head)) {
      throw std::invalid_argument("BemHeadParams: non-finite parameter");
    }
  }
};

/// Small random head (uniform weights in [-scale, scale]) for smoke runs without trained parameters.
template <typename Rng>
BemHeadParams random_bem_params(std::size_t channels, std::size_t samples, Rng& rng, double scale = 0.5) {
  BemHeadParams p = BemHeadParams::zeros(channels);
  auto fill = [&](Linear& l) {
    for (double& v : l.weight.data()) v = rng.uniform(-scale, scale);
    for (double& v : l.bias) v = rng.uniform(-scale, scale);
  };
  fill(p.projection);
  fill(p.start_head);
  fill(p.end_head);
  p.reduction.fc = {Matrix(channels, samples * channels), std::vector<double>(channels)};
  p.reduction.mean_and_max = {Matrix(channels, 2 * channels), std::vector<double>(channels)};
  fill(p.reduction.fc);
  fill(p.reduction.mean_and_max);
  return p;
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Predicted start/end quality maps from frame-level features.
inline QualityMapPair bem_forward(const FeatureSequence& features, const AnchorScaleSet& scale_set,
                                  std::size_t samples, const BemHeadParams& params,
                                  Reduction reduction = Reduction::Max) {
  params.validate();
  if (features.channels() != params.channels()) {
    throw std::invalid_argument("bem_forward: features have " +
                                std::to_string(features.channels()) + " channels, head expects " +
                                std::to_string(params.channels()));
  }
  const auto w = build_sampling_matrix(features.length(), scale_set, samples);
  const auto anchors = sample_anchor_features(features, w);
  const auto reduced = reduce_anchor_features(anchors, reduction, params.reduction);
  const std::size_t T = features.length(), I = scale_set.count();
  QualityMapPair out{Matrix(T, I), Matrix(T, I), scale_set};
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < I; ++i) {
      const auto proj = params.projection(reduced.vec(t, i));
      out.start_map(t, i) = sigmoid(params.start_head(proj)[0]);
      out.end_map(t, i) = sigmoid(params.end_head(proj)[0]);
    }
  }
  return out;
}

/// Three-point proposal feature at {t - start_offset, t, t + end_offset}, fused
/// by a (3C -> C) fully connected layer.
inline std::vector<double> aligned_proposal_feature(const FeatureSequence& f, double t,
                                                    double start_offset, double end_offset,
                                                    const Linear& fuse) {
  if (start_offset < 0.0 || end_offset < 0.0) {
    throw std::invalid_argument("aligned_proposal_feature: offsets must be non-negative");
  }
  detail::require_features(f, "aligned_proposal_feature");
  const std::size_t C = f.channels();
  if (fuse.in_features() != 3 * C || fuse.out_features() != C) {
    throw std::invalid_argument("aligned_proposal_feature: fusion layer must be C x 3C");
  }
  std::vector<double> cat;
  cat.reserve(3 * C);
  for (double pos : {t - start_offset, t, t + end_offset}) {
    const auto v = sample_point(f, pos);
    cat.insert(cat.end(), v.begin(), v.end());
  }
  return fuse(cat);
}

}  // namespace brem
