#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "brem/losses.hpp"
#include "brem/quality_maps.hpp"
#include "brem/random.hpp"

namespace brem {

/// Relative error used by all gradient checks. The 1e-4 floor keeps
/// near-zero gradients from amplifying finite-difference truncation noise.
inline double gradient_relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-4});
}

/// Max relative error between `analytic` and central differences of `f` at `x`.
inline double check_gradient(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> x, const std::vector<double>& analytic,
                             double step = 1e-5) {
  double worst = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double saved = x[k];
    x[k] = saved + step;
    const double up = f(x);
    x[k] = saved - step;
    const double down = f(x);
    x[k] = saved;
    worst = std::max(worst, gradient_relative_error(analytic[k], (up - down) / (2.0 * step)));
  }
  return worst;
}

struct GradCheckOptions {
  std::size_t points = 100;
  double step = 1e-5;
  double tolerance = 1e-4;
  std::uint64_t seed = 0;
  /// Test hook: negate every analytic gradient before comparison.
  bool inject_wrong_sign = false;
};

struct GradCheckRow {
  std::string loss;
  std::size_t points = 0;
  double max_relative_error = 0.0;
  bool pass = false;
};

namespace detail {

inline bool near_kink(std::initializer_list<double> gaps, double margin) {
  for (double g : gaps) if (std::abs(g) < margin) return true;
  return false;
}

}  // namespace detail

/// Finite-difference verification of every analytic loss gradient.
inline std::vector<GradCheckRow> run_gradcheck(const GradCheckOptions& opt = {}) {
  SplitMix64 rng(derive_seed(opt.seed, 0x6772616Dull));
  const double sign = opt.inject_wrong_sign ? -1.0 : 1.0;
  auto flip = [&](std::vector<double> g) {
    for (double& v : g) v *= sign;
    return g;
  };
  std::vector<GradCheckRow> rows;
  auto finish = [&](const char* name, double worst) {
    rows.push_back({name, opt.points, worst, worst <= opt.tolerance});
  };
  constexpr double kMargin = 1e-3;

  {  // focal
    double worst = 0.0;
    for (std::size_t n = 0; n < opt.points; ++n) {
      const std::size_t classes = 1 + static_cast<std::size_t>(rng.uniform_int(0, 4));
      std::vector<double> p(classes);
      for (double& v : p) v = rng.uniform(0.02, 0.98);
      std::optional<ClassId> target;
      if (rng.uniform() < 0.8) target = static_cast<ClassId>(rng.uniform_int(0, static_cast<std::int64_t>(classes) - 1));
      const FocalParams fp{rng.uniform(0.1, 0.9), rng.uniform(0.0, 3.0)};
      const auto r = focal_loss(p, target, fp);
      worst = std::max(worst, check_gradient([&](const auto& x) { return focal_loss(x, target, fp).value; }, p,
                                             flip(r.gradient), opt.step));
    }
    finish("focal", worst);
  }
  {  // GIoU
    double worst = 0.0;
    for (std::size_t n = 0; n < opt.points;) {
      const double gs = rng.uniform(0.0, 50.0), gl = rng.uniform(0.5, 30.0);
      const double ps = rng.uniform(-10.0, 60.0), pl = rng.uniform(0.5, 30.0);
      const Interval gt{gs, gs + gl}, pred{ps, ps + pl};
      if (detail::near_kink({pred.start - gt.start, pred.end - gt.end, pred.start - gt.end, pred.end - gt.start},
                            kMargin)) continue;
      const auto r = giou_loss_1d(pred, gt);
      worst = std::max(worst, check_gradient([&](const auto& x) { return giou_loss_1d({x[0], x[1]}, gt).value; },
                                             {pred.start, pred.end}, flip(r.gradient), opt.step));
      ++n;
    }
    finish("giou_1d", worst);
  }
  {  // normalised L1
    double worst = 0.0;
    for (std::size_t n = 0; n < opt.points;) {
      const OffsetPair coarse{rng.uniform(0.5, 20.0), rng.uniform(0.5, 20.0)};
      const OffsetPair gt{rng.uniform(0.5, 20.0), rng.uniform(0.5, 20.0)};
      const OffsetPair pred{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
      const double w = coarse.start + coarse.end;
      const OffsetPair target = refinement_target(gt, coarse, w);
      if (detail::near_kink({pred.start - target.start, pred.end - target.end}, kMargin)) continue;
      const auto r = l1_refine_loss(pred, gt, coarse, w);
      worst = std::max(worst,
                       check_gradient([&](const auto& x) { return l1_refine_loss({x[0], x[1]}, gt, coarse, w).value; },
                                      {pred.start, pred.end}, flip(r.gradient), opt.step));
      ++n;
    }
    finish("l1_refine", worst);
  }
  {  // quality BCE
    double worst = 0.0;
    for (std::size_t n = 0; n < opt.points; ++n) {
      const double gs = rng.uniform(0.0, 20.0);
      const Interval gt{gs, gs + rng.uniform(1.0, 20.0)};
      const double ps = gs + rng.uniform(-5.0, 5.0);
      const Interval proposal{ps, ps + rng.uniform(1.0, 20.0)};
      const double q = rng.uniform(0.02, 0.98);
      const auto r = quality_bce_loss(q, proposal, gt);
      worst = std::max(worst, check_gradient([&](const auto& x) { return quality_bce_loss(x[0], proposal, gt).value; },
                                             {q}, flip(r.gradient), opt.step));
    }
    finish("quality_bce", worst);
  }
  {  // BEM L2
    double worst = 0.0;
    for (std::size_t n = 0; n < opt.points; ++n) {
      const auto T = static_cast<std::size_t>(rng.uniform_int(2, 8));
      const auto I = static_cast<std::size_t>(rng.uniform_int(1, 4));
      QualityMapPair pred{Matrix(T, I), Matrix(T, I), AnchorScaleSet::single(1.0)};
      QualityMapPair label = pred;
      for (double& v : pred.start_map.data()) v = rng.uniform();
      for (double& v : pred.end_map.data()) v = rng.uniform();
      for (double& v : label.start_map.data()) v = rng.uniform() < 0.4 ? rng.uniform() : 0.0;
      for (double& v : label.end_map.data()) v = rng.uniform() < 0.4 ? rng.uniform() : 0.0;
      const auto mask = positive_mask(label);
      const auto r = bem_loss(pred, label, mask);
      std::vector<double> x = pred.start_map.data();
      x.insert(x.end(), pred.end_map.data().begin(), pred.end_map.data().end());
      std::vector<double> g = r.grad_start.data();
      g.insert(g.end(), r.grad_end.data().begin(), r.grad_end.data().end());
      auto f = [&](const std::vector<double>& v) {
        QualityMapPair p = pred;
        std::copy(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(T * I), p.start_map.data().begin());
        std::copy(v.begin() + static_cast<std::ptrdiff_t>(T * I), v.end(), p.end_map.data().begin());
        return bem_loss(p, label, mask).value;
      };
      worst = std::max(worst, check_gradient(f, x, flip(g), opt.step));
    }
    finish("bem_l2", worst);
  }
  return rows;
}

}  // namespace brem
