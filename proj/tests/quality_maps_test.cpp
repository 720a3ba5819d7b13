#include <gtest/gtest.h>

#include <random>

#include "brem/gradcheck.hpp"
#include "brem/quality_maps.hpp"
#include "brem/random.hpp"
#include "oracles.hpp"

using namespace brem;

namespace {

std::vector<GroundTruthAction> one_gt(double s, double e) { return {{{s, e}, 0}}; }

}  // namespace

TEST(Tiou, Examples) {
  EXPECT_NEAR(tiou({0, 4}, {2, 6}), 1.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(tiou({0, 4}, {0, 4}), 1.0);
  EXPECT_DOUBLE_EQ(tiou({0, 1}, {2, 3}), 0.0);
}

TEST(Tiou, DegenerateIntervals) {
  EXPECT_DOUBLE_EQ(tiou({3, 3}, {3, 3}), 0.0);
  EXPECT_DOUBLE_EQ(tiou({3, 3}, {0, 10}), 0.0);
  EXPECT_DOUBLE_EQ(tiou({0, 1}, {1, 2}), 0.0);
}

TEST(Tiou, MatchesSweepOracle) {
  SplitMix64 rng(11);
  for (int n = 0; n < 2000; ++n) {
    const double a0 = rng.uniform(-20, 20), b0 = rng.uniform(-20, 20);
    const double a1 = a0 + rng.uniform(0, 15), b1 = b0 + rng.uniform(0, 15);
    EXPECT_NEAR(tiou({a0, a1}, {b0, b1}), oracle::tiou(a0, a1, b0, b1), 1e-12);
    EXPECT_DOUBLE_EQ(tiou({a0, a1}, {b0, b1}), tiou({b0, b1}, {a0, a1}));
  }
}

TEST(AnchorInterval, Examples) {
  EXPECT_EQ(anchor_interval(10, 4), (Interval{8, 12}));
  EXPECT_EQ(anchor_interval(0, 2), (Interval{-1, 1}));
  EXPECT_EQ(anchor_interval(5, 1), (Interval{4.5, 5.5}));
  EXPECT_THROW(anchor_interval(5, 0), std::invalid_argument);
  EXPECT_THROW(anchor_interval(5, -1), std::invalid_argument);
}

TEST(SingleScaleQuality, Examples) {
  const auto gts = one_gt(5, 20);
  const auto q = single_scale_quality(gts, 30, 4, BoundarySide::Start);
  EXPECT_DOUBLE_EQ(q[5], 1.0);
  EXPECT_NEAR(q[3], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(q[3], oracle::anchor_quality(3, 5, 4), 1e-15);

  const std::vector<GroundTruthAction> two{{{10, 30}, 0}, {{12, 40}, 1}};
  const auto q2 = single_scale_quality(two, 50, 4, BoundarySide::Start);
  EXPECT_NEAR(q2[11], 0.6, 1e-15);
  EXPECT_NEAR(q2[11], std::max(oracle::anchor_quality(11, 10, 4), oracle::anchor_quality(11, 12, 4)), 1e-15);
}

TEST(SingleScaleQuality, NoGroundTruthIsZero) {
  const auto q = single_scale_quality({}, 8, 3, BoundarySide::End);
  for (double v : q) EXPECT_EQ(v, 0.0);
}

TEST(SingleScaleQuality, RejectsBadArguments) {
  EXPECT_THROW(single_scale_quality({}, 0, 3, BoundarySide::End), std::invalid_argument);
  EXPECT_THROW(single_scale_quality({}, 4, 0, BoundarySide::End), std::invalid_argument);
}

TEST(AnchorScaleSet, EvenSpacing) {
  AnchorScaleSet s(1, 5, 3);
  ASSERT_EQ(s.count(), 3u);
  EXPECT_DOUBLE_EQ(s[0], 1);
  EXPECT_DOUBLE_EQ(s[1], 3);
  EXPECT_DOUBLE_EQ(s[2], 5);
  AnchorScaleSet thumos(1, 50, 20);
  EXPECT_DOUBLE_EQ(thumos[19], 50.0);
  EXPECT_NEAR(thumos.spacing(), 49.0 / 19.0, 1e-15);
  EXPECT_TRUE(AnchorScaleSet::single(4).is_single());
  EXPECT_THROW(AnchorScaleSet(5, 1, 3), std::invalid_argument);
  EXPECT_THROW(AnchorScaleSet(0, 1, 3), std::invalid_argument);
  EXPECT_THROW(AnchorScaleSet(1, 2, 1), std::invalid_argument);
  EXPECT_THROW(AnchorScaleSet::single(0), std::invalid_argument);
}

TEST(MultiScaleMaps, Examples) {
  const auto gts = one_gt(10, 30);
  const auto maps = multi_scale_quality_maps(gts, 40, AnchorScaleSet(1, 5, 3));
  ASSERT_EQ(maps.length(), 40u);
  ASSERT_EQ(maps.scale_count(), 3u);
  EXPECT_NEAR(maps.start_map(8, 2), 3.0 / 7.0, 1e-15);
  EXPECT_NEAR(maps.start_map(8, 2), oracle::anchor_quality(8, 10, 5), 1e-15);
  EXPECT_EQ(maps.start_map(8, 0), 0.0);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(maps.start_map(10, i), 1.0);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(maps.end_map(30, i), 1.0);
}

TEST(MultiScaleMaps, ClosedFormAgainstOracle) {
  SplitMix64 rng(3);
  for (int n = 0; n < 1000; ++n) {
    const double b = rng.uniform(0, 60);
    const double r = rng.uniform(0.5, 30);
    const auto t = static_cast<std::size_t>(rng.uniform_int(0, 63));
    const auto q = single_scale_quality(one_gt(b, b + 5), 64, r, BoundarySide::Start);
    const double d = std::abs(static_cast<double>(t) - b);
    EXPECT_NEAR(q[t], std::max(0.0, (r - d) / (r + d)), 1e-12);
    EXPECT_NEAR(q[t], oracle::anchor_quality(static_cast<double>(t), b, r), 1e-12);
  }
}

TEST(MultiScaleMaps, EntriesInUnitRangeAndOneOnlyAtBoundaries) {
  SplitMix64 rng(5);
  for (int n = 0; n < 20; ++n) {
    std::vector<GroundTruthAction> gts;
    for (int k = 0; k < 3; ++k) {
      const double s = std::round(rng.uniform(0, 40)) + (rng.bernoulli(0.5) ? 0.5 : 0.0);
      gts.push_back({{s, s + rng.uniform(1, 20)}, 0});
    }
    const auto maps = multi_scale_quality_maps(gts, 64, AnchorScaleSet(1, 20, 6));
    for (auto side : {BoundarySide::Start, BoundarySide::End}) {
      const auto& m = maps.side(side);
      for (std::size_t t = 0; t < m.rows(); ++t) {
        bool on_boundary = false;
        for (const auto& g : gts) on_boundary |= std::abs(boundary_of(g.interval, side) - static_cast<double>(t)) < 1e-9;
        for (std::size_t i = 0; i < m.cols(); ++i) {
          EXPECT_GE(m(t, i), 0.0);
          EXPECT_LE(m(t, i), 1.0);
          EXPECT_EQ(std::abs(m(t, i) - 1.0) < 1e-9, on_boundary) << "t=" << t << " i=" << i;
        }
      }
    }
  }
}

TEST(MultiScaleMaps, TimeReversalSwapsSides) {
  SplitMix64 rng(9);
  const std::size_t T = 50;
  const double mirror = static_cast<double>(T - 1);
  for (int n = 0; n < 20; ++n) {
    std::vector<GroundTruthAction> gts, rev;
    for (int k = 0; k < 3; ++k) {
      const double s = rng.uniform(0, 40), e = s + rng.uniform(1, 10);
      gts.push_back({{s, e}, 0});
      rev.push_back({{mirror - e, mirror - s}, 0});
    }
    const AnchorScaleSet scales(1, 9, 5);
    const auto a = multi_scale_quality_maps(gts, T, scales);
    const auto b = multi_scale_quality_maps(rev, T, scales);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t i = 0; i < scales.count(); ++i) {
        EXPECT_NEAR(b.end_map(T - 1 - t, i), a.start_map(t, i), 1e-12);
        EXPECT_NEAR(b.start_map(T - 1 - t, i), a.end_map(t, i), 1e-12);
      }
    }
  }
}

TEST(MultiScaleMaps, NonIncreasingInDistance) {
  for (double r : {1.0, 3.0, 7.5, 20.0}) {
    const auto q = single_scale_quality(one_gt(30, 60), 64, r, BoundarySide::Start);
    for (std::size_t t = 30; t + 1 < 64; ++t) EXPECT_LE(q[t + 1], q[t]);
    for (std::size_t t = 30; t > 0; --t) EXPECT_LE(q[t - 1], q[t]);
  }
}

TEST(MultiScaleMaps, NotClippedAtVideoEdges) {
  // Boundary at 0: the anchor at t=0 coincides with the region even though half lies before 0.
  const auto q = single_scale_quality(one_gt(0, 10), 12, 6, BoundarySide::Start);
  EXPECT_DOUBLE_EQ(q[0], 1.0);
  EXPECT_NEAR(q[1], 5.0 / 7.0, 1e-15);
}

TEST(BemLoss, PerfectPredictionIsZero) {
  const auto label = multi_scale_quality_maps(one_gt(5, 12), 20, AnchorScaleSet(1, 5, 3));
  const auto r = bem_loss(label, label, positive_mask(label));
  EXPECT_EQ(r.value, 0.0);
  for (double g : r.grad_start.data()) EXPECT_EQ(g, 0.0);
}

TEST(BemLoss, SinglePositiveExample) {
  QualityMapPair label{Matrix(4, 1), Matrix(4, 1), AnchorScaleSet::single(1)};
  QualityMapPair pred{Matrix(4, 1, 0.5), Matrix(4, 1, 0.5), AnchorScaleSet::single(1)};
  label.start_map(2, 0) = 1.0;
  const auto mask = positive_mask(label);
  ASSERT_EQ(mask.start_positives.size(), 1u);
  ASSERT_TRUE(mask.end_positives.empty());
  const auto r = bem_loss(pred, label, mask);
  EXPECT_DOUBLE_EQ(r.start.value, 0.25);
  EXPECT_DOUBLE_EQ(r.end.value, 0.0);
  EXPECT_DOUBLE_EQ(r.value, 0.125);
  EXPECT_DOUBLE_EQ(r.start.gradient(2, 0), -1.0);
  EXPECT_DOUBLE_EQ(r.grad_start(2, 0), -0.5);
  for (std::size_t t = 0; t < 4; ++t) {
    if (t != 2) {
      EXPECT_EQ(r.start.gradient(t, 0), 0.0);
    }
    EXPECT_EQ(r.grad_end(t, 0), 0.0);
  }
}

TEST(BemLoss, EmptyPositivesContributeZero) {
  QualityMapPair label{Matrix(3, 2), Matrix(3, 2), AnchorScaleSet(1, 2, 2)};
  QualityMapPair pred{Matrix(3, 2, 0.7), Matrix(3, 2, 0.2), AnchorScaleSet(1, 2, 2)};
  const auto r = bem_loss(pred, label, positive_mask(label));
  EXPECT_EQ(r.value, 0.0);
}

TEST(BemLoss, ShapeMismatchThrows) {
  QualityMapPair a{Matrix(3, 2), Matrix(3, 2), AnchorScaleSet(1, 2, 2)};
  QualityMapPair b{Matrix(4, 2), Matrix(4, 2), AnchorScaleSet(1, 2, 2)};
  EXPECT_THROW(bem_loss(a, b, positive_mask(a)), std::invalid_argument);
}

TEST(BemLoss, GradientMatchesFiniteDifferences) {
  SplitMix64 rng(21);
  const auto label = multi_scale_quality_maps(std::vector<GroundTruthAction>{{{4, 11}, 0}, {{13, 17}, 0}}, 20,
                                              AnchorScaleSet(1, 6, 4));
  const auto mask = positive_mask(label);
  QualityMapPair pred = label;
  for (double& v : pred.start_map.data()) v = rng.uniform();
  for (double& v : pred.end_map.data()) v = rng.uniform();
  const auto r = bem_loss(pred, label, mask);
  const std::size_t n = pred.start_map.size();
  std::vector<double> x = pred.start_map.data();
  x.insert(x.end(), pred.end_map.data().begin(), pred.end_map.data().end());
  std::vector<double> g = r.grad_start.data();
  g.insert(g.end(), r.grad_end.data().begin(), r.grad_end.data().end());
  auto f = [&](const std::vector<double>& v) {
    QualityMapPair p = pred;
    std::copy(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n), p.start_map.data().begin());
    std::copy(v.begin() + static_cast<std::ptrdiff_t>(n), v.end(), p.end_map.data().begin());
    return bem_loss(p, label, mask).value;
  };
  EXPECT_LT(check_gradient(f, x, g, 1e-5), 1e-4);
}
