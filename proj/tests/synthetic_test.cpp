#include <gtest/gtest.h>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/normal.hpp>

#include "brem/io.hpp"
#include "brem/stats.hpp"
#include "brem/synthetic.hpp"

using namespace brem;

TEST(SplitMix64, ReferenceSequence) {
  // First outputs for seed 1234567 of the published SplitMix64 reference.
  SplitMix64 rng(1234567);
  EXPECT_EQ(rng(), 6457827717110365317ull);
  EXPECT_EQ(rng(), 3203168211198807973ull);
  EXPECT_EQ(rng(), 9817491932198370423ull);
}

TEST(SplitMix64, UniformRangesAndDeterminism) {
  SplitMix64 a(9), b(9);
  for (int k = 0; k < 1000; ++k) {
    const double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    const auto i = a.uniform_int(-3, 4);
    b.uniform_int(-3, 4);
    EXPECT_GE(i, -3);
    EXPECT_LE(i, 4);
    const double l = a.log_uniform(2, 100);
    b.log_uniform(2, 100);
    EXPECT_GE(l, 2.0);
    EXPECT_LE(l, 100.0);
  }
}

TEST(SplitMix64, NormalMatchesQuantileFunction) {
  // The normal draw is the inverse CDF of an open-interval uniform.
  SplitMix64 a(77), b(77);
  const boost::math::normal_distribution<double> n01;
  for (int k = 0; k < 200; ++k) {
    const double u = b.uniform_open();
    EXPECT_NEAR(a.normal(), boost::math::quantile(n01, u), 1e-9);
  }
  SplitMix64 rng(78);
  double sum = 0.0, sq = 0.0;
  const int n = 100000;
  for (int k = 0; k < n; ++k) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.02);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}

TEST(Fnv1a, KnownValues) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 2, 4));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 3));
}

TEST(Stats, AverageRanksAndSpearman) {
  const std::vector<double> x{10, 20, 20, 30};
  EXPECT_EQ(average_ranks(x), (std::vector<double>{1, 2.5, 2.5, 4}));
  const std::vector<double> y{1, 4, 9, 16}, z{4, 3, 2, 1};
  EXPECT_NEAR(spearman(y, y), 1.0, 1e-15);
  EXPECT_NEAR(spearman(y, z), -1.0, 1e-15);
  const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 1, 4, 3, 5};
  EXPECT_NEAR(spearman(a, b), 0.8, 1e-12);  // 1 - 6*4/(5*24)
}

TEST(GenerateGroundTruth, Deterministic) {
  CorpusConfig cfg;
  cfg.videos = 25;
  cfg.seed = 5;
  const auto a = io::annotations_to_json(generate_ground_truth(cfg)).dump();
  const auto b = io::annotations_to_json(generate_ground_truth(cfg)).dump();
  EXPECT_EQ(a, b);
  cfg.seed = 6;
  EXPECT_NE(a, io::annotations_to_json(generate_ground_truth(cfg)).dump());
}

TEST(GenerateGroundTruth, RespectsBounds) {
  CorpusConfig cfg;
  cfg.videos = 50;
  cfg.actions_min = cfg.actions_max = 1;
  cfg.length_min = 2;
  cfg.length_max = 4;
  const auto corpus = generate_ground_truth(cfg);
  ASSERT_EQ(corpus.videos.size(), 50u);
  for (const auto& v : corpus.videos) {
    ASSERT_EQ(v.actions.size(), 1u);
    EXPECT_GE(v.duration, cfg.duration_min);
    EXPECT_LE(v.duration, cfg.duration_max);
    const double len = v.actions[0].interval.length();
    EXPECT_GE(len, 2.0 - 1e-12);
    EXPECT_LE(len, 4.0 + 1e-12);
    EXPECT_GE(v.actions[0].interval.start, 0.0);
    EXPECT_LE(v.actions[0].interval.end, v.duration);
  }
}

TEST(GenerateGroundTruth, SameClassActionsDoNotOverlap) {
  CorpusConfig cfg;
  cfg.videos = 40;
  cfg.classes = 2;
  cfg.actions_max = 10;
  for (const auto& v : generate_ground_truth(cfg).videos)
    for (std::size_t a = 0; a < v.actions.size(); ++a)
      for (std::size_t b = a + 1; b < v.actions.size(); ++b)
        if (v.actions[a].label == v.actions[b].label) {
          EXPECT_EQ(intersection_length(v.actions[a].interval, v.actions[b].interval), 0.0);
        }
}

TEST(GenerateGroundTruth, ImpossibleConfigurationsThrow) {
  CorpusConfig cfg;
  cfg.videos = 1;
  cfg.duration_min = cfg.duration_max = 10;
  cfg.length_min = 20;
  cfg.length_max = 30;
  EXPECT_THROW(generate_ground_truth(cfg), std::runtime_error);
  CorpusConfig crowded;
  crowded.videos = 1;
  crowded.classes = 1;
  crowded.duration_min = crowded.duration_max = 10;
  crowded.length_min = crowded.length_max = 6;
  crowded.actions_min = crowded.actions_max = 2;
  EXPECT_THROW(generate_ground_truth(crowded), std::runtime_error);
  CorpusConfig bad;
  bad.classes = 0;
  EXPECT_THROW(generate_ground_truth(bad), std::invalid_argument);
}

TEST(GenerateNoisyDetections, NoiselessEqualsGroundTruth) {
  CorpusConfig cfg;
  cfg.videos = 20;
  const auto corpus = generate_ground_truth(cfg);
  NoiseConfig noise;
  noise.boundary_jitter = 0;
  noise.score_noise = 0;
  noise.false_positive_rate = 0;
  noise.miss_rate = 0;
  const auto dets = generate_noisy_detections(corpus, noise);
  for (const auto& v : corpus.videos) {
    const auto& list = dets.at(v.id);
    ASSERT_EQ(list.size(), v.actions.size());
    for (std::size_t k = 0; k < list.size(); ++k) {
      EXPECT_EQ(list[k].interval, v.actions[k].interval);
      EXPECT_EQ(list[k].label, v.actions[k].label);
      EXPECT_EQ(list[k].score, 1.0);
    }
  }
}

TEST(GenerateNoisyDetections, FullMissRateLeavesFalsePositivesOnly) {
  CorpusConfig cfg;
  cfg.videos = 20;
  const auto corpus = generate_ground_truth(cfg);
  NoiseConfig noise;
  noise.miss_rate = 1.0;
  noise.false_positive_rate = 2.0;
  const auto dets = generate_noisy_detections(corpus, noise);
  for (const auto& v : corpus.videos) {
    EXPECT_EQ(dets.at(v.id).size(), 2 * v.actions.size());
  }
  noise.false_positive_rate = 0.0;
  for (const auto& [id, list] : generate_noisy_detections(corpus, noise)) EXPECT_TRUE(list.empty());
}

TEST(GenerateNoisyDetections, ProposalsPerGtAndDeterminism) {
  CorpusConfig cfg;
  cfg.videos = 10;
  const auto corpus = generate_ground_truth(cfg);
  NoiseConfig noise;
  noise.false_positive_rate = 0;
  noise.proposals_per_gt = 3;
  const auto a = generate_noisy_detections(corpus, noise);
  for (const auto& v : corpus.videos) EXPECT_EQ(a.at(v.id).size(), 3 * v.actions.size());
  EXPECT_EQ(io::detections_to_json(a, corpus.classes).dump(),
            io::detections_to_json(generate_noisy_detections(corpus, noise), corpus.classes).dump());
  for (const auto& [id, list] : a) {
    for (const auto& d : list) {
      EXPECT_GE(d.score, 0.0);
      EXPECT_LE(d.score, 1.0);
      EXPECT_LE(d.interval.start, d.interval.end);
    }
  }
}

TEST(GenerateNoisyDetections, RankCorrelationFallsWithScoreNoise) {
  CorpusConfig cfg;
  cfg.videos = 100;
  cfg.seed = 12;
  const auto corpus = generate_ground_truth(cfg);
  std::vector<double> rho;
  for (double sigma : {0.0, 0.2, 0.5}) {
    NoiseConfig noise;
    noise.seed = 12;
    noise.score_noise = sigma;
    const auto dets = generate_noisy_detections(corpus, noise);
    std::vector<double> scores, truth;
    for (const auto& v : corpus.videos) {
      for (const auto& d : dets.at(v.id)) {
        scores.push_back(d.score);
        truth.push_back(detail::best_same_class_tiou(d.interval, d.label, v.actions));
      }
    }
    rho.push_back(spearman(scores, truth));
  }
  EXPECT_NEAR(rho[0], 1.0, 1e-12);
  EXPECT_GT(rho[0], rho[1]);
  EXPECT_GT(rho[1], rho[2]);
}

TEST(FeatureStream, ShapeAndDeterminism) {
  VideoAnnotation v{"clip", 37.5, 2.0, {{{3, 8}, 0}}};
  const auto a = generate_feature_stream(v, 3, 4);
  EXPECT_EQ(a.length(), 75u);
  EXPECT_EQ(a.channels(), 3u);
  EXPECT_EQ(a.data, generate_feature_stream(v, 3, 4).data);
  EXPECT_NE(a.data, generate_feature_stream(v, 3, 5).data);
  EXPECT_THROW(generate_feature_stream(v, 0, 4), std::invalid_argument);
}

TEST(FeatureStream, BoundaryEnergyExceedsBackground) {
  std::size_t wins = 0;
  const std::size_t trials = 100;
  for (std::size_t seed = 0; seed < trials; ++seed) {
    CorpusConfig cfg;
    cfg.videos = 1;
    cfg.seed = seed;
    const auto video = generate_ground_truth(cfg).videos[0];
    const auto f = generate_feature_stream(video, 4, seed);
    std::vector<char> near(f.length(), 0);
    std::vector<std::size_t> boundary;
    for (const auto& a : video.actions_in_frames()) {
      for (double b : {a.interval.start, a.interval.end}) {
        const auto t = static_cast<std::size_t>(std::min(std::round(b), static_cast<double>(f.length() - 1)));
        boundary.push_back(t);
        for (std::size_t j = (t > 5 ? t - 5 : 0); j <= std::min(f.length() - 1, t + 5); ++j) near[j] = 1;
      }
    }
    auto energy = [&](std::size_t t) {
      double e = 0.0;
      for (std::size_t c = 0; c < f.channels(); ++c) e += f.data(t, c) * f.data(t, c);
      return e;
    };
    double on = 0.0, off = 0.0;
    std::size_t n_off = 0;
    for (std::size_t t : boundary) on += energy(t);
    for (std::size_t t = 0; t < f.length(); ++t) {
      if (!near[t]) {
        off += energy(t);
        ++n_off;
      }
    }
    wins += on / static_cast<double>(boundary.size()) > off / static_cast<double>(n_off) ? 1 : 0;
  }
  // One-sided sign test against a fair coin.
  const boost::math::binomial_distribution<double> fair(static_cast<double>(trials), 0.5);
  const double p_value = boost::math::cdf(boost::math::complement(fair, static_cast<double>(wins) - 1.0));
  EXPECT_LT(p_value, 0.01) << wins << " of " << trials;
}

TEST(LocationPredictions, LevelsFollowRanges) {
  VideoAnnotation v{"v", 300, 1, {{{10, 20}, 0}, {{50, 90}, 1}, {{100, 250}, 2}}};
  const PyramidConfig pyramid{{1, 2, 4}};
  PredictionNoise noise;
  noise.background_rate = 0;
  noise.score_noise = 0;
  const auto levels = generate_location_predictions(v, 3, pyramid, LevelRanges{}, noise, 0);
  ASSERT_EQ(levels.size(), 3u);
  for (std::size_t l = 0; l < 3; ++l) {
    ASSERT_EQ(levels[l].size(), noise.locations_per_gt);
    for (const auto& p : levels[l]) {
      EXPECT_EQ(p.coarse.level, l);
      EXPECT_EQ(argmax(p.coarse.class_scores), l) << "level " << l;
      EXPECT_GE(p.coarse.start_offset, 0.0);
      EXPECT_GE(p.coarse.end_offset, 0.0);
    }
  }
  EXPECT_EQ(LevelRanges{}.level_for(16), 0u);
  EXPECT_EQ(LevelRanges{}.level_for(17), 1u);
  EXPECT_EQ(LevelRanges{}.level_for(1e6), 2u);
}
