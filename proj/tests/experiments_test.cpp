#include <gtest/gtest.h>

#include "brem/experiments.hpp"

using namespace brem;

namespace {

struct Fixture {
  Corpus corpus;
  DetectionSet dets;
};

Fixture make(std::uint64_t seed, std::size_t videos = 20) {
  CorpusConfig cfg;
  cfg.videos = videos;
  cfg.seed = seed;
  NoiseConfig noise;
  noise.seed = seed;
  Fixture f{generate_ground_truth(cfg), {}};
  f.dets = generate_noisy_detections(f.corpus, noise);
  return f;
}

}  // namespace

TEST(OracleExperiment, PerfectDetectionsGiveOnesInBothRows) {
  const auto f = make(1);
  DetectionSet perfect;
  for (const auto& v : f.corpus.videos)
    for (const auto& a : v.actions) {
      Detection d;
      d.interval = a.interval;
      d.label = a.label;
      perfect[v.id].push_back(d);
    }
  const auto r = oracle_experiment(perfect, f.corpus, {});
  EXPECT_DOUBLE_EQ(r.raw.average_map, 1.0);
  EXPECT_DOUBLE_EQ(r.oracle.average_map, 1.0);
}

TEST(OracleExperiment, EmptyDetectionsGiveZeros) {
  const auto f = make(2);
  const auto r = oracle_experiment({}, f.corpus, {});
  for (double v : r.raw.map) EXPECT_EQ(v, 0.0);
  for (double v : r.oracle.map) EXPECT_EQ(v, 0.0);
}

TEST(OracleExperiment, UnknownVideoIsAnError) {
  const auto f = make(3);
  DetectionSet dets{{"nope", {}}};
  EXPECT_THROW(oracle_experiment(dets, f.corpus, {}), std::invalid_argument);
}

TEST(ApplyBoundaryQuality, PerfectMapsKeepExactDetections) {
  VideoAnnotation v{"v", 100, 2.0, {{{10, 20}, 0}}};
  InferenceConfig cfg;
  const auto maps = multi_scale_quality_maps(v.actions_in_frames(), v.frame_count(), cfg.scale_set);
  Detection exact;
  exact.interval = {10, 20};
  exact.score = 0.6;
  exact.class_score = 0.6;
  Detection off = exact;
  off.interval = {12, 20};
  const auto out = apply_boundary_quality({exact, off}, v, maps, cfg);
  EXPECT_NEAR(out[0].start_quality, 1.0, 1e-12);
  EXPECT_NEAR(out[0].score, 0.6, 1e-12);
  EXPECT_LT(out[1].start_quality, 1.0);
  EXPECT_LT(out[1].score, 0.6);
}

TEST(RescoreDetections, BemSourceRunsAndIsDeterministic) {
  const auto f = make(4, 5);
  RescoreConfig cfg;
  cfg.source = QualitySource::BemForward;
  cfg.reduction = Reduction::Mean;
  const auto a = rescore_detections(f.dets, f.corpus, cfg);
  const auto b = rescore_detections(f.dets, f.corpus, cfg);
  EXPECT_EQ(a, b);
  for (const auto& [id, list] : a)
    for (const auto& d : list) {
      EXPECT_GE(d.score, 0.0);
      EXPECT_LE(d.score, 1.0);
    }
}

TEST(ConstructedBemHead, PeaksAtBoundaries) {
  VideoAnnotation v{"v", 120, 1.0, {{{30, 70}, 0}}};
  const auto features = generate_feature_stream(v, 4, 0);
  const AnchorScaleSet scales(1, 8, 4);
  const auto maps = bem_forward(features, scales, 8, constructed_bem_head(4, 8));
  EXPECT_GT(maps.start_map(30, 0), maps.start_map(50, 0));
  EXPECT_GT(maps.end_map(70, 0), maps.end_map(50, 0));
}

TEST(Sweep, RowCountAndSingletonEqualsDirect) {
  const auto f = make(5);
  RescoreConfig base;
  const auto rows = run_sweep(f.dets, f.corpus, SweepKind::Tau, "0.5,1,2,4", base, {});
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[2].parameter, "2");

  const auto single = run_sweep(f.dets, f.corpus, SweepKind::Tau, "2", base, {});
  const auto direct = map_table(rescore_detections(f.dets, f.corpus, base), f.corpus, {});
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single[0].table.ap.data(), direct.ap.data());
  EXPECT_EQ(rows[2].table.ap.data(), direct.ap.data());
}

TEST(Sweep, AnchorSetNmsAndReduction) {
  const auto f = make(6, 8);
  RescoreConfig base;
  const auto anchors = run_sweep(f.dets, f.corpus, SweepKind::AnchorSet, "1,50,20;16", base, {});
  ASSERT_EQ(anchors.size(), 2u);
  EXPECT_EQ(anchors[0].parameter, "{1 50 20}");
  EXPECT_EQ(anchors[1].parameter, "16");
  EXPECT_EQ(run_sweep(f.dets, f.corpus, SweepKind::Nms, "0.3,0.7", base, {}).size(), 2u);
  EXPECT_EQ(run_sweep(f.dets, f.corpus, SweepKind::Reduction, "max,mean,fc,mean_and_max", base, {}).size(), 4u);
}

TEST(Sweep, InvalidGridsThrow) {
  const auto f = make(7, 3);
  RescoreConfig base;
  EXPECT_THROW(run_sweep(f.dets, f.corpus, SweepKind::Tau, "", base, {}), std::invalid_argument);
  EXPECT_THROW(run_sweep(f.dets, f.corpus, SweepKind::Tau, "1,,2", base, {}), std::invalid_argument);
  EXPECT_THROW(run_sweep(f.dets, f.corpus, SweepKind::Tau, "abc", base, {}), std::invalid_argument);
  EXPECT_THROW(run_sweep(f.dets, f.corpus, SweepKind::Tau, "-1", base, {}), std::invalid_argument);
  EXPECT_THROW(run_sweep(f.dets, f.corpus, SweepKind::Nms, "1.5", base, {}), std::invalid_argument);
  EXPECT_THROW(run_sweep(f.dets, f.corpus, SweepKind::AnchorSet, "5,1,3", base, {}), std::invalid_argument);
  EXPECT_THROW(run_sweep(f.dets, f.corpus, SweepKind::Reduction, "median", base, {}), std::invalid_argument);
  EXPECT_THROW(parse_sweep_kind("lr"), std::invalid_argument);
}

TEST(MultiScaleStudy, ProducesOneCorrelationPerSetting) {
  MultiScaleStudyConfig cfg;
  cfg.corpus.videos = 5;
  const auto r = multi_scale_study(cfg, 1);
  EXPECT_EQ(r.single_scale.size(), 4u);
  EXPECT_GT(r.proposals, 0u);
  EXPECT_GE(r.multi_scale, -1.0);
  EXPECT_LE(r.multi_scale, 1.0);
}
