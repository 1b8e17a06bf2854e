#include <gtest/gtest.h>

#include <random>

#include "bbfnet/fusion.hpp"
#include "bbfnet/metrics.hpp"
#include "bbfnet/synth.hpp"
#include "oracles.hpp"
#include "suites.hpp"

using namespace bbf;

namespace {

// Scene of 3x3 squares on a grid, 30 px apart.
Scene tiny_squares(int per_row) {
  Scene s;
  s.catalog = ClassCatalog::sequential(1, 2);
  const int size = 30 * per_row;
  s.gt.ids = Image<std::uint32_t>(size, size);
  s.labels = ClassMap(size, size, 1, 1);
  std::uint32_t id = 0;
  for (int gy = 0; gy < per_row; ++gy)
    for (int gx = 0; gx < per_row; ++gx) {
      ++id;
      for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x) {
          s.gt.ids.at(gy * 30 + 10 + y, gx * 30 + 10 + x) = id;
          s.labels.at(gy * 30 + 10 + y, gx * 30 + 10 + x) = 2 + id % 2;
        }
    }
  return s;
}

SemanticPrediction uniform_sem(int h, int w, const ClassCatalog& cat, std::uint32_t cls, float p) {
  Image<float> probs(h, w, cat.num_classes(), 0.0f);
  const int ch = cat.channel_of(cls);
  for (std::size_t i = 0; i < probs.pixel_count(); ++i) {
    probs.at_index(i, ch) = p;
    probs.at_index(i, ch == 0 ? 1 : 0) = 1.0f - p;
  }
  return SemanticPrediction::from_probs(probs, cat);
}

InstanceCandidate candidate(std::vector<int> px, const ClassMap& labels) {
  return make_candidate(std::move(px), labels, labels.width(), CandidateSource::watershed);
}

}  // namespace

TEST(HeadSet, ParseAndName) {
  EXPECT_EQ(HeadSet::parse("W+H+T").name(), "W+H+T");
  EXPECT_EQ(HeadSet::parse("TW").name(), "W+T");
  EXPECT_EQ(HeadSet::parse("h").name(), "H");
  EXPECT_THROW(HeadSet::parse(""), std::invalid_argument);
  EXPECT_THROW(HeadSet::parse("WX"), std::invalid_argument);
}

TEST(ConfidenceFilter, Thresholds) {
  const auto cat = ClassCatalog::sequential(1, 1);
  const ClassMap labels(1, 4, 1, 2);
  const std::vector<int> px = {0, 1, 2, 3};
  EXPECT_EQ(confidence_filter({candidate(px, labels)}, uniform_sem(1, 4, cat, 2, 0.9f), cat).size(), 1u);
  EXPECT_EQ(confidence_filter({candidate(px, labels)}, uniform_sem(1, 4, cat, 2, 0.6f), cat).size(), 0u);

  // Mixed 0.6 / 0.7 averages to exactly 0.65.
  Image<float> probs(1, 4, 2, 0.0f);
  for (int i = 0; i < 4; ++i) {
    probs.at(0, i, 1) = i % 2 ? 0.7f : 0.6f;
    probs.at(0, i, 0) = 1.0f - probs.at(0, i, 1);
  }
  const auto sem = SemanticPrediction::from_probs(probs, cat);
  const auto c = candidate(px, labels);
  EXPECT_NEAR(mean_class_probability(c, sem, cat), 0.65, 1e-7);
  EXPECT_EQ(confidence_filter({c}, sem, cat).size(), 1u);
}

TEST(BboxIouFilter, Thresholds) {
  const ClassMap labels(20, 20, 1, 2);
  std::vector<int> rect, diag20, diag10;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 5; ++x) rect.push_back(y * 20 + x);
  for (int i = 0; i < 20; ++i) diag20.push_back(i * 20 + i);
  for (int i = 0; i < 10; ++i) diag10.push_back(i * 20 + i);
  std::vector<InstanceCandidate> dropped;
  const auto kept = bbox_iou_filter(
      {candidate(rect, labels), candidate(diag20, labels), candidate(diag10, labels)}, 0.1, &dropped);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].pixels, rect);
  EXPECT_EQ(kept[1].pixels, diag10);  // exactly 0.1 is kept
  ASSERT_EQ(dropped.size(), 1u);
  EXPECT_EQ(dropped[0].pixels, diag20);
}

TEST(Filters, Idempotent) {
  std::mt19937_64 rng(70);
  const auto cat = ClassCatalog::sequential(1, 1);
  std::uniform_real_distribution<float> u(0.5f, 1.0f);
  std::bernoulli_distribution on(0.2);
  const int h = 12, w = 12;
  Image<float> probs(h, w, 2);
  for (std::size_t i = 0; i < probs.pixel_count(); ++i) {
    probs.at_index(i, 1) = u(rng);
    probs.at_index(i, 0) = 1.0f - probs.at_index(i, 1);
  }
  const auto sem = SemanticPrediction::from_probs(probs, cat);
  std::vector<InstanceCandidate> cands;
  for (int k = 0; k < 30; ++k) {
    std::vector<int> px;
    for (int p = 0; p < h * w; ++p)
      if (on(rng)) px.push_back(p);
    if (!px.empty()) cands.push_back(candidate(px, sem.labels));
  }
  auto pixels = [](const std::vector<InstanceCandidate>& v) {
    std::vector<std::vector<int>> out;
    for (const auto& c : v) out.push_back(c.pixels);
    return out;
  };
  for (double t : {0.6, 0.75, 0.8}) {
    const auto once = confidence_filter(cands, sem, cat, t);
    EXPECT_EQ(pixels(confidence_filter(once, sem, cat, t)), pixels(once));
  }
  for (double t : {0.1, 0.2, 0.3}) {
    const auto once = bbox_iou_filter(cands, t);
    EXPECT_EQ(pixels(bbox_iou_filter(once, t)), pixels(once));
  }
}

TEST(Pipeline, EightInstanceSceneRecoveredExactly) {
  for (std::uint64_t seed = 500; seed < 505; ++seed) {
    auto spec = suites::exact_recovery_spec(seed);
    spec.min_instances = spec.max_instances = 8;
    const auto scene = generate_scene(spec);
    ASSERT_EQ(scene.gt.count(), 8u);
    const auto out = run_pipeline(ideal_heads(scene), OracleScorer(scene.gt), PipelineConfig{});
    const auto gt = scene.panoptic();
    EXPECT_TRUE(oracle::same_partition(out.result, gt)) << "seed " << seed;
    EXPECT_EQ(compute_pq(match_segments(out.result, gt), out.result, gt, scene.catalog).all.pq, 1.0);
    EXPECT_TRUE(out.trace.reconciles());
  }
}

TEST(Pipeline, TinySquaresRecoveredByHoughStage) {
  const auto scene = tiny_squares(4);
  const auto heads = ideal_heads(scene);
  const auto out = run_pipeline(heads, OracleScorer(scene.gt), PipelineConfig{});
  EXPECT_EQ(out.trace.watershed_candidates, 0);
  EXPECT_EQ(out.trace.hough_candidates, 16);
  EXPECT_EQ(out.trace.remaining_rounds, 0);
  EXPECT_TRUE(oracle::same_partition(out.result, scene.panoptic()));
}

TEST(Pipeline, WatershedOnlyMissesTinySquares) {
  const auto scene = tiny_squares(3);
  const auto out = ablation_pipeline(HeadSet::parse("W"), ideal_heads(scene, false),
                                     ConstantScorer(0.0), PipelineConfig{});
  EXPECT_EQ(out.trace.final_things, 0);
  for (const auto& s : out.result.segments) EXPECT_TRUE(scene.catalog.is_stuff(s.class_id));
}

TEST(Pipeline, HoughOnlyFindsSeparatedObjects) {
  Scene s;
  s.catalog = ClassCatalog::sequential(1, 1);
  s.gt.ids = Image<std::uint32_t>(100, 100);
  s.labels = ClassMap(100, 100, 1, 1);
  std::uint32_t id = 0;
  for (int gy = 0; gy < 3; ++gy)
    for (int gx = 0; gx < 3; ++gx) {
      ++id;
      for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 12; ++x) {
          s.gt.ids.at(5 + gy * 33 + y, 5 + gx * 33 + x) = id;
          s.labels.at(5 + gy * 33 + y, 5 + gx * 33 + x) = 2;
        }
    }
  const auto out = ablation_pipeline(HeadSet::parse("H"), ideal_heads(s, false), ConstantScorer(0.0),
                                     PipelineConfig{});
  EXPECT_EQ(out.trace.final_things, 9);
  EXPECT_TRUE(oracle::same_partition(out.result, s.panoptic()));
}

TEST(Pipeline, FragmentMergedByTripletHead) {
  const auto scene = suites::fragment_scene();
  const auto heads = ideal_heads(scene);
  const auto merged = run_pipeline(heads, OracleScorer(scene.gt), PipelineConfig{});
  EXPECT_EQ(suites::segments_of_class(merged.result, 3), 1);
  EXPECT_GE(merged.trace.center_rejected, 1);
  EXPECT_TRUE(oracle::same_partition(merged.result, scene.panoptic()));

  const auto split = run_pipeline(heads, ConstantScorer(0.0), PipelineConfig{});
  EXPECT_EQ(suites::segments_of_class(split.result, 3), 2);
}

TEST(Pipeline, OutputPartitionAndTraceOnNoisyScenes) {
  for (std::uint64_t seed = 60; seed < 66; ++seed) {
    const auto scene = generate_scene(suites::reference_spec(seed));
    NoiseSpec noise = suites::reference_noise(seed);
    noise.prob_temperature = 0.5;
    noise.sigma_jitter = 0.2;
    noise.embedding_sigma = 0.2;
    const auto heads = perturb(ideal_heads(scene), noise);
    PipelineConfig cfg;
    cfg.scorer = parse_scorer("distance(0.5)");
    for (const char* hs : {"W", "H", "T", "WT", "WH", "HT", "WHT"}) {
      const auto out = ablation_pipeline(HeadSet::parse(hs), heads, DistanceScorer(0.5), cfg);
      EXPECT_NO_THROW(validate_panoptic(out.result)) << hs;
      EXPECT_TRUE(out.trace.reconciles()) << hs;
      // Thing ids are dense and come first.
      std::uint32_t expect = 1;
      for (const auto& s : out.result.segments)
        if (scene.catalog.is_thing(s.class_id)) EXPECT_EQ(s.id, expect++) << hs;
      EXPECT_EQ(static_cast<int>(expect - 1), out.trace.final_things);
      // Stuff pixels come verbatim from the semantic argmax.
      for (std::size_t p = 0; p < heads.sem.labels.pixel_count(); ++p) {
        if (scene.catalog.is_stuff(heads.sem.labels[p])) {
          ASSERT_EQ(out.result.labels[p], heads.sem.labels[p]);
        }
      }
      const auto again = ablation_pipeline(HeadSet::parse(hs), heads, DistanceScorer(0.5), cfg);
      EXPECT_EQ(again.result, out.result) << hs;
      EXPECT_EQ(again.trace.to_json(), out.trace.to_json()) << hs;
    }
  }
}

TEST(Pipeline, WatershedPixelsNeverReassigned) {
  // With W+H+T, every watershed candidate kept by the center filter must stay
  // inside one output segment.
  const auto scene = generate_scene(suites::reference_spec(77));
  const auto heads = perturb(ideal_heads(scene), suites::reference_noise(77));
  const OracleScorer scorer(scene.gt);
  const auto out = run_pipeline(heads, scorer, PipelineConfig{});
  const auto centers = predict_centers(heads.hough, heads.sem, scene.catalog);
  const auto kept =
      filter_by_center(extract_candidates(heads.wtr, heads.sem, scene.catalog), centers, heads.sem,
                       scene.catalog)
          .kept;
  for (const auto& c : kept) {
    const auto id = out.result.ids[c.pixels.front()];
    if (id == 0) continue;  // dropped by a final filter
    for (int p : c.pixels) EXPECT_EQ(out.result.ids[p], id);
  }
}

TEST(Pipeline, RejectsMismatchedInputs) {
  const auto scene = generate_scene(suites::reference_spec(3));
  auto heads = ideal_heads(scene, false);
  heads.wtr = WatershedPrediction::one_hot(LevelMap(10, 10));
  EXPECT_THROW(run_pipeline(heads, ConstantScorer(0), PipelineConfig{}), std::invalid_argument);
  PipelineConfig bad;
  bad.bandwidth_B = -1;
  EXPECT_THROW(run_pipeline(ideal_heads(scene, false), ConstantScorer(0), bad), ConfigError);
}
