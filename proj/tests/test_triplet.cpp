#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "bbfnet/synth.hpp"
#include "bbfnet/triplet.hpp"

using namespace bbf;

namespace {

// Two separated same-class rectangles on a stuff background.
Scene two_boxes() {
  Scene s;
  s.catalog = ClassCatalog::sequential(1, 1);
  s.gt.ids = Image<std::uint32_t>(16, 24);
  s.labels = ClassMap(16, 24, 1, 1);
  for (int y = 2; y < 8; ++y)
    for (int x = 2; x < 8; ++x) {
      s.gt.ids.at(y, x) = 1;
      s.labels.at(y, x) = 2;
    }
  for (int y = 6; y < 14; ++y)
    for (int x = 12; x < 22; ++x) {
      s.gt.ids.at(y, x) = 2;
      s.labels.at(y, x) = 2;
    }
  return s;
}

std::vector<int> pixels_of(const InstanceMap& m, std::uint32_t id) {
  std::vector<int> out;
  for (std::size_t p = 0; p < m.ids.pixel_count(); ++p)
    if (m.ids[p] == id) out.push_back(static_cast<int>(p));
  return out;
}

}  // namespace

TEST(Features, LayoutAndSpotCheck) {
  const auto s = two_boxes();
  auto heads = ideal_heads(s);
  heads.hough.sigma_x.at(3, 4, 0) = 1.5f;
  const auto f = assemble_features(&*heads.embedding, heads.sem, heads.wtr, heads.hough, s.catalog);
  EXPECT_EQ(feature_layout::kLength, 139);
  const int p = 3 * 24 + 4;
  const auto v = f.at(p);
  for (int i = 0; i < 128; ++i) EXPECT_EQ(v.values[i], (*heads.embedding).at_index(p, i));
  EXPECT_FLOAT_EQ(v.x(), static_cast<float>(normalize_x(4, 24)));
  EXPECT_FLOAT_EQ(v.y(), static_cast<float>(normalize_y(3, 16)));
  EXPECT_EQ(v.values[feature_layout::kSemProb], 1.0f);
  for (int k = 0; k < 4; ++k)
    EXPECT_EQ(v.values[feature_layout::kWatershed + k], heads.wtr.probs.at_index(p, k));
  EXPECT_EQ(v.values[feature_layout::kHough + 0], heads.hough.x_off.at_index(p, 0));
  EXPECT_EQ(v.values[feature_layout::kHough + 1], heads.hough.y_off.at_index(p, 0));
  EXPECT_EQ(v.values[feature_layout::kHough + 2], 1.5f);
  EXPECT_EQ(v.values[feature_layout::kHough + 3], 1.0f);

  const auto full = f.materialize();
  EXPECT_EQ(full.channels(), 139);
  for (int i = 0; i < 139; ++i) EXPECT_EQ(full.at_index(p, i), v.values[i]);
}

TEST(Features, ZeroEmbeddingDiffersOnlyOutsideEmbedding) {
  const auto s = two_boxes();
  const auto heads = ideal_heads(s, false);
  const auto f = assemble_features(nullptr, heads.sem, heads.wtr, heads.hough, s.catalog);
  const auto a = f.at(3 * 24 + 3), b = f.at(10 * 24 + 15);
  for (int i = 0; i < 128; ++i) {
    EXPECT_EQ(a.values[i], 0.0f);
    EXPECT_EQ(b.values[i], 0.0f);
  }
  EXPECT_NE(a.x(), b.x());
}

TEST(Features, ShapeMismatchThrows) {
  const auto s = two_boxes();
  const auto heads = ideal_heads(s, false);
  Image<float> bad(16, 24, 64);
  EXPECT_THROW(assemble_features(&bad, heads.sem, heads.wtr, heads.hough, s.catalog),
               std::invalid_argument);
  Image<float> small(8, 24, 128);
  EXPECT_THROW(assemble_features(&small, heads.sem, heads.wtr, heads.hough, s.catalog),
               std::invalid_argument);
}

TEST(Scorers, OracleAndDistance) {
  const auto s = two_boxes();
  const auto heads = ideal_heads(s);
  const auto f = assemble_features(&*heads.embedding, heads.sem, heads.wtr, heads.hough, s.catalog);
  const OracleScorer oracle(s.gt);
  const int a = 2 * 24 + 2, b = 7 * 24 + 7, c = 10 * 24 + 15;
  EXPECT_EQ(oracle.score(f.at(a), f.at(b)), 1.0);
  EXPECT_EQ(oracle.score(f.at(a), f.at(c)), 0.0);

  const DistanceScorer d(0.5);
  EXPECT_GT(d.score_distance(0.0), 0.999);
  EXPECT_NEAR(d.score_distance(0.5), 0.5, 1e-15);
  EXPECT_LT(d.score_distance(1.0), 0.001);
  EXPECT_GT(d.score(f.at(a), f.at(b)), 0.999);
  // Ideal embeddings differ by one unit per id.
  EXPECT_LT(d.score(f.at(a), f.at(c)), 0.001);
  EXPECT_THROW(DistanceScorer(0.0), std::invalid_argument);

  // Batched scoring agrees with pairwise scoring.
  const std::vector<int> others = {a, b, c, 0};
  std::vector<double> got(4), got_d(4);
  oracle.score_against(f, a, others, got);
  d.score_against(f, a, others, got_d);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(got[i], oracle.score(f.at(a), f.at(others[i])));
    EXPECT_EQ(got_d[i], d.score(f.at(a), f.at(others[i])));
  }
}

TEST(Scorers, SelfSimilarity) {
  const auto s = two_boxes();
  const auto heads = ideal_heads(s);
  const auto f = assemble_features(&*heads.embedding, heads.sem, heads.wtr, heads.hough, s.catalog);
  const OracleScorer oracle(s.gt);
  const DistanceScorer d(0.3);
  for (int p = 0; p < 16 * 24; p += 7) {
    if (s.gt.ids[p] != 0) {
      EXPECT_GE(oracle.score(f.at(p), f.at(p)), 0.5);
    }
    EXPECT_GE(d.score(f.at(p), f.at(p)), 0.5);
  }
}

TEST(Refine, MergesPoolPixelsOfSameInstance) {
  const auto s = two_boxes();
  const auto heads = ideal_heads(s);
  const auto f = assemble_features(&*heads.embedding, heads.sem, heads.wtr, heads.hough, s.catalog);
  const auto inst1 = pixels_of(s.gt, 1), inst2 = pixels_of(s.gt, 2);
  // Kept candidate: the left half of instance 2. Pool: its right half plus
  // all of instance 1.
  std::vector<int> kept_px, pool;
  for (int p : inst2) (p % 24 < 17 ? kept_px : pool).push_back(p);
  pool.insert(pool.end(), inst1.begin(), inst1.end());
  std::sort(pool.begin(), pool.end());
  std::vector<InstanceCandidate> kept = {make_candidate(kept_px, s.labels, 24, CandidateSource::watershed)};

  auto pool_copy = pool;
  const auto none = refine_candidates(kept, pool_copy, f, ConstantScorer(0.0), nullptr);
  EXPECT_EQ(none[0].pixels, kept_px);
  EXPECT_EQ(pool_copy, pool);

  const auto merged = refine_candidates(kept, pool, f, OracleScorer(s.gt), nullptr);
  EXPECT_EQ(merged[0].pixels, inst2);
  EXPECT_EQ(pool, inst1);
}

TEST(Refine, TieGoesToEarlierCandidate) {
  const auto s = two_boxes();
  const auto heads = ideal_heads(s);
  const auto f = assemble_features(&*heads.embedding, heads.sem, heads.wtr, heads.hough, s.catalog);
  const auto inst1 = pixels_of(s.gt, 1), inst2 = pixels_of(s.gt, 2);
  std::vector<InstanceCandidate> kept = {
      make_candidate({inst1.front()}, s.labels, 24, CandidateSource::watershed),
      make_candidate({inst2.front()}, s.labels, 24, CandidateSource::watershed)};
  std::vector<int> pool = {inst1.back(), inst2.back()};
  const auto out = refine_candidates(kept, pool, f, ConstantScorer(1.0), nullptr);
  EXPECT_EQ(out[0].pixels.size(), 3u);
  EXPECT_EQ(out[1].pixels.size(), 1u);
  EXPECT_TRUE(pool.empty());
}

TEST(Discover, EmptyPool) {
  const auto s = two_boxes();
  const auto heads = ideal_heads(s);
  const auto f = assemble_features(&*heads.embedding, heads.sem, heads.wtr, heads.hough, s.catalog);
  const auto r = discover_remaining({}, f, nullptr, OracleScorer(s.gt), 1);
  EXPECT_TRUE(r.kept.empty());
  EXPECT_EQ(r.rounds, 0);
}

TEST(Discover, OracleFindsBothInstancesForAnySeed) {
  const auto s = two_boxes();
  const auto heads = ideal_heads(s);
  const auto f = assemble_features(&*heads.embedding, heads.sem, heads.wtr, heads.hough, s.catalog);
  const auto centers = predict_centers(heads.hough, heads.sem, s.catalog);
  auto pool = pixels_of(s.gt, 1);
  const auto two = pixels_of(s.gt, 2);
  pool.insert(pool.end(), two.begin(), two.end());
  std::sort(pool.begin(), pool.end());
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = discover_remaining(pool, f, &centers, OracleScorer(s.gt), seed);
    ASSERT_EQ(r.kept.size(), 2u);
    EXPECT_EQ(r.rounds, 2);
    std::set<std::vector<int>> got = {r.kept[0].pixels, r.kept[1].pixels};
    std::set<std::vector<int>> expect = {pixels_of(s.gt, 1), two};
    EXPECT_EQ(got, expect);
    for (const auto& k : r.kept) EXPECT_EQ(k.source, CandidateSource::remaining);
  }
}

TEST(Discover, ZeroScorerGivesSingletons) {
  // A 5x5 instance: only the middle pixel holds its own center.
  Scene s;
  s.catalog = ClassCatalog::sequential(1, 1);
  s.gt.ids = Image<std::uint32_t>(9, 9);
  s.labels = ClassMap(9, 9, 1, 1);
  for (int y = 2; y < 7; ++y)
    for (int x = 2; x < 7; ++x) {
      s.gt.ids.at(y, x) = 1;
      s.labels.at(y, x) = 2;
    }
  const auto heads = ideal_heads(s);
  const auto f = assemble_features(&*heads.embedding, heads.sem, heads.wtr, heads.hough, s.catalog);
  const auto centers = predict_centers(heads.hough, heads.sem, s.catalog);
  const auto pool = pixels_of(s.gt, 1);
  const auto r = discover_remaining(pool, f, &centers, ConstantScorer(0.0), 4);
  EXPECT_EQ(r.rounds, 25);
  ASSERT_EQ(r.kept.size(), 1u);
  EXPECT_EQ(r.kept[0].pixels, (std::vector<int>{4 * 9 + 4}));
  EXPECT_EQ(r.rejected.size(), 24u);
  for (const auto& k : r.rejected) EXPECT_EQ(k.pixels.size(), 1u);
}

TEST(Discover, PartitionsTheConsumedPool) {
  SceneSpec spec;
  spec.seed = 9;
  const auto scene = generate_scene(spec);
  auto heads = perturb(ideal_heads(scene), NoiseSpec{0, 0, 0, 0.02, 0, 0.3, 5});
  const auto f = assemble_features(&*heads.embedding, heads.sem, heads.wtr, heads.hough, scene.catalog);
  const auto centers = predict_centers(heads.hough, heads.sem, scene.catalog);
  std::vector<int> pool;
  for (std::size_t p = 0; p < heads.sem.labels.pixel_count(); ++p)
    if (scene.catalog.is_thing(heads.sem.labels[p])) pool.push_back(static_cast<int>(p));
  const auto r = discover_remaining(pool, f, &centers, DistanceScorer(0.5), 11);
  EXPECT_LE(r.rounds, static_cast<int>(pool.size()));
  std::vector<int> seen;
  for (const auto* list : {&r.kept, &r.rejected})
    for (const auto& k : *list) seen.insert(seen.end(), k.pixels.begin(), k.pixels.end());
  std::sort(seen.begin(), seen.end());
  EXPECT_EQ(seen, pool);
  const auto again = discover_remaining(pool, f, &centers, DistanceScorer(0.5), 11);
  ASSERT_EQ(again.kept.size(), r.kept.size());
  for (std::size_t i = 0; i < r.kept.size(); ++i) EXPECT_EQ(again.kept[i].pixels, r.kept[i].pixels);
}

TEST(Anchor, NearestMemberToWeightedCenter) {
  const auto s = two_boxes();
  const auto heads = ideal_heads(s, false);
  const auto centers = predict_centers(heads.hough, heads.sem, s.catalog);
  const auto px = pixels_of(s.gt, 2);  // x 12..21, y 6..13: centroid (16.5, 9.5)
  const auto c = make_candidate(px, s.labels, 24, CandidateSource::watershed);
  const int a = candidate_anchor(c, &centers, heads.sem, s.catalog);
  EXPECT_EQ(a, 9 * 24 + 16);  // four pixels tie; the lowest index wins
  EXPECT_EQ(candidate_anchor(c, nullptr, heads.sem, s.catalog), 9 * 24 + 16);
}
