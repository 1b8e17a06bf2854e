#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "bbfnet/config.hpp"
#include "bbfnet/panoptic_io.hpp"
#include "bbfnet/targets.hpp"
#include "bbfnet/tensor_io.hpp"
#include "oracles.hpp"

using namespace bbf;

namespace {

Tensor roundtrip(const Tensor& t) {
  std::stringstream buf;
  write_tensor(buf, t);
  return read_tensor(buf);
}

std::string bytes_of(const Tensor& t) {
  std::stringstream buf;
  write_tensor(buf, t);
  return buf.str();
}

TensorErrc error_of(const std::string& bytes) {
  std::stringstream buf(bytes);
  try {
    read_tensor(buf);
  } catch (const TensorError& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return TensorErrc::io;
}

InstanceMap square_instance(int size, int image, int x0, int y0) {
  InstanceMap m{Image<std::uint32_t>(image, image)};
  for (int y = y0; y < y0 + size; ++y)
    for (int x = x0; x < x0 + size; ++x) m.ids.at(y, x) = 1;
  return m;
}

}  // namespace

TEST(TensorIo, ZerosRoundTrip) {
  Tensor t;
  t.dims = {2, 3};
  t.data = std::vector<float>(6, 0.0f);
  EXPECT_EQ(roundtrip(t), t);
}

TEST(TensorIo, RandomRoundTripAllTypesAndRanks) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::uint32_t> dim(1, 5);
  for (int trial = 0; trial < 60; ++trial) {
    Tensor t;
    const int rank = 1 + trial % 3;
    std::size_t n = 1;
    for (int r = 0; r < rank; ++r) {
      t.dims.push_back(dim(rng));
      n *= t.dims.back();
    }
    switch (trial % 3) {
      case 0: {
        std::vector<float> v(n);
        std::normal_distribution<float> g;
        for (auto& x : v) x = g(rng);
        t.data = v;
        break;
      }
      case 1: {
        std::vector<std::uint32_t> v(n);
        for (auto& x : v) x = static_cast<std::uint32_t>(rng());
        t.data = v;
        break;
      }
      default: {
        std::vector<std::uint8_t> v(n);
        for (auto& x : v) x = static_cast<std::uint8_t>(rng());
        t.data = v;
      }
    }
    EXPECT_EQ(roundtrip(t), t);
  }
}

TEST(TensorIo, HeaderLayout) {
  Tensor t;
  t.dims = {1, 2};
  t.data = std::vector<std::uint8_t>{7, 9};
  const auto b = bytes_of(t);
  ASSERT_EQ(b.size(), 4u + 2 + 1 + 1 + 8 + 2);
  EXPECT_EQ(b.substr(0, 4), "BBFT");
  EXPECT_EQ(b[4], 1);
  EXPECT_EQ(b[5], 0);
  EXPECT_EQ(b[6], 2);  // u8
  EXPECT_EQ(b[7], 2);  // rank
  EXPECT_EQ(b[8], 1);
  EXPECT_EQ(b[12], 2);
  EXPECT_EQ(b[16], 7);
  EXPECT_EQ(b[17], 9);
}

TEST(TensorIo, DistinctErrors) {
  Tensor t;
  t.dims = {4, 4};
  t.data = std::vector<float>(16, 1.0f);
  auto good = bytes_of(t);

  auto bad_magic = good;
  bad_magic.replace(0, 4, "XXXX");
  EXPECT_EQ(error_of(bad_magic), TensorErrc::bad_magic);

  // 4x4 f32 needs 64 payload bytes; keep 32.
  EXPECT_EQ(error_of(good.substr(0, good.size() - 32)), TensorErrc::truncated);

  auto bad_dtype = good;
  bad_dtype[6] = 9;
  EXPECT_EQ(error_of(bad_dtype), TensorErrc::unsupported_dtype);

  auto bad_version = good;
  bad_version[4] = 3;
  EXPECT_EQ(error_of(bad_version), TensorErrc::unsupported_version);
}

TEST(TensorIo, ImageConversion) {
  Image<float> img(2, 3, 4);
  for (std::size_t i = 0; i < img.values().size(); ++i) img.values()[i] = static_cast<float>(i);
  EXPECT_EQ(to_image<float>(to_tensor(img)), img);
  EXPECT_THROW(to_image<std::uint32_t>(to_tensor(img)), TensorError);
}

TEST(Panoptic, AllVoidEncodesBlack) {
  const auto cat = ClassCatalog::sequential(1, 1);
  ClassMap labels(4, 4);
  InstanceMap inst{Image<std::uint32_t>(4, 4)};
  const auto r = make_panoptic(labels, inst, cat);
  const auto enc = encode_panoptic(r);
  for (auto v : enc.rgb.values()) EXPECT_EQ(v, 0);
  EXPECT_TRUE(enc.info["segments"].empty());
}

TEST(Panoptic, Id258IsColor012) {
  PanopticResult r;
  r.labels = ClassMap(2, 2, 1, 2);
  r.ids = Image<std::uint32_t>(2, 2, 1, 258);
  r.segments = {{258, 2, 4, 1.0}};
  const auto enc = encode_panoptic(r);
  for (std::size_t p = 0; p < 4; ++p) {
    EXPECT_EQ(enc.rgb.at_index(p, 0), 0);
    EXPECT_EQ(enc.rgb.at_index(p, 1), 1);
    EXPECT_EQ(enc.rgb.at_index(p, 2), 2);
  }
  EXPECT_EQ(decode_panoptic(enc), r);
}

TEST(Panoptic, IdOverflowRejected) {
  PanopticResult r;
  r.labels = ClassMap(1, 1, 1, 2);
  r.ids = Image<std::uint32_t>(1, 1, 1, kMaxSegmentId + 1);
  r.segments = {{kMaxSegmentId + 1, 2, 1, 1.0}};
  EXPECT_THROW(encode_panoptic(r), PanopticFormatError);
}

TEST(Panoptic, RandomEncodeDecodeIdentity) {
  std::mt19937_64 rng(11);
  const auto cat = ClassCatalog::sequential(2, 3);
  for (int i = 0; i < 50; ++i) {
    const auto r = oracle::random_panoptic(rng, 8, 8, cat, 6);
    validate_panoptic(r);
    EXPECT_EQ(decode_panoptic(encode_panoptic(r)), r);
  }
}

TEST(Panoptic, FileRoundTrip) {
  std::mt19937_64 rng(12);
  const auto cat = ClassCatalog::sequential(2, 2);
  const auto r = oracle::random_panoptic(rng, 9, 7, cat, 5);
  const auto dir = std::filesystem::temp_directory_path() / "bbfnet_panoptic_rt";
  std::filesystem::create_directories(dir);
  write_panoptic(dir, r);
  EXPECT_EQ(read_panoptic(dir), r);
  std::filesystem::remove_all(dir);
}

TEST(Panoptic, AreasAndVoidCoverImage) {
  std::mt19937_64 rng(13);
  const auto cat = ClassCatalog::sequential(2, 2);
  for (int i = 0; i < 20; ++i) {
    const auto r = oracle::random_panoptic(rng, 10, 12, cat, 5);
    std::int64_t total = 0, voids = 0;
    for (const auto& s : r.segments) total += s.area;
    for (auto v : r.ids.values()) voids += v == 0;
    EXPECT_EQ(total + voids, 120);
  }
}

TEST(Catalog, SequentialIds) {
  const auto cat = ClassCatalog::sequential(2, 3);
  EXPECT_EQ(cat.stuff_classes(), (std::vector<std::uint32_t>{1, 2}));
  EXPECT_EQ(cat.thing_classes(), (std::vector<std::uint32_t>{3, 4, 5}));
  EXPECT_EQ(cat.channel_of(4), 3);
  EXPECT_EQ(cat.thing_index(4), 1);
  EXPECT_FALSE(cat.contains(kVoidClass));
  EXPECT_THROW(ClassCatalog({1, 2}, {2}), std::invalid_argument);
  EXPECT_THROW(ClassCatalog({1}, {}), std::invalid_argument);
  EXPECT_THROW(ClassCatalog({0}, {1}), std::invalid_argument);
}

TEST(Maps, SemanticArgmaxTiesToLowestId) {
  const auto cat = ClassCatalog::sequential(1, 2);
  Image<float> p(1, 2, 3);
  p.at(0, 0, 0) = 0.2f;
  p.at(0, 0, 1) = 0.4f;
  p.at(0, 0, 2) = 0.4f;
  p.at(0, 1, 2) = 1.0f;
  const auto sem = SemanticPrediction::from_probs(p, cat);
  EXPECT_EQ(sem.labels[0], 2u);
  EXPECT_EQ(sem.labels[1], 3u);
}

TEST(Maps, SemanticProbabilitiesMustSumToOne) {
  const auto cat = ClassCatalog::sequential(1, 1);
  Image<float> p(1, 1, 2);
  p.at(0, 0, 0) = 0.5f;
  p.at(0, 0, 1) = 0.4f;
  EXPECT_THROW(SemanticPrediction::from_probs(p, cat), std::invalid_argument);
}

TEST(Maps, HoughValidateRejectsOutOfRange) {
  HoughPrediction h;
  h.x_off = Image<float>(2, 2, 1, 0.0f);
  h.y_off = Image<float>(2, 2, 1, 0.0f);
  h.sigma_x = Image<float>(2, 2, 1, 1.0f);
  h.sigma_y = Image<float>(2, 2, 1, 1.0f);
  EXPECT_NO_THROW(h.validate());
  h.x_off[0] = 1.0f;
  EXPECT_THROW(h.validate(), std::invalid_argument);
  h.x_off[0] = 0.0f;
  h.sigma_y[3] = 0.0f;
  EXPECT_THROW(h.validate(), std::invalid_argument);
}

TEST(Config, ParsesKeyValues) {
  const auto kv = KeyValues::parse("# comment\nbandwidth_B = 5   # trailing\nscorer=distance(0.25)\n");
  const auto c = PipelineConfig::from(kv);
  EXPECT_DOUBLE_EQ(c.bandwidth_B, 5.0);
  EXPECT_EQ(c.scorer.kind, ScorerChoice::Kind::distance);
  EXPECT_DOUBLE_EQ(c.scorer.tau, 0.25);
  EXPECT_DOUBLE_EQ(c.conf_threshold, 0.65);
  EXPECT_DOUBLE_EQ(c.bbox_iou_threshold, 0.1);
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(KeyValues::parse("novalue\n"), ConfigError);
  EXPECT_THROW(PipelineConfig::from(KeyValues::parse("bandwidth = 3")), ConfigError);
  EXPECT_THROW(PipelineConfig::from(KeyValues::parse("bandwidth_B = 0")), ConfigError);
  EXPECT_THROW(PipelineConfig::from(KeyValues::parse("conf_threshold = 1.5")), ConfigError);
  EXPECT_THROW(PipelineConfig::from(KeyValues::parse("bandwidth_B = ten")), ConfigError);
  EXPECT_THROW(LossConfig::from(KeyValues::parse("w2 = -1")), ConfigError);
}

TEST(Config, LossDefaults) {
  const LossConfig c;
  EXPECT_EQ(c.alphas, (std::array<double, 4>{1.0, 0.1, 1.0, 0.5}));
  EXPECT_EQ(c.watershed_weights, (std::array<double, 4>{0.2, 0.1, 0.05, 0.01}));
  EXPECT_EQ(c.anchors_per_object, 1000);
}

TEST(WatershedTargets, EmptyMapIsLevelZero) {
  InstanceMap m{Image<std::uint32_t>(6, 6)};
  const auto lv = derive_watershed_targets(m);
  for (auto v : lv.values()) EXPECT_EQ(v, 0);
}

TEST(WatershedTargets, SevenSquareInElevenImage) {
  const auto m = square_instance(7, 11, 2, 2);
  const auto lv = derive_watershed_targets(m);
  const auto d = oracle::boundary_distance(m);
  int k0 = 0, k1 = 0;
  for (std::size_t p = 0; p < lv.pixel_count(); ++p) {
    if (m.ids[p] == 0) continue;
    EXPECT_EQ(lv[p], oracle::level_of(d[p]));
    k0 += lv[p] == 0;
    k1 += lv[p] == 1;
  }
  EXPECT_EQ(k0, 40);
  EXPECT_EQ(k1, 9);
}

TEST(WatershedTargets, LargeSquareCenterIsLevelThree) {
  const auto m = square_instance(41, 45, 2, 2);
  const auto lv = derive_watershed_targets(m);
  EXPECT_EQ(lv.at(22, 22), 3);
  const auto d = oracle::boundary_distance(m);
  EXPECT_DOUBLE_EQ(d.at(22, 22), 21.0);  // 20 pixels to the ring, one more to outside
}

TEST(WatershedTargets, MatchesBruteForceOnRandomMaps) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const int h = 8 + trial % 9, w = 10 + trial % 7;
    Image<std::uint32_t> ids(h, w);
    std::uniform_int_distribution<int> ux(0, w - 1), uy(0, h - 1);
    for (std::uint32_t id = 1; id <= 3; ++id) {
      int x0 = ux(rng), x1 = ux(rng), y0 = uy(rng), y1 = uy(rng);
      if (x0 > x1) std::swap(x0, x1);
      if (y0 > y1) std::swap(y0, y1);
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) ids.at(y, x) = id;
    }
    // Densify after overpainting.
    std::map<std::uint32_t, std::uint32_t> dense;
    for (auto& v : ids.values())
      if (v) v = dense.emplace(v, static_cast<std::uint32_t>(dense.size() + 1)).first->second;
    InstanceMap m{ids};
    const auto lv = derive_watershed_targets(m);
    const auto d = oracle::boundary_distance(m);
    for (std::size_t p = 0; p < lv.pixel_count(); ++p)
      ASSERT_EQ(lv[p], m.ids[p] ? oracle::level_of(d[p]) : 0) << "trial " << trial << " pixel " << p;
  }
}

TEST(WatershedTargets, TranslationInvariantAwayFromBorder) {
  const auto a = square_instance(12, 40, 5, 6);
  const auto b = square_instance(12, 40, 17, 20);
  const auto la = derive_watershed_targets(a), lb = derive_watershed_targets(b);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 12; ++x) EXPECT_EQ(la.at(6 + y, 5 + x), lb.at(20 + y, 17 + x));
}

TEST(DistanceTransform, MatchesBruteForce) {
  std::mt19937_64 rng(3);
  std::bernoulli_distribution on(0.1);
  Image<std::uint8_t> f(13, 17);
  for (auto& v : f.values()) v = on(rng);
  f[0] = 1;
  const auto d2 = squared_distance_transform(f);
  for (int y = 0; y < 13; ++y)
    for (int x = 0; x < 17; ++x) {
      double best = 1e18;
      for (int v = 0; v < 13; ++v)
        for (int u = 0; u < 17; ++u)
          if (f.at(v, u)) best = std::min(best, double((u - x) * (u - x) + (v - y) * (v - y)));
      EXPECT_DOUBLE_EQ(d2.at(y, x), best);
    }
}

TEST(HoughTargets, SinglePixelPointsAtItself) {
  const auto cat = ClassCatalog::sequential(0, 1);
  InstanceMap m{Image<std::uint32_t>(5, 5)};
  m.ids.at(2, 3) = 1;
  ClassMap labels(5, 5);
  labels.at(2, 3) = 1;
  const auto t = derive_hough_targets(m, labels, cat);
  EXPECT_EQ(t.channel.at(2, 3), 0);
  EXPECT_DOUBLE_EQ(t.x_off.at(2, 3), 0.0);
  EXPECT_DOUBLE_EQ(t.y_off.at(2, 3), 0.0);
  EXPECT_EQ(t.channel.at(0, 0), -1);
}

TEST(HoughTargets, ThreePixelRow) {
  const auto cat = ClassCatalog::sequential(0, 1);
  InstanceMap m{Image<std::uint32_t>(1, 10)};
  ClassMap labels(1, 10);
  for (int x = 4; x <= 6; ++x) {
    m.ids.at(0, x) = 1;
    labels.at(0, x) = 1;
  }
  const auto t = derive_hough_targets(m, labels, cat);
  EXPECT_NEAR(t.x_off.at(0, 4), 0.1, 1e-12);
  EXPECT_NEAR(t.x_off.at(0, 5), 0.0, 1e-12);
  EXPECT_NEAR(t.x_off.at(0, 6), -0.1, 1e-12);
  for (int x = 4; x <= 6; ++x) EXPECT_DOUBLE_EQ(t.y_off.at(0, x), 0.0);
}

TEST(HoughTargets, LShapePointsToCentroidOutsideMask) {
  const auto cat = ClassCatalog::sequential(1, 2);
  const int h = 12, w = 12;
  InstanceMap m{Image<std::uint32_t>(h, w)};
  ClassMap labels(h, w, 1, 1);
  for (int y = 1; y <= 10; ++y) m.ids.at(y, 1) = 1;
  for (int x = 1; x <= 10; ++x) m.ids.at(10, x) = 1;
  double cx = 0, cy = 0, n = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (m.ids.at(y, x)) {
        labels.at(y, x) = 3;
        cx += x;
        cy += y;
        ++n;
      }
  cx /= n;
  cy /= n;
  EXPECT_EQ(m.ids.at(static_cast<int>(std::round(cy)), static_cast<int>(std::round(cx))), 0u);
  const auto t = derive_hough_targets(m, labels, cat);
  double mx = 0, my = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!m.ids.at(y, x)) continue;
      EXPECT_EQ(t.channel.at(y, x), 1);
      // Applying the offset recovers the centroid.
      EXPECT_NEAR(normalize_x(x, w) + t.x_off.at(y, x), normalize_x(cx, w), 1e-6);
      EXPECT_NEAR(normalize_y(y, h) + t.y_off.at(y, x), normalize_y(cy, h), 1e-6);
      mx += t.x_off.at(y, x);
      my += t.y_off.at(y, x);
    }
  EXPECT_NEAR(mx / n, 0.0, 1e-6);
  EXPECT_NEAR(my / n, 0.0, 1e-6);
}
