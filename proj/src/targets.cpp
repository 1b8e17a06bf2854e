#include "bbfnet/targets.hpp"

#include <limits>
#include <stdexcept>
#include <vector>

namespace bbf {

namespace {

constexpr double kFar = 1e20;

// One-dimensional squared distance transform of a sampled function.
void edt_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
  v.resize(n);
  z.resize(n + 1);
  auto intersect = [&](int q, int r) {
    return ((f[q] + double(q) * q) - (f[r] + double(r) * r)) / (2.0 * q - 2.0 * r);
  };
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s = intersect(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

Image<double> squared_distance_transform(const Image<std::uint8_t>& feature) {
  const int h = feature.height();
  const int w = feature.width();
  Image<double> out(h, w);
  if (h == 0 || w == 0) return out;
  for (std::size_t p = 0; p < feature.pixel_count(); ++p) out[p] = feature[p] ? 0.0 : kFar;

  std::vector<double> f(std::max(h, w)), d(std::max(h, w));
  std::vector<int> v;
  std::vector<double> z;
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = out.at(y, x);
    edt_1d(f.data(), d.data(), h, v, z);
    for (int y = 0; y < h; ++y) out.at(y, x) = d[y];
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[x] = out.at(y, x);
    edt_1d(f.data(), d.data(), w, v, z);
    for (int x = 0; x < w; ++x) out.at(y, x) = std::min(d[x], kFar);
  }
  return out;
}

LevelMap derive_watershed_targets(const InstanceMap& gt, const WatershedThresholds& thresholds) {
  const auto& b = thresholds.bounds;
  if (!(b[0] < b[1] && b[1] < b[2])) throw std::invalid_argument("thresholds must increase");
  const int h = gt.ids.height();
  const int w = gt.ids.width();
  LevelMap levels(h, w, 1, 0);
  const std::uint32_t n = gt.count();
  if (n == 0) return levels;

  std::vector<BBox> boxes(n + 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (auto id = gt.ids.at(y, x)) boxes[id].include(x, y);

  std::array<double, 3> sq;
  for (int i = 0; i < 3; ++i) sq[i] = b[i] * b[i];

  // The nearest outside pixel always lies within the instance bbox grown by
  // one ring, and that ring is entirely outside the instance.
  for (std::uint32_t id = 1; id <= n; ++id) {
    const BBox& box = boxes[id];
    if (!box.valid()) continue;
    const int cw = box.x_max - box.x_min + 3;
    const int ch = box.y_max - box.y_min + 3;
    Image<std::uint8_t> outside(ch, cw, 1, 1);
    for (int y = box.y_min; y <= box.y_max; ++y)
      for (int x = box.x_min; x <= box.x_max; ++x)
        if (gt.ids.at(y, x) == id) outside.at(y - box.y_min + 1, x - box.x_min + 1) = 0;
    const auto d2 = squared_distance_transform(outside);
    for (int y = box.y_min; y <= box.y_max; ++y) {
      for (int x = box.x_min; x <= box.x_max; ++x) {
        if (gt.ids.at(y, x) != id) continue;
        const double dist = d2.at(y - box.y_min + 1, x - box.x_min + 1);
        std::uint8_t k = 3;
        if (dist <= sq[0]) k = 0;
        else if (dist <= sq[1]) k = 1;
        else if (dist <= sq[2]) k = 2;
        levels.at(y, x) = k;
      }
    }
  }
  return levels;
}

HoughTargets derive_hough_targets(const InstanceMap& gt, const ClassMap& labels,
                                  const ClassCatalog& catalog) {
  if (!gt.ids.same_extent(labels)) throw std::invalid_argument("hough targets: shape mismatch");
  const int h = gt.ids.height();
  const int w = gt.ids.width();
  HoughTargets t{Image<double>(h, w), Image<double>(h, w), Image<int>(h, w, 1, -1)};
  const std::uint32_t n = gt.count();
  std::vector<double> sx(n + 1, 0.0), sy(n + 1, 0.0);
  std::vector<std::int64_t> cnt(n + 1, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto id = gt.ids.at(y, x);
      if (id == 0 || !catalog.is_thing(labels.at(y, x))) continue;
      sx[id] += x;
      sy[id] += y;
      ++cnt[id];
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto id = gt.ids.at(y, x);
      const int ch = catalog.thing_index(labels.at(y, x));
      if (id == 0 || ch < 0) continue;
      t.x_off.at(y, x) = (sx[id] / cnt[id] - x) / w;
      t.y_off.at(y, x) = (sy[id] / cnt[id] - y) / h;
      t.channel.at(y, x) = ch;
    }
  }
  return t;
}

}  // namespace bbf
