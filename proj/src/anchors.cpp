#include <algorithm>
#include <random>

#include "bbfnet/losses.hpp"

namespace bbf {

namespace {

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

Pixel to_pixel(int index, int width) { return {index % width, index / width}; }

}  // namespace

std::vector<TripletSample> sample_triplet_anchors(const InstanceMap& gt, const ClassMap& labels,
                                                  const LevelMap& watershed_gt, int n_anchors,
                                                  std::uint64_t seed) {
  if (!gt.ids.same_extent(labels) || !gt.ids.same_extent(watershed_gt))
    throw LossError("sample_triplet_anchors: shape mismatch");
  if (n_anchors < 1) throw LossError("sample_triplet_anchors: n_anchors must be positive");
  const int w = gt.ids.width();
  const std::uint32_t n = gt.count();

  std::vector<std::vector<int>> members(n + 1);
  std::vector<std::uint32_t> cls(n + 1, kVoidClass);
  for (std::size_t p = 0; p < gt.ids.pixel_count(); ++p) {
    if (auto id = gt.ids[p]) {
      members[id].push_back(static_cast<int>(p));
      cls[id] = labels[p];
    }
  }

  std::mt19937_64 rng(seed);
  std::vector<TripletSample> out;
  const int n_hard = (n_anchors + 1) / 2;

  for (std::uint32_t id = 1; id <= n; ++id) {
    const auto& own = members[id];
    if (own.empty()) continue;

    std::vector<int> negatives;
    bool fallback = false;
    for (std::uint32_t other = 1; other <= n; ++other)
      if (other != id && cls[other] == cls[id])
        negatives.insert(negatives.end(), members[other].begin(), members[other].end());
    if (negatives.empty()) {
      fallback = true;
      for (std::uint32_t other = 1; other <= n; ++other)
        if (other != id) negatives.insert(negatives.end(), members[other].begin(), members[other].end());
    }
    std::sort(negatives.begin(), negatives.end());

    std::vector<int> level0;
    for (int p : own)
      if (watershed_gt[p] == 0) level0.push_back(p);
    if (level0.empty()) level0 = own;

    std::vector<int> anchors;
    anchors.reserve(n_anchors);
    if (static_cast<int>(own.size()) >= n_anchors) {
      std::vector<int> pool = own;
      for (int i = 0; i < n_anchors; ++i) {
        const std::size_t j = i + uniform_index(rng, pool.size() - i);
        std::swap(pool[i], pool[j]);
        anchors.push_back(pool[i]);
      }
    } else {
      for (int i = 0; i < n_anchors; ++i) anchors.push_back(own[uniform_index(rng, own.size())]);
    }

    std::vector<std::pair<long long, int>> ranked;
    for (int i = 0; i < n_anchors; ++i) {
      TripletSample s;
      s.instance = id;
      s.anchor = to_pixel(anchors[i], w);
      s.hard = i < n_hard;
      s.fallback_negative = fallback;
      if (s.hard) {
        s.positive = to_pixel(level0[uniform_index(rng, level0.size())], w);
        if (!negatives.empty()) {
          ranked.clear();
          for (int q : negatives) {
            const long long dx = q % w - s.anchor.x;
            const long long dy = q / w - s.anchor.y;
            ranked.emplace_back(dx * dx + dy * dy, q);
          }
          // Closest tenth carries weight 10, the rest weight 1.
          const std::size_t top = (ranked.size() + 9) / 10;
          std::nth_element(ranked.begin(), ranked.begin() + (top - 1), ranked.end());
          std::sort(ranked.begin(), ranked.begin() + top);
          std::sort(ranked.begin() + top, ranked.end());
          const std::size_t total = 10 * top + (ranked.size() - top);
          const std::size_t r = uniform_index(rng, total);
          const std::size_t pick = r < 10 * top ? r / 10 : top + (r - 10 * top);
          s.negative = to_pixel(ranked[pick].second, w);
        }
      } else {
        s.positive = to_pixel(own[uniform_index(rng, own.size())], w);
        if (!negatives.empty()) s.negative = to_pixel(negatives[uniform_index(rng, negatives.size())], w);
      }
      out.push_back(s);
    }
  }
  return out;
}

}  // namespace bbf
