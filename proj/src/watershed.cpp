#include "bbfnet/watershed.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>

namespace bbf {

namespace {

class DisjointSet {
 public:
  std::uint32_t make() {
    parent_.push_back(static_cast<std::uint32_t>(parent_.size()));
    return parent_.back();
  }
  std::uint32_t find(std::uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  // The smaller root wins, so a root is always the earliest provisional label.
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) parent_[b] = a;
    else parent_[a] = b;
  }
  std::size_t size() const { return parent_.size(); }

 private:
  std::vector<std::uint32_t> parent_;
};

}  // namespace

const char* to_string(CandidateSource source) {
  switch (source) {
    case CandidateSource::watershed: return "watershed";
    case CandidateSource::hough: return "hough";
    case CandidateSource::remaining: return "remaining";
  }
  return "unknown";
}

std::uint32_t majority_class(std::span<const int> pixels, const ClassMap& labels) {
  std::map<std::uint32_t, std::int64_t> votes;
  for (int p : pixels) ++votes[labels[p]];
  std::uint32_t best = kVoidClass;
  std::int64_t best_n = -1;
  for (auto [cls, n] : votes) {  // ascending ids, strict > keeps the lowest on ties
    if (n > best_n) {
      best = cls;
      best_n = n;
    }
  }
  return best;
}

InstanceCandidate make_candidate(std::vector<int> pixels, const ClassMap& labels, int width,
                                 CandidateSource source) {
  if (pixels.empty()) throw std::invalid_argument("candidate needs at least one pixel");
  std::sort(pixels.begin(), pixels.end());
  InstanceCandidate c;
  c.class_id = majority_class(pixels, labels);
  c.bbox = bounds_of(pixels, width);
  c.source = source;
  c.pixels = std::move(pixels);
  return c;
}

Image<std::uint32_t> label_components(const Image<std::uint8_t>& mask, std::uint32_t* count) {
  const int h = mask.height();
  const int w = mask.width();
  Image<std::uint32_t> labels(h, w);
  DisjointSet sets;
  sets.make();  // 0 = background
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.at(y, x)) continue;
      const std::uint32_t up = y > 0 ? labels.at(y - 1, x) : 0;
      const std::uint32_t left = x > 0 ? labels.at(y, x - 1) : 0;
      std::uint32_t l;
      if (up && left) {
        l = std::min(up, left);
        sets.unite(up, left);
      } else if (up || left) {
        l = up ? up : left;
      } else {
        l = sets.make();
      }
      labels.at(y, x) = l;
    }
  }
  // Provisional labels are created in row-major order and roots are the
  // smallest member, so numbering roots in order gives first-pixel ordering.
  std::vector<std::uint32_t> final_label(sets.size(), 0);
  std::uint32_t next = 0;
  for (std::uint32_t l = 1; l < sets.size(); ++l) {
    const auto r = sets.find(l);
    if (r == l) final_label[l] = ++next;
  }
  for (std::uint32_t l = 1; l < sets.size(); ++l) final_label[l] = final_label[sets.find(l)];
  for (auto& v : labels.values()) v = final_label[v];
  if (count) *count = next;
  return labels;
}

std::vector<InstanceCandidate> extract_candidates(const WatershedPrediction& wtr,
                                                  const SemanticPrediction& sem,
                                                  const ClassCatalog& catalog, int connectivity) {
  if (connectivity != 4) throw std::invalid_argument("only 4-connectivity is supported");
  if (!wtr.levels.same_extent(sem.labels)) throw std::invalid_argument("extract_candidates: shape");
  const int w = wtr.levels.width();
  Image<std::uint8_t> mask(wtr.levels.height(), w);
  for (std::size_t p = 0; p < mask.pixel_count(); ++p)
    mask[p] = wtr.levels[p] >= 1 && catalog.is_thing(sem.labels[p]);
  std::uint32_t n = 0;
  const auto comp = label_components(mask, &n);
  std::vector<std::vector<int>> members(n);
  for (std::size_t p = 0; p < comp.pixel_count(); ++p)
    if (comp[p]) members[comp[p] - 1].push_back(static_cast<int>(p));
  std::vector<InstanceCandidate> out;
  out.reserve(n);
  for (auto& m : members)
    out.push_back(make_candidate(std::move(m), sem.labels, w, CandidateSource::watershed));
  return out;
}

double candidate_bbox_iou(const InstanceCandidate& candidate) {
  const auto area = candidate.bbox.area();
  return area > 0 ? static_cast<double>(candidate.pixels.size()) / static_cast<double>(area) : 0.0;
}

}  // namespace bbf
