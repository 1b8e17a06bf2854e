#include "bbfnet/maps.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace bbf {

namespace {

// Probabilities must be non-negative and sum to 1 within 1e-5 per pixel.
void check_distribution(std::span<const float> v, const char* what) {
  double sum = 0.0;
  for (float x : v) {
    if (!(x >= 0.0f)) throw std::invalid_argument(std::string(what) + ": negative or NaN probability");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-5)
    throw std::invalid_argument(std::string(what) + ": probabilities do not sum to 1");
}

}  // namespace

ClassCatalog::ClassCatalog(std::vector<std::uint32_t> stuff, std::vector<std::uint32_t> things)
    : stuff_(std::move(stuff)), things_(std::move(things)) {
  if (things_.empty()) throw std::invalid_argument("catalog needs at least one thing class");
  std::set<std::uint32_t> seen;
  std::uint32_t max_id = 0;
  for (auto id : stuff_) {
    if (id == kVoidClass || !seen.insert(id).second)
      throw std::invalid_argument("catalog: void or duplicate class id " + std::to_string(id));
    max_id = std::max(max_id, id);
  }
  for (auto id : things_) {
    if (id == kVoidClass || !seen.insert(id).second)
      throw std::invalid_argument("catalog: void or duplicate class id " + std::to_string(id));
    max_id = std::max(max_id, id);
  }
  channel_lut_.assign(max_id + 1, -1);
  thing_lut_.assign(max_id + 1, -1);
  for (std::size_t i = 0; i < stuff_.size(); ++i) channel_lut_[stuff_[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < things_.size(); ++i) {
    channel_lut_[things_[i]] = static_cast<int>(stuff_.size() + i);
    thing_lut_[things_[i]] = static_cast<int>(i);
  }
}

ClassCatalog ClassCatalog::sequential(int n_stuff, int n_things) {
  std::vector<std::uint32_t> stuff, things;
  for (int i = 0; i < n_stuff; ++i) stuff.push_back(static_cast<std::uint32_t>(i + 1));
  for (int i = 0; i < n_things; ++i) things.push_back(static_cast<std::uint32_t>(n_stuff + i + 1));
  return ClassCatalog(std::move(stuff), std::move(things));
}

std::uint32_t ClassCatalog::class_at(int channel) const {
  if (channel < 0 || channel >= num_classes()) throw std::out_of_range("class channel");
  return channel < static_cast<int>(stuff_.size()) ? stuff_[channel]
                                                   : things_[channel - stuff_.size()];
}

int ClassCatalog::channel_of(std::uint32_t class_id) const noexcept {
  return class_id < channel_lut_.size() ? channel_lut_[class_id] : -1;
}

bool ClassCatalog::is_stuff(std::uint32_t class_id) const noexcept {
  int ch = channel_of(class_id);
  return ch >= 0 && ch < static_cast<int>(stuff_.size());
}

SemanticPrediction SemanticPrediction::from_probs(Image<float> probs,
                                                  const ClassCatalog& catalog) {
  if (probs.channels() != catalog.num_classes())
    throw std::invalid_argument("semantic probs: channel count does not match catalog");
  SemanticPrediction out;
  out.labels = ClassMap(probs.height(), probs.width());
  const int n = probs.channels();
  for (std::size_t p = 0; p < probs.pixel_count(); ++p) {
    auto v = probs.pixel(p);
    check_distribution(v, "semantic probs");
    int best = 0;
    for (int c = 1; c < n; ++c) {
      if (v[c] > v[best] || (v[c] == v[best] && catalog.class_at(c) < catalog.class_at(best)))
        best = c;
    }
    out.labels[p] = catalog.class_at(best);
  }
  out.probs = std::move(probs);
  return out;
}

WatershedPrediction WatershedPrediction::from_probs(Image<float> probs) {
  if (probs.channels() != kWatershedLevels)
    throw std::invalid_argument("watershed probs must have 4 channels");
  WatershedPrediction out;
  out.levels = LevelMap(probs.height(), probs.width());
  for (std::size_t p = 0; p < probs.pixel_count(); ++p) {
    auto v = probs.pixel(p);
    check_distribution(v, "watershed probs");
    out.levels[p] = static_cast<std::uint8_t>(std::max_element(v.begin(), v.end()) - v.begin());
  }
  out.probs = std::move(probs);
  return out;
}

WatershedPrediction WatershedPrediction::one_hot(const LevelMap& levels) {
  Image<float> probs(levels.height(), levels.width(), kWatershedLevels, 0.0f);
  for (std::size_t p = 0; p < levels.pixel_count(); ++p) probs.at_index(p, levels[p]) = 1.0f;
  return {std::move(probs), levels};
}

void HoughPrediction::validate() const {
  for (const auto* img : {&y_off, &sigma_x, &sigma_y}) {
    if (!img->same_extent(x_off) || img->channels() != x_off.channels())
      throw std::invalid_argument("hough maps disagree in shape");
  }
  for (float v : x_off.values())
    if (!(std::abs(v) < 1.0f)) throw std::invalid_argument("hough x offset outside (-1, 1)");
  for (float v : y_off.values())
    if (!(std::abs(v) < 1.0f)) throw std::invalid_argument("hough y offset outside (-1, 1)");
  for (float v : sigma_x.values())
    if (!(v > 0.0f)) throw std::invalid_argument("hough sigma_x must be positive");
  for (float v : sigma_y.values())
    if (!(v > 0.0f)) throw std::invalid_argument("hough sigma_y must be positive");
}

std::uint32_t InstanceMap::count() const {
  std::uint32_t m = 0;
  for (auto v : ids.values()) m = std::max(m, v);
  return m;
}

bool InstanceMap::well_formed() const {
  const std::uint32_t n = count();
  std::vector<bool> seen(n + 1, false);
  for (auto v : ids.values()) seen[v] = true;
  for (std::uint32_t i = 1; i <= n; ++i)
    if (!seen[i]) return false;
  return true;
}

const Segment* PanopticResult::find(std::uint32_t id) const {
  for (const auto& s : segments)
    if (s.id == id) return &s;
  return nullptr;
}

PanopticResult make_panoptic(const ClassMap& labels, const InstanceMap& instances,
                             const ClassCatalog& catalog, const SemanticPrediction* sem) {
  if (!labels.same_extent(instances.ids)) throw std::invalid_argument("make_panoptic: shape");
  PanopticResult out;
  out.labels = ClassMap(labels.height(), labels.width());
  out.ids = Image<std::uint32_t>(labels.height(), labels.width());

  const std::uint32_t n_inst = instances.count();
  std::vector<std::uint32_t> inst_class(n_inst + 1, kVoidClass);
  std::vector<std::int64_t> inst_area(n_inst + 1, 0);
  std::vector<double> inst_prob(n_inst + 1, 0.0);
  std::map<std::uint32_t, std::int64_t> stuff_area;
  std::map<std::uint32_t, double> stuff_prob;

  for (std::size_t p = 0; p < labels.pixel_count(); ++p) {
    const std::uint32_t cls = labels[p];
    const std::uint32_t inst = instances.ids[p];
    const double prob =
        sem ? sem->probs.at_index(p, catalog.channel_of(cls) < 0 ? 0 : catalog.channel_of(cls))
            : 1.0;
    if (catalog.is_thing(cls) && inst > 0) {
      if (inst_class[inst] != kVoidClass && inst_class[inst] != cls)
        throw std::invalid_argument("make_panoptic: instance spans several classes");
      inst_class[inst] = cls;
      ++inst_area[inst];
      inst_prob[inst] += prob;
    } else if (catalog.is_stuff(cls)) {
      ++stuff_area[cls];
      stuff_prob[cls] += prob;
    }
  }

  std::uint32_t next = n_inst + 1;
  std::map<std::uint32_t, std::uint32_t> stuff_seg;
  for (std::uint32_t i = 1; i <= n_inst; ++i) {
    if (inst_area[i] == 0) continue;
    out.segments.push_back({i, inst_class[i], inst_area[i], inst_prob[i] / inst_area[i]});
  }
  for (auto [cls, area] : stuff_area) {
    stuff_seg[cls] = next;
    out.segments.push_back({next, cls, area, stuff_prob[cls] / area});
    ++next;
  }
  for (std::size_t p = 0; p < labels.pixel_count(); ++p) {
    const std::uint32_t cls = labels[p];
    if (catalog.is_thing(cls) && instances.ids[p] > 0) {
      out.labels[p] = cls;
      out.ids[p] = instances.ids[p];
    } else if (catalog.is_stuff(cls)) {
      out.labels[p] = cls;
      out.ids[p] = stuff_seg[cls];
    }
  }
  return out;
}

void validate_panoptic(const PanopticResult& result) {
  if (!result.labels.same_extent(result.ids)) throw std::invalid_argument("panoptic: shape");
  std::map<std::uint32_t, const Segment*> by_id;
  for (const auto& s : result.segments) {
    if (s.id == 0) throw std::invalid_argument("panoptic: segment id 0 is reserved");
    if (!by_id.emplace(s.id, &s).second) throw std::invalid_argument("panoptic: duplicate id");
  }
  std::map<std::uint32_t, std::int64_t> area;
  std::int64_t void_px = 0;
  for (std::size_t p = 0; p < result.ids.pixel_count(); ++p) {
    const auto id = result.ids[p];
    if (id == 0) {
      ++void_px;
      continue;
    }
    auto it = by_id.find(id);
    if (it == by_id.end()) throw std::invalid_argument("panoptic: pixel id without segment");
    if (it->second->class_id != result.labels[p])
      throw std::invalid_argument("panoptic: pixel class disagrees with its segment");
    ++area[id];
  }
  std::int64_t total = void_px;
  for (const auto& s : result.segments) {
    if (area[s.id] != s.area) throw std::invalid_argument("panoptic: segment area mismatch");
    total += s.area;
  }
  if (total != static_cast<std::int64_t>(result.ids.pixel_count()))
    throw std::invalid_argument("panoptic: areas do not cover the image");
}

}  // namespace bbf

namespace bbf {

void HeadOutputs::validate() const {
  if (sem.probs.channels() != catalog.num_classes())
    throw std::invalid_argument("semantic channels disagree with catalog");
  if (!sem.labels.same_extent(sem.probs) || !wtr.levels.same_extent(sem.labels) ||
      !wtr.probs.same_extent(sem.labels) || !hough.x_off.same_extent(sem.labels))
    throw std::invalid_argument("head outputs differ in size");
  if (hough.channels() != catalog.num_things())
    throw std::invalid_argument("hough channels disagree with catalog");
  hough.validate();
  if (embedding && (!embedding->same_extent(sem.labels) || embedding->channels() != 128))
    throw std::invalid_argument("embedding must be H x W x 128");
}

}  // namespace bbf
