#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bbfnet/image.hpp"

namespace bbf {

inline constexpr std::uint32_t kVoidClass = 0;
inline constexpr int kWatershedLevels = 4;

/// Stuff and thing class ids. Semantic probability channels are ordered
/// stuff classes first, then thing classes; Hough channels follow the thing
/// order.
class ClassCatalog {
 public:
  ClassCatalog() = default;
  ClassCatalog(std::vector<std::uint32_t> stuff, std::vector<std::uint32_t> things);

  /// Stuff ids 1..n_stuff, thing ids n_stuff+1..n_stuff+n_things.
  static ClassCatalog sequential(int n_stuff, int n_things);

  const std::vector<std::uint32_t>& stuff_classes() const noexcept { return stuff_; }
  const std::vector<std::uint32_t>& thing_classes() const noexcept { return things_; }
  int num_classes() const noexcept { return static_cast<int>(stuff_.size() + things_.size()); }
  int num_things() const noexcept { return static_cast<int>(things_.size()); }

  std::uint32_t class_at(int channel) const;
  /// Semantic channel of a class id, or -1 when the id is not in the catalog.
  int channel_of(std::uint32_t class_id) const noexcept;
  /// Index into thing_classes(), or -1 for stuff / void / unknown ids.
  int thing_index(std::uint32_t class_id) const noexcept {
    return class_id < thing_lut_.size() ? thing_lut_[class_id] : -1;
  }
  bool is_thing(std::uint32_t class_id) const noexcept { return thing_index(class_id) >= 0; }
  bool is_stuff(std::uint32_t class_id) const noexcept;
  bool contains(std::uint32_t class_id) const noexcept { return channel_of(class_id) >= 0; }

  bool operator==(const ClassCatalog& o) const {
    return stuff_ == o.stuff_ && things_ == o.things_;
  }

 private:
  std::vector<std::uint32_t> stuff_;
  std::vector<std::uint32_t> things_;
  std::vector<int> channel_lut_;
  std::vector<int> thing_lut_;
};

/// Per-pixel class probabilities with their argmax labels.
struct SemanticPrediction {
  Image<float> probs;
  ClassMap labels;

  /// Builds labels as the argmax of probs, ties to the lowest class id.
  static SemanticPrediction from_probs(Image<float> probs, const ClassCatalog& catalog);
  /// Probability of the predicted class at a pixel.
  float label_prob(std::size_t pixel, const ClassCatalog& catalog) const {
    return probs.at_index(pixel, catalog.channel_of(labels[pixel]));
  }
};

struct WatershedPrediction {
  Image<float> probs;  // K = 4 channels
  LevelMap levels;

  static WatershedPrediction from_probs(Image<float> probs);
  static WatershedPrediction one_hot(const LevelMap& levels);
};

/// Normalized center offsets and axis uncertainties, one channel per thing class.
struct HoughPrediction {
  Image<float> x_off;
  Image<float> y_off;
  Image<float> sigma_x;
  Image<float> sigma_y;

  int height() const noexcept { return x_off.height(); }
  int width() const noexcept { return x_off.width(); }
  int channels() const noexcept { return x_off.channels(); }
  /// Throws std::invalid_argument when shapes disagree or a value is out of range.
  void validate() const;
};

struct InstanceMap {
  Image<std::uint32_t> ids;  // 0 = unassigned

  /// Largest id, which equals the instance count for a well-formed map.
  std::uint32_t count() const;
  /// Dense ids 1..N with every id present.
  bool well_formed() const;
};

struct Segment {
  std::uint32_t id = 0;
  std::uint32_t class_id = 0;
  std::int64_t area = 0;
  double mean_prob = 0.0;
  bool operator==(const Segment&) const = default;
};

struct PanopticResult {
  ClassMap labels;
  Image<std::uint32_t> ids;
  std::vector<Segment> segments;

  const Segment* find(std::uint32_t id) const;
  bool operator==(const PanopticResult&) const = default;
};

/// Builds a panoptic result from a class map and an instance map: each stuff
/// class present becomes one segment, each instance one thing segment. Thing
/// segments keep their instance ids, stuff segments are numbered after them.
/// mean_prob is 1 unless probabilities are supplied.
PanopticResult make_panoptic(const ClassMap& labels, const InstanceMap& instances,
                             const ClassCatalog& catalog,
                             const SemanticPrediction* sem = nullptr);

/// Throws std::invalid_argument on a violated PanopticResult invariant.
void validate_panoptic(const PanopticResult& result);

}  // namespace bbf

namespace bbf {

/// Everything the heads predict for one image.
struct HeadOutputs {
  ClassCatalog catalog;
  SemanticPrediction sem;
  WatershedPrediction wtr;
  HoughPrediction hough;
  std::optional<Image<float>> embedding;  // H x W x 128

  /// Throws std::invalid_argument when maps disagree in size or channels.
  void validate() const;
};

}  // namespace bbf
