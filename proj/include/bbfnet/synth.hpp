#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "bbfnet/config.hpp"
#include "bbfnet/maps.hpp"

namespace bbf {

class InfeasibleSceneError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Shape { rectangle, ellipse };

struct SceneSpec {
  int width = 128;
  int height = 128;
  int min_instances = 5;
  int max_instances = 15;
  bool rectangles = true;
  bool ellipses = true;
  int min_size = 3;  // side length or diameter, pixels
  int max_size = 60;
  int n_thing_classes = 2;
  int n_stuff_classes = 2;
  bool occlusion = true;  // later shapes may cover earlier ones
  /// Minimum distance between the visible centroids of any two instances; 0 disables.
  double min_centroid_separation = 0.0;
  /// Minimum visible share of each painted shape; 0 only requires one pixel.
  double min_visible_fraction = 0.0;
  /// Each instance must stay 4-connected and keep at most one connected
  /// region at watershed level >= 1.
  bool single_core = false;
  int max_attempts = 1000;
  std::uint64_t seed = 0;

  void validate() const;
  static SceneSpec from(const KeyValues& kv);
  nlohmann::json to_json() const;
};

struct Scene {
  ClassCatalog catalog;
  InstanceMap gt;  // dense ids 1..N in paint order
  ClassMap labels;

  PanopticResult panoptic() const { return make_panoptic(labels, gt, catalog); }
};

/// Paints shapes in depth order over horizontal stuff bands. A placement that
/// breaks a constraint is redrawn; after max_attempts failed draws the spec is
/// reported infeasible.
Scene generate_scene(const SceneSpec& spec);

/// Noise-free head outputs: one-hot semantics and watershed levels, Hough
/// offsets from the ground truth with sigma = 1, and embeddings equal to
/// instance id times a unit vector. The embedding map is H x W x 128 floats;
/// it can be skipped when the scorer does not read it.
HeadOutputs ideal_heads(const Scene& scene, bool with_embedding = true);

struct NoiseSpec {
  double class_flip_p = 0.0;      // argmax swaps with a random other class
  double prob_temperature = 0.0;  // probs <- softmax(probs / T); 0 disables
  double level_flip_p = 0.0;      // watershed level moves one bin up or down
  double offset_sigma = 0.0;      // Gaussian, normalized units
  double sigma_jitter = 0.0;      // sigma *= exp(N(0, s))
  double embedding_sigma = 0.0;   // Gaussian per embedding component
  std::uint64_t seed = 0;

  void validate() const;
  bool is_zero() const;
  static NoiseSpec from(const KeyValues& kv);
  nlohmann::json to_json() const;
};

/// Applies the noise channels in the order they are declared in NoiseSpec.
HeadOutputs perturb(HeadOutputs heads, const NoiseSpec& noise);

}  // namespace bbf
