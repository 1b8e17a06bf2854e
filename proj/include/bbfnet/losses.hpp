#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bbfnet/config.hpp"
#include "bbfnet/maps.hpp"
#include "bbfnet/targets.hpp"

namespace bbf {

class LossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kProbClamp = 1e-7;

struct Gradient {
  std::string name;
  Image<double> values;
};

/// Loss value with its gradients, one per differentiable input.
struct LossValue {
  double value = 0.0;
  std::vector<Gradient> gradients;

  /// Throws std::out_of_range for an unknown name.
  const Image<double>& gradient(const std::string& name) const;
};

/// Hough head outputs in double precision, channel per thing class.
struct HoughFields {
  Image<double> x_off;
  Image<double> y_off;
  Image<double> sigma_x;
  Image<double> sigma_y;

  static HoughFields from(const HoughPrediction& pred);
};

/// Mean over non-void pixels of -log p_gt. Gradient w.r.t. the probabilities.
LossValue semantic_loss(const Image<double>& probs, const ClassMap& gt_labels,
                        const ClassCatalog& catalog);
LossValue semantic_loss(const SemanticPrediction& pred, const ClassMap& gt_labels,
                        const ClassCatalog& catalog);

/// Uncertainty-weighted offset regression over pixels that carry a target.
/// Each pixel term is w_p [dx^2/sx + dy^2/sy -+ (log sx + log sy)/2] with
/// w_p = 1 / (|instance(p)| * #instances); the log sign is negative for
/// HoughLossSign::paper and positive for HoughLossSign::corrected.
LossValue hough_loss(const HoughFields& pred, const HoughTargets& targets, const InstanceMap& gt,
                     HoughLossSign sign);

/// Mean over all pixels of -w_k log p_k at the ground-truth level k.
LossValue watershed_loss(const Image<double>& probs, const LevelMap& gt_levels,
                         const std::array<double, 4>& weights);
LossValue watershed_loss(const WatershedPrediction& pred, const LevelMap& gt_levels,
                         const std::array<double, 4>& weights);

/// max(|a - p|^2 - |a - n|^2 + margin, 0); zero subgradient at the hinge.
LossValue triplet_margin_loss(std::span<const double> anchor, std::span<const double> positive,
                              std::span<const double> negative, double margin);

struct PairPrediction {
  double p_same = 0.5;
  int label = 0;  // 1 = same instance
};

/// Mean binary cross-entropy over pairs, probabilities clamped to
/// [1e-7, 1 - 1e-7]. Gradient w.r.t. each p_same, shape 1 x N.
LossValue triplet_ce_loss(std::span<const PairPrediction> pairs);

/// alpha1 L_ss + alpha2 L_hgh + alpha3 L_wtr + alpha4 L_trp. Gradients are
/// the scaled component gradients, prefixed "ss/", "hgh/", "wtr/", "trp/".
LossValue total_loss(const LossValue& semantic, const LossValue& hough, const LossValue& watershed,
                     const LossValue& triplet, const std::array<double, 4>& alphas);

/// Sum with a fixed pairwise reduction tree.
double pairwise_sum(std::span<const double> values);

struct TripletSample {
  Pixel anchor;
  Pixel positive;
  std::optional<Pixel> negative;
  std::uint32_t instance = 0;
  bool hard = false;
  bool fallback_negative = false;  // no same-class negative existed
};

/// Exactly n_anchors samples per instance, the first ceil(n_anchors / 2)
/// hard-mined. Anchors are drawn without replacement when the instance has
/// enough pixels, with replacement otherwise. Hard positives come from the
/// instance's level-0 pixels; hard negatives from same-class pixels of other
/// instances, with the closest tenth (by distance to the anchor) weighted 10x.
std::vector<TripletSample> sample_triplet_anchors(const InstanceMap& gt, const ClassMap& labels,
                                                  const LevelMap& watershed_gt, int n_anchors,
                                                  std::uint64_t seed);

}  // namespace bbf
