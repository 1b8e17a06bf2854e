#pragma once

#include <optional>
#include <vector>

#include "bbfnet/maps.hpp"
#include "bbfnet/watershed.hpp"

namespace bbf {

/// Predicted instance center of each thing pixel in normalized coordinates
/// (channel 0 = x, channel 1 = y); `valid` marks thing pixels.
struct CenterField {
  Image<double> center;
  Image<std::uint8_t> valid;

  int width() const noexcept { return center.width(); }
  int height() const noexcept { return center.height(); }
};

/// center(p) = normalized(p) + offset from the channel of p's predicted class.
CenterField predict_centers(const HoughPrediction& hough, const SemanticPrediction& sem,
                            const ClassCatalog& catalog);

struct WeightedCenter {
  double x = 0.0;  // normalized
  double y = 0.0;
  bool unweighted_fallback = false;
};

/// Mean of member centers weighted by each pixel's predicted-class
/// probability. Falls back to the plain mean when the weights sum to zero.
WeightedCenter weighted_center(const InstanceCandidate& candidate, const CenterField& centers,
                               const SemanticPrediction& sem, const ClassCatalog& catalog);

/// True when the weighted center, in pixel coordinates, lies within the
/// candidate's inclusive bbox.
bool center_in_bbox(const WeightedCenter& center, const BBox& box, int width, int height);

struct CenterFilterResult {
  std::vector<InstanceCandidate> kept;
  std::vector<InstanceCandidate> rejected;
};

CenterFilterResult filter_by_center(std::vector<InstanceCandidate> candidates,
                                    const CenterField& centers, const SemanticPrediction& sem,
                                    const ClassCatalog& catalog);

/// A Hough vote in pixel coordinates, tagged with the pixel that cast it.
struct Vote {
  double x = 0.0;
  double y = 0.0;
  int pixel = 0;
};

struct MeanShiftParams {
  double bandwidth = 10.0;        // pixels
  int max_iters = 100;
  double eps = 1e-3;              // pixels
  double merge_factor = 0.5;      // modes within merge_factor * bandwidth merge
  int min_cluster_size = 4;
};

struct ClusterResult {
  struct Mode {
    double x = 0.0;
    double y = 0.0;
  };
  std::vector<Mode> modes;
  /// Per input vote: mode index, or nullopt when unassigned.
  std::vector<std::optional<int>> assignment;
  /// Modes dropped for having fewer than min_cluster_size members.
  int dissolved = 0;
};

/// Flat-kernel mean shift. Every vote seeds a trajectory in input order;
/// a converged point within merge_factor * B of an earlier mode joins it.
/// Each vote is assigned to the nearest mode within B (ties to the earlier
/// mode); modes with too few votes are dissolved and their votes left
/// unassigned. Surviving modes keep their relative order.
ClusterResult mean_shift(const std::vector<Vote>& votes, const MeanShiftParams& params);

/// One mean-shift update of `point` over `votes` (flat kernel of radius B).
ClusterResult::Mode mean_shift_step(const std::vector<Vote>& votes, ClusterResult::Mode point,
                                    double bandwidth);

/// Votes of the given pixels, converted to pixel coordinates.
std::vector<Vote> votes_for(std::span<const int> pixels, const CenterField& centers);

/// One candidate per surviving mode, holding the pixels of its assigned votes.
std::vector<InstanceCandidate> backtrace(const ClusterResult& clusters,
                                         const std::vector<Vote>& votes, const ClassMap& labels);

}  // namespace bbf
