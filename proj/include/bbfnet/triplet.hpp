#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "bbfnet/config.hpp"
#include "bbfnet/hough.hpp"
#include "bbfnet/maps.hpp"
#include "bbfnet/watershed.hpp"

namespace bbf {

// Pixel feature layout:
//   [0, 128)    embedding
//   [128, 130)  normalized position (x, y)
//   130         probability of the predicted class
//   [131, 135)  watershed level probabilities
//   [135, 139)  x offset, y offset, sigma_x, sigma_y of the predicted class
namespace feature_layout {
inline constexpr int kEmbedding = 0;
inline constexpr int kEmbeddingDim = 128;
inline constexpr int kPosition = 128;
inline constexpr int kSemProb = 130;
inline constexpr int kWatershed = 131;
inline constexpr int kHough = 135;
inline constexpr int kLength = 139;
}  // namespace feature_layout

struct PixelFeature {
  std::array<float, feature_layout::kLength> values{};

  std::span<const float> embedding() const {
    return std::span<const float>(values).subspan(feature_layout::kEmbedding,
                                                  feature_layout::kEmbeddingDim);
  }
  float x() const { return values[feature_layout::kPosition]; }
  float y() const { return values[feature_layout::kPosition + 1]; }
};

/// Non-owning view that assembles pixel features on demand. The maps it was
/// built from must outlive it. A missing embedding map reads as zeros.
class FeatureMap {
 public:
  FeatureMap(const Image<float>* embedding, const SemanticPrediction& sem,
             const WatershedPrediction& wtr, const HoughPrediction& hough,
             const ClassCatalog& catalog);

  PixelFeature at(int pixel) const;
  int width() const noexcept { return sem_->labels.width(); }
  int height() const noexcept { return sem_->labels.height(); }
  const Image<float>* embedding() const noexcept { return embedding_; }
  const SemanticPrediction& semantic() const noexcept { return *sem_; }
  const ClassCatalog& catalog() const noexcept { return *catalog_; }

  /// Full H x W x 139 feature image.
  Image<float> materialize() const;

 private:
  const Image<float>* embedding_;
  const SemanticPrediction* sem_;
  const WatershedPrediction* wtr_;
  const HoughPrediction* hough_;
  const ClassCatalog* catalog_;
};

/// Throws std::invalid_argument on a shape mismatch or an embedding whose
/// depth is not 128.
FeatureMap assemble_features(const Image<float>* embedding, const SemanticPrediction& sem,
                             const WatershedPrediction& wtr, const HoughPrediction& hough,
                             const ClassCatalog& catalog);

/// Probability that `other` belongs to the anchor's instance. Not assumed
/// symmetric.
class SameInstanceScorer {
 public:
  virtual ~SameInstanceScorer() = default;
  virtual double score(const PixelFeature& anchor, const PixelFeature& other) const = 0;

  /// Scores many pixels against one anchor pixel. The default assembles
  /// features and calls score(); overrides must return identical values.
  virtual void score_against(const FeatureMap& features, int anchor, std::span<const int> others,
                             std::span<double> out) const;
};

/// 1 when both pixels carry the same ground-truth instance id, else 0.
/// Pixel positions are recovered from the feature position slot.
class OracleScorer final : public SameInstanceScorer {
 public:
  explicit OracleScorer(InstanceMap gt) : gt_(std::move(gt)) {}
  double score(const PixelFeature& anchor, const PixelFeature& other) const override;
  void score_against(const FeatureMap& features, int anchor, std::span<const int> others,
                     std::span<double> out) const override;

 private:
  std::uint32_t id_at(const PixelFeature& f) const;
  InstanceMap gt_;
};

/// Logistic in embedding distance: 1 / (1 + exp((d - tau) / (tau / 10))).
class DistanceScorer final : public SameInstanceScorer {
 public:
  explicit DistanceScorer(double tau);
  double score(const PixelFeature& anchor, const PixelFeature& other) const override;
  void score_against(const FeatureMap& features, int anchor, std::span<const int> others,
                     std::span<double> out) const override;
  double score_distance(double distance) const;

 private:
  double tau_;
};

class ConstantScorer final : public SameInstanceScorer {
 public:
  explicit ConstantScorer(double value) : value_(value) {}
  double score(const PixelFeature&, const PixelFeature&) const override { return value_; }

 private:
  double value_;
};

std::unique_ptr<SameInstanceScorer> make_scorer(const ScorerChoice& choice, const InstanceMap* gt);

/// Member pixel closest to the candidate's weighted Hough center, ties to the
/// lowest index. Without a center field the plain pixel centroid is used.
int candidate_anchor(const InstanceCandidate& candidate, const CenterField* centers,
                     const SemanticPrediction& sem, const ClassCatalog& catalog);

/// Grows each candidate with same-class pool pixels scoring above the
/// threshold against its anchor. A pixel claimed by several candidates goes
/// to the highest score, ties to the earlier candidate. Claimed pixels are
/// removed from `pool` (sorted linear indices).
std::vector<InstanceCandidate> refine_candidates(std::vector<InstanceCandidate> kept,
                                                 std::vector<int>& pool,
                                                 const FeatureMap& features,
                                                 const SameInstanceScorer& scorer,
                                                 const CenterField* centers,
                                                 double threshold = 0.5);

struct DiscoverResult {
  std::vector<InstanceCandidate> kept;
  std::vector<InstanceCandidate> rejected;  // become void
  int rounds = 0;
};

/// Repeatedly draws a random pool pixel as anchor and groups it with the
/// same-class pool pixels scoring above the threshold, until the pool is
/// empty. With a center field, groups whose weighted center falls outside
/// their bbox are rejected.
DiscoverResult discover_remaining(std::vector<int> pool, const FeatureMap& features,
                                  const CenterField* centers, const SameInstanceScorer& scorer,
                                  std::uint64_t seed, double threshold = 0.5);

}  // namespace bbf
