#include "bbfnet/triplet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace bbf {

namespace fl = feature_layout;

FeatureMap::FeatureMap(const Image<float>* embedding, const SemanticPrediction& sem,
                       const WatershedPrediction& wtr, const HoughPrediction& hough,
                       const ClassCatalog& catalog)
    : embedding_(embedding), sem_(&sem), wtr_(&wtr), hough_(&hough), catalog_(&catalog) {}

PixelFeature FeatureMap::at(int pixel) const {
  PixelFeature f;
  const int w = width();
  const int h = height();
  if (embedding_) {
    auto e = embedding_->pixel(pixel);
    std::copy(e.begin(), e.end(), f.values.begin() + fl::kEmbedding);
  }
  f.values[fl::kPosition] = static_cast<float>(normalize_x(pixel % w, w));
  f.values[fl::kPosition + 1] = static_cast<float>(normalize_y(pixel / w, h));
  f.values[fl::kSemProb] = sem_->label_prob(pixel, *catalog_);
  auto wp = wtr_->probs.pixel(pixel);
  std::copy(wp.begin(), wp.end(), f.values.begin() + fl::kWatershed);
  const int ch = catalog_->thing_index(sem_->labels[pixel]);
  if (ch >= 0) {
    f.values[fl::kHough] = hough_->x_off.at_index(pixel, ch);
    f.values[fl::kHough + 1] = hough_->y_off.at_index(pixel, ch);
    f.values[fl::kHough + 2] = hough_->sigma_x.at_index(pixel, ch);
    f.values[fl::kHough + 3] = hough_->sigma_y.at_index(pixel, ch);
  }
  return f;
}

Image<float> FeatureMap::materialize() const {
  Image<float> out(height(), width(), fl::kLength);
  for (std::size_t p = 0; p < out.pixel_count(); ++p) {
    const auto f = at(static_cast<int>(p));
    std::copy(f.values.begin(), f.values.end(), out.pixel(p).begin());
  }
  return out;
}

FeatureMap assemble_features(const Image<float>* embedding, const SemanticPrediction& sem,
                             const WatershedPrediction& wtr, const HoughPrediction& hough,
                             const ClassCatalog& catalog) {
  if (!wtr.levels.same_extent(sem.labels) || !hough.x_off.same_extent(sem.labels))
    throw std::invalid_argument("assemble_features: maps differ in size");
  if (sem.probs.channels() != catalog.num_classes() || hough.channels() != catalog.num_things())
    throw std::invalid_argument("assemble_features: channel count disagrees with catalog");
  if (embedding) {
    if (!embedding->same_extent(sem.labels))
      throw std::invalid_argument("assemble_features: embedding differs in size");
    if (embedding->channels() != fl::kEmbeddingDim)
      throw std::invalid_argument("assemble_features: embedding depth must be 128");
  }
  return FeatureMap(embedding, sem, wtr, hough, catalog);
}

void SameInstanceScorer::score_against(const FeatureMap& features, int anchor,
                                       std::span<const int> others, std::span<double> out) const {
  const auto fa = features.at(anchor);
  for (std::size_t i = 0; i < others.size(); ++i) out[i] = score(fa, features.at(others[i]));
}

std::uint32_t OracleScorer::id_at(const PixelFeature& f) const {
  const int w = gt_.ids.width();
  const int h = gt_.ids.height();
  const long x = std::lround(denormalize_x(f.x(), w));
  const long y = std::lround(denormalize_y(f.y(), h));
  if (x < 0 || y < 0 || x >= w || y >= h)
    throw std::out_of_range("oracle scorer: feature position outside the image");
  return gt_.ids.at(static_cast<int>(y), static_cast<int>(x));
}

double OracleScorer::score(const PixelFeature& anchor, const PixelFeature& other) const {
  return id_at(anchor) == id_at(other) ? 1.0 : 0.0;
}

void OracleScorer::score_against(const FeatureMap& features, int anchor,
                                 std::span<const int> others, std::span<double> out) const {
  if (!gt_.ids.same_extent(features.semantic().labels))
    throw std::out_of_range("oracle scorer: ground truth differs in size");
  const auto a = gt_.ids[anchor];
  for (std::size_t i = 0; i < others.size(); ++i) out[i] = gt_.ids[others[i]] == a ? 1.0 : 0.0;
}

DistanceScorer::DistanceScorer(double tau) : tau_(tau) {
  if (!(tau > 0)) throw std::invalid_argument("distance scorer: tau must be positive");
}

double DistanceScorer::score_distance(double d) const {
  return 1.0 / (1.0 + std::exp((d - tau_) / (tau_ / 10.0)));
}

double DistanceScorer::score(const PixelFeature& anchor, const PixelFeature& other) const {
  double s = 0.0;
  const auto a = anchor.embedding();
  const auto b = other.embedding();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return score_distance(std::sqrt(s));
}

void DistanceScorer::score_against(const FeatureMap& features, int anchor,
                                   std::span<const int> others, std::span<double> out) const {
  const Image<float>* emb = features.embedding();
  if (emb == nullptr) {
    // All embeddings are zero.
    std::fill(out.begin(), out.begin() + others.size(), score_distance(0.0));
    return;
  }
  const auto a = emb->pixel(anchor);
  for (std::size_t i = 0; i < others.size(); ++i) {
    const auto b = emb->pixel(others[i]);
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double d = static_cast<double>(a[k]) - b[k];
      s += d * d;
    }
    out[i] = score_distance(std::sqrt(s));
  }
}

std::unique_ptr<SameInstanceScorer> make_scorer(const ScorerChoice& choice, const InstanceMap* gt) {
  if (choice.kind == ScorerChoice::Kind::distance) return std::make_unique<DistanceScorer>(choice.tau);
  if (gt == nullptr) throw std::invalid_argument("oracle scorer needs ground truth");
  return std::make_unique<OracleScorer>(*gt);
}

int candidate_anchor(const InstanceCandidate& candidate, const CenterField* centers,
                     const SemanticPrediction& sem, const ClassCatalog& catalog) {
  const int w = sem.labels.width();
  const int h = sem.labels.height();
  double cx = 0.0, cy = 0.0;
  if (centers) {
    const auto wc = weighted_center(candidate, *centers, sem, catalog);
    cx = denormalize_x(wc.x, w);
    cy = denormalize_y(wc.y, h);
  } else {
    for (int p : candidate.pixels) {
      cx += p % w;
      cy += p / w;
    }
    cx /= static_cast<double>(candidate.pixels.size());
    cy /= static_cast<double>(candidate.pixels.size());
  }
  int best = candidate.pixels.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (int p : candidate.pixels) {
    const double dx = p % w - cx, dy = p / w - cy;
    const double d = dx * dx + dy * dy;
    if (d < best_d) {
      best_d = d;
      best = p;
    }
  }
  return best;
}

std::vector<InstanceCandidate> refine_candidates(std::vector<InstanceCandidate> kept,
                                                 std::vector<int>& pool,
                                                 const FeatureMap& features,
                                                 const SameInstanceScorer& scorer,
                                                 const CenterField* centers, double threshold) {
  if (kept.empty() || pool.empty()) return kept;
  const auto& labels = features.semantic().labels;
  std::vector<double> best(pool.size(), -1.0);
  std::vector<int> owner(pool.size(), -1);
  std::vector<int> idx;
  std::vector<int> others;
  std::vector<double> scores;

  for (std::size_t k = 0; k < kept.size(); ++k) {
    const auto& cand = kept[k];
    idx.clear();
    others.clear();
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (labels[pool[i]] == cand.class_id) {
        idx.push_back(static_cast<int>(i));
        others.push_back(pool[i]);
      }
    }
    if (others.empty()) continue;
    const int anchor = candidate_anchor(cand, centers, features.semantic(), features.catalog());
    scores.assign(others.size(), 0.0);
    scorer.score_against(features, anchor, others, scores);
    for (std::size_t j = 0; j < others.size(); ++j) {
      const int i = idx[j];
      if (scores[j] > threshold && scores[j] > best[i]) {
        best[i] = scores[j];
        owner[i] = static_cast<int>(k);
      }
    }
  }

  std::vector<int> remaining;
  remaining.reserve(pool.size());
  std::vector<bool> grown(kept.size(), false);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (owner[i] >= 0) {
      kept[owner[i]].pixels.push_back(pool[i]);
      grown[owner[i]] = true;
    } else {
      remaining.push_back(pool[i]);
    }
  }
  pool = std::move(remaining);
  const int w = labels.width();
  for (std::size_t k = 0; k < kept.size(); ++k) {
    if (!grown[k]) continue;
    auto& px = kept[k].pixels;
    std::sort(px.begin(), px.end());
    kept[k].bbox = bounds_of(px, w);
  }
  return kept;
}

DiscoverResult discover_remaining(std::vector<int> pool, const FeatureMap& features,
                                  const CenterField* centers, const SameInstanceScorer& scorer,
                                  std::uint64_t seed, double threshold) {
  DiscoverResult out;
  const auto& sem = features.semantic();
  const auto& labels = sem.labels;
  const int w = labels.width();
  std::mt19937_64 rng(seed);
  std::vector<int> others;
  std::vector<double> scores;

  while (!pool.empty()) {
    ++out.rounds;
    const std::size_t ai = std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng);
    const int anchor = pool[ai];
    const auto cls = labels[anchor];
    others.clear();
    for (int p : pool)
      if (p != anchor && labels[p] == cls) others.push_back(p);
    scores.assign(others.size(), 0.0);
    if (!others.empty()) scorer.score_against(features, anchor, others, scores);

    std::vector<int> group{anchor};
    for (std::size_t j = 0; j < others.size(); ++j)
      if (scores[j] > threshold) group.push_back(others[j]);
    std::sort(group.begin(), group.end());
    std::vector<int> rest;
    rest.reserve(pool.size() - group.size());
    std::set_difference(pool.begin(), pool.end(), group.begin(), group.end(),
                        std::back_inserter(rest));
    pool = std::move(rest);

    auto cand = make_candidate(std::move(group), labels, w, CandidateSource::remaining);
    cand.class_id = cls;
    if (centers) {
      const auto wc = weighted_center(cand, *centers, sem, features.catalog());
      if (!center_in_bbox(wc, cand.bbox, w, labels.height())) {
        out.rejected.push_back(std::move(cand));
        continue;
      }
    }
    out.kept.push_back(std::move(cand));
  }
  return out;
}

}  // namespace bbf
