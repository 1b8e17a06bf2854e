#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "bbfnet/maps.hpp"

namespace bbf {

struct SegmentMatch {
  std::uint32_t pred_id = 0;
  std::uint32_t gt_id = 0;
  double iou = 0.0;
  bool operator==(const SegmentMatch&) const = default;
};

/// Same-class pairs with IoU > 0.5, sorted by gt id. Such a pair is unique
/// per segment, so counting intersections is enough.
std::vector<SegmentMatch> match_segments(const PanopticResult& pred, const PanopticResult& gt);

class MatchBudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exhaustive search over one-to-one same-class matchings under the IoU > 0.5
/// constraint, maximizing the match count and then total IoU. Throws
/// MatchBudgetError when either side has more than `max_segments` segments.
std::vector<SegmentMatch> bruteforce_match_oracle(const PanopticResult& pred,
                                                  const PanopticResult& gt,
                                                  int max_segments = 32);

inline constexpr std::int64_t kSmallArea = 1000;   // area < 1000 is small
inline constexpr std::int64_t kLargeArea = 10000;  // area >= 10000 is large

enum class SizeBucket { small, medium, large };
SizeBucket size_bucket(std::int64_t area);

struct PQCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  double iou_sum = 0.0;

  bool present() const { return tp + fp + fn > 0; }
  double sq() const { return tp > 0 ? iou_sum / static_cast<double>(tp) : 0.0; }
  double rq() const {
    const double d = tp + 0.5 * fp + 0.5 * fn;
    return d > 0 ? tp / d : 0.0;
  }
  double pq() const { return sq() * rq(); }
  PQCounts& operator+=(const PQCounts& o);
};

struct PQStats {
  double pq = 0.0;
  double sq = 0.0;
  double rq = 0.0;
  int n_classes = 0;
};

struct PQReport {
  std::map<std::uint32_t, PQCounts> per_class;
  PQStats all, things, stuff;
  PQStats small, medium, large;  // thing classes only

  nlohmann::json to_json() const;
  /// Fixed-width table with the columns PQ, SQ, PQ_s, PQ_m, PQ_l (x100).
  std::string table(const std::string& row_name) const;
  static std::string table_header();
};

/// Accumulates TP/FP/FN over one or more images before averaging over classes.
class PQAccumulator {
 public:
  explicit PQAccumulator(ClassCatalog catalog) : catalog_(std::move(catalog)) {}
  void add(const std::vector<SegmentMatch>& matches, const PanopticResult& pred,
           const PanopticResult& gt);
  void add(const PanopticResult& pred, const PanopticResult& gt) {
    add(match_segments(pred, gt), pred, gt);
  }
  PQReport report() const;

 private:
  ClassCatalog catalog_;
  std::map<std::uint32_t, PQCounts> per_class_;
  std::map<std::uint32_t, PQCounts> bucket_[3];
};

/// PQ of a single image pair.
PQReport compute_pq(const std::vector<SegmentMatch>& matches, const PanopticResult& pred,
                    const PanopticResult& gt, const ClassCatalog& catalog);

}  // namespace bbf
