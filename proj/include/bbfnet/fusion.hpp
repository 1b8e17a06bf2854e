#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "bbfnet/config.hpp"
#include "bbfnet/maps.hpp"
#include "bbfnet/triplet.hpp"
#include "bbfnet/watershed.hpp"

namespace bbf {

/// Which heads take part in instance fusion.
struct HeadSet {
  bool watershed = true;
  bool hough = true;
  bool triplet = true;

  /// Letters W, H, T in any order, e.g. "WT"; '+' separators are ignored.
  static HeadSet parse(const std::string& text);
  static HeadSet all() { return {}; }
  std::string name() const;  // canonical order, e.g. "W+H+T"
  bool empty() const { return !watershed && !hough && !triplet; }
};

enum class RejectReason { center_outside_bbox, low_confidence, low_bbox_iou, dissolved_cluster };

const char* to_string(RejectReason reason);

struct Rejection {
  RejectReason reason;
  std::string stage;  // "watershed", "hough", "remaining"
  std::uint32_t class_id = kVoidClass;
  std::int64_t pixels = 0;
  BBox bbox;
};

struct FusionTrace {
  std::string heads;
  int watershed_candidates = 0;
  int center_rejected = 0;
  std::int64_t refined_pixels = 0;
  int hough_modes = 0;
  int hough_dissolved = 0;
  int hough_candidates = 0;
  int remaining_rounds = 0;
  int remaining_kept = 0;
  int remaining_rejected = 0;
  int low_confidence = 0;
  int low_bbox_iou = 0;
  int final_things = 0;
  int final_stuff = 0;
  std::int64_t thing_pixels = 0;
  std::int64_t assigned_pixels = 0;
  std::int64_t void_pixels = 0;
  std::vector<Rejection> rejections;
  /// Wall-clock seconds per stage; kept out of to_json() so traces stay reproducible.
  std::vector<std::pair<std::string, double>> stage_seconds;

  bool reconciles() const { return assigned_pixels + void_pixels == thing_pixels; }
  nlohmann::json to_json() const;
};

struct PipelineOutput {
  PanopticResult result;
  FusionTrace trace;
};

/// Mean probability of the candidate's class over its pixels.
double mean_class_probability(const InstanceCandidate& candidate, const SemanticPrediction& sem,
                              const ClassCatalog& catalog);

/// Drops candidates whose mean class probability is below the threshold. The
/// comparison is made at the float precision probabilities are stored in.
std::vector<InstanceCandidate> confidence_filter(std::vector<InstanceCandidate> candidates,
                                                 const SemanticPrediction& sem,
                                                 const ClassCatalog& catalog,
                                                 double threshold = 0.65,
                                                 std::vector<InstanceCandidate>* dropped = nullptr);

/// Drops candidates whose pixel count over bbox area is below the threshold.
std::vector<InstanceCandidate> bbox_iou_filter(std::vector<InstanceCandidate> candidates,
                                               double threshold = 0.1,
                                               std::vector<InstanceCandidate>* dropped = nullptr);

/// Full fusion with all three heads.
PipelineOutput run_pipeline(const HeadOutputs& heads, const SameInstanceScorer& scorer,
                            const PipelineConfig& config);

/// Fusion restricted to a subset of heads. W alone returns the watershed
/// components; H alone clusters all thing pixels; T without W or H discovers
/// instances over all thing pixels.
PipelineOutput ablation_pipeline(const HeadSet& heads, const HeadOutputs& inputs,
                                 const SameInstanceScorer& scorer, const PipelineConfig& config);

}  // namespace bbf
