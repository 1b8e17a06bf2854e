#pragma once

#include <cstdint>
#include <vector>

#include "bbfnet/maps.hpp"

namespace bbf {

enum class CandidateSource { watershed, hough, remaining };

const char* to_string(CandidateSource source);

/// A set of thing pixels proposed as one instance.
struct InstanceCandidate {
  std::vector<int> pixels;  // linear indices, ascending
  std::uint32_t class_id = kVoidClass;
  BBox bbox;
  CandidateSource source = CandidateSource::watershed;

  int first_pixel() const { return pixels.front(); }
};

/// Majority semantic label over the pixels, ties to the lowest class id.
std::uint32_t majority_class(std::span<const int> pixels, const ClassMap& labels);

/// Builds a candidate with sorted pixels, majority class and tight bbox.
InstanceCandidate make_candidate(std::vector<int> pixels, const ClassMap& labels, int width,
                                 CandidateSource source);

/// Two-pass union-find labeling with 4-connectivity. Labels are 1..N in
/// row-major order of each component's first pixel; 0 = background.
Image<std::uint32_t> label_components(const Image<std::uint8_t>& mask, std::uint32_t* count = nullptr);

/// Connected components of {level >= 1 and semantic label is a thing}, ordered
/// by the row-major position of their first pixel.
std::vector<InstanceCandidate> extract_candidates(const WatershedPrediction& wtr,
                                                  const SemanticPrediction& sem,
                                                  const ClassCatalog& catalog,
                                                  int connectivity = 4);

/// Pixel count over bbox area.
double candidate_bbox_iou(const InstanceCandidate& candidate);

}  // namespace bbf
