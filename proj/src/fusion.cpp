#include "bbfnet/fusion.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

#include "bbfnet/hough.hpp"

namespace bbf {

HeadSet HeadSet::parse(const std::string& text) {
  HeadSet h{false, false, false};
  for (char c : text) {
    switch (c) {
      case 'W': case 'w': h.watershed = true; break;
      case 'H': case 'h': h.hough = true; break;
      case 'T': case 't': h.triplet = true; break;
      case '+': case ' ': break;
      default: throw std::invalid_argument("unknown head '" + std::string(1, c) + "' in " + text);
    }
  }
  if (h.empty()) throw std::invalid_argument("empty head set");
  return h;
}

std::string HeadSet::name() const {
  std::string s;
  auto add = [&](bool on, const char* n) {
    if (!on) return;
    if (!s.empty()) s += '+';
    s += n;
  };
  add(watershed, "W");
  add(hough, "H");
  add(triplet, "T");
  return s;
}

const char* to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::center_outside_bbox: return "center-outside-bbox";
    case RejectReason::low_confidence: return "low-confidence";
    case RejectReason::low_bbox_iou: return "low-bbox-iou";
    case RejectReason::dissolved_cluster: return "dissolved-cluster";
  }
  return "?";
}

nlohmann::json FusionTrace::to_json() const {
  nlohmann::json j;
  j["heads"] = heads;
  j["counts"] = {
      {"watershed_candidates", watershed_candidates},
      {"center_rejected", center_rejected},
      {"refined_pixels", refined_pixels},
      {"hough_modes", hough_modes},
      {"hough_dissolved", hough_dissolved},
      {"hough_candidates", hough_candidates},
      {"remaining_rounds", remaining_rounds},
      {"remaining_kept", remaining_kept},
      {"remaining_rejected", remaining_rejected},
      {"low_confidence", low_confidence},
      {"low_bbox_iou", low_bbox_iou},
      {"final_things", final_things},
      {"final_stuff", final_stuff},
  };
  j["pixels"] = {{"thing", thing_pixels}, {"assigned", assigned_pixels}, {"void", void_pixels}};
  auto rej = nlohmann::json::array();
  for (const auto& r : rejections) {
    rej.push_back({{"reason", to_string(r.reason)},
                   {"stage", r.stage},
                   {"class", r.class_id},
                   {"pixels", r.pixels},
                   {"bbox", {r.bbox.x_min, r.bbox.y_min, r.bbox.x_max, r.bbox.y_max}}});
  }
  j["rejections"] = std::move(rej);
  return j;
}

double mean_class_probability(const InstanceCandidate& candidate, const SemanticPrediction& sem,
                              const ClassCatalog& catalog) {
  if (candidate.pixels.empty()) return 0.0;
  const int ch = catalog.channel_of(candidate.class_id);
  if (ch < 0) throw std::invalid_argument("candidate class not in catalog");
  double s = 0.0;
  for (int p : candidate.pixels) s += sem.probs.at_index(p, ch);
  return s / static_cast<double>(candidate.pixels.size());
}

std::vector<InstanceCandidate> confidence_filter(std::vector<InstanceCandidate> candidates,
                                                 const SemanticPrediction& sem,
                                                 const ClassCatalog& catalog, double threshold,
                                                 std::vector<InstanceCandidate>* dropped) {
  std::vector<InstanceCandidate> kept;
  const float thr = static_cast<float>(threshold);
  for (auto& c : candidates) {
    const float m = static_cast<float>(mean_class_probability(c, sem, catalog));
    if (m < thr) {
      if (dropped) dropped->push_back(std::move(c));
    } else {
      kept.push_back(std::move(c));
    }
  }
  return kept;
}

std::vector<InstanceCandidate> bbox_iou_filter(std::vector<InstanceCandidate> candidates,
                                               double threshold,
                                               std::vector<InstanceCandidate>* dropped) {
  std::vector<InstanceCandidate> kept;
  for (auto& c : candidates) {
    if (candidate_bbox_iou(c) < threshold) {
      if (dropped) dropped->push_back(std::move(c));
    } else {
      kept.push_back(std::move(c));
    }
  }
  return kept;
}

namespace {

class StageTimer {
 public:
  explicit StageTimer(FusionTrace& trace) : trace_(trace), start_(Clock::now()) {}
  void lap(const char* name) {
    const auto now = Clock::now();
    trace_.stage_seconds.emplace_back(name, std::chrono::duration<double>(now - start_).count());
    start_ = now;
  }

 private:
  using Clock = std::chrono::steady_clock;
  FusionTrace& trace_;
  Clock::time_point start_;
};

void log_rejections(FusionTrace& trace, const std::vector<InstanceCandidate>& cands,
                    RejectReason reason) {
  for (const auto& c : cands) {
    trace.rejections.push_back({reason, to_string(c.source), c.class_id,
                                static_cast<std::int64_t>(c.pixels.size()), c.bbox});
  }
}

void remove_pixels(std::vector<int>& pool, const std::vector<InstanceCandidate>& cands) {
  std::vector<int> taken;
  for (const auto& c : cands) taken.insert(taken.end(), c.pixels.begin(), c.pixels.end());
  std::sort(taken.begin(), taken.end());
  std::vector<int> rest;
  rest.reserve(pool.size());
  std::set_difference(pool.begin(), pool.end(), taken.begin(), taken.end(),
                      std::back_inserter(rest));
  pool = std::move(rest);
}

void sort_by_first_pixel(std::vector<InstanceCandidate>& cands) {
  std::stable_sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) {
    return a.first_pixel() < b.first_pixel();
  });
}

}  // namespace

PipelineOutput ablation_pipeline(const HeadSet& heads, const HeadOutputs& in,
                                 const SameInstanceScorer& scorer, const PipelineConfig& config) {
  if (heads.empty()) throw std::invalid_argument("ablation_pipeline: empty head set");
  config.validate();
  in.validate();

  PipelineOutput out;
  FusionTrace& trace = out.trace;
  trace.heads = heads.name();
  StageTimer timer(trace);

  const auto& catalog = in.catalog;
  const auto& sem = in.sem;
  const auto& labels = sem.labels;
  const int w = labels.width();
  const int h = labels.height();

  std::vector<int> pool;
  for (std::size_t p = 0; p < labels.pixel_count(); ++p)
    if (catalog.is_thing(labels[p])) pool.push_back(static_cast<int>(p));
  trace.thing_pixels = static_cast<std::int64_t>(pool.size());

  const FeatureMap features = assemble_features(in.embedding ? &*in.embedding : nullptr, sem,
                                                in.wtr, in.hough, catalog);
  CenterField centers;
  const CenterField* center_ptr = nullptr;
  if (heads.hough) {
    centers = predict_centers(in.hough, sem, catalog);
    center_ptr = &centers;
  }
  timer.lap("setup");

  // I_L: watershed components, center filter, triplet refinement.
  std::vector<InstanceCandidate> stage_l;
  if (heads.watershed) {
    auto cands = extract_candidates(in.wtr, sem, catalog, config.connectivity);
    trace.watershed_candidates = static_cast<int>(cands.size());
    if (center_ptr) {
      auto f = filter_by_center(std::move(cands), centers, sem, catalog);
      trace.center_rejected = static_cast<int>(f.rejected.size());
      log_rejections(trace, f.rejected, RejectReason::center_outside_bbox);
      cands = std::move(f.kept);
    }
    remove_pixels(pool, cands);
    timer.lap("watershed");
    if (heads.triplet) {
      const std::size_t before = pool.size();
      cands = refine_candidates(std::move(cands), pool, features, scorer, center_ptr,
                                config.triplet_threshold);
      trace.refined_pixels = static_cast<std::int64_t>(before - pool.size());
      timer.lap("refine");
    }
    stage_l = std::move(cands);
  }

  // I_S: mean shift over the votes of unassigned pixels, one thing class at a time.
  std::vector<InstanceCandidate> stage_s;
  if (heads.hough) {
    MeanShiftParams ms;
    ms.bandwidth = config.bandwidth_B;
    ms.max_iters = config.mean_shift_max_iters;
    ms.eps = config.mean_shift_eps;
    ms.merge_factor = config.mode_merge_factor;
    ms.min_cluster_size = config.min_cluster_size;
    std::vector<int> of_class;
    for (const auto cls : catalog.thing_classes()) {
      of_class.clear();
      for (int p : pool)
        if (labels[p] == cls) of_class.push_back(p);
      if (of_class.empty()) continue;
      const auto votes = votes_for(of_class, centers);
      const auto clusters = mean_shift(votes, ms);
      trace.hough_modes += static_cast<int>(clusters.modes.size());
      trace.hough_dissolved += clusters.dissolved;
      if (clusters.dissolved > 0) {
        Rejection r{RejectReason::dissolved_cluster, "hough", cls, 0, {}};
        for (std::size_t i = 0; i < votes.size(); ++i) {
          if (clusters.assignment[i]) continue;
          ++r.pixels;
          r.bbox.include(votes[i].pixel % w, votes[i].pixel / w);
        }
        trace.rejections.push_back(r);
      }
      auto found = backtrace(clusters, votes, labels);
      for (auto& c : found) stage_s.push_back(std::move(c));
    }
    remove_pixels(pool, stage_s);
    sort_by_first_pixel(stage_s);
    trace.hough_candidates = static_cast<int>(stage_s.size());
    timer.lap("hough");
  }

  // I_R: triplet discovery over whatever is left.
  std::vector<InstanceCandidate> stage_r;
  if (heads.triplet) {
    auto d = discover_remaining(std::move(pool), features, center_ptr, scorer, config.rng_seed,
                                config.triplet_threshold);
    pool.clear();
    trace.remaining_rounds = d.rounds;
    trace.remaining_kept = static_cast<int>(d.kept.size());
    trace.remaining_rejected = static_cast<int>(d.rejected.size());
    log_rejections(trace, d.rejected, RejectReason::center_outside_bbox);
    stage_r = std::move(d.kept);
    sort_by_first_pixel(stage_r);
    timer.lap("remaining");
  }

  // I = I_L u I_S u I_R, then the confidence and bbox filters.
  std::vector<InstanceCandidate> all;
  for (auto* stage : {&stage_l, &stage_s, &stage_r})
    for (auto& c : *stage) all.push_back(std::move(c));
  std::vector<InstanceCandidate> dropped;
  all = confidence_filter(std::move(all), sem, catalog, config.conf_threshold, &dropped);
  trace.low_confidence = static_cast<int>(dropped.size());
  log_rejections(trace, dropped, RejectReason::low_confidence);
  dropped.clear();
  all = bbox_iou_filter(std::move(all), config.bbox_iou_threshold, &dropped);
  trace.low_bbox_iou = static_cast<int>(dropped.size());
  log_rejections(trace, dropped, RejectReason::low_bbox_iou);

  ClassMap out_labels(h, w);
  InstanceMap instances{Image<std::uint32_t>(h, w)};
  for (std::size_t p = 0; p < labels.pixel_count(); ++p)
    if (catalog.is_stuff(labels[p])) out_labels[p] = labels[p];
  std::uint32_t next = 1;
  for (const auto& c : all) {
    for (int p : c.pixels) {
      out_labels[p] = c.class_id;
      instances.ids[p] = next;
    }
    trace.assigned_pixels += static_cast<std::int64_t>(c.pixels.size());
    ++next;
  }
  trace.void_pixels = trace.thing_pixels - trace.assigned_pixels;
  out.result = make_panoptic(out_labels, instances, catalog, &sem);
  trace.final_things = static_cast<int>(all.size());
  trace.final_stuff = static_cast<int>(out.result.segments.size() - all.size());
  timer.lap("assemble");
  return out;
}

PipelineOutput run_pipeline(const HeadOutputs& heads, const SameInstanceScorer& scorer,
                            const PipelineConfig& config) {
  return ablation_pipeline(HeadSet::all(), heads, scorer, config);
}

}  // namespace bbf
