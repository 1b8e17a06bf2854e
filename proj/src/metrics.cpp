#include "bbfnet/metrics.hpp"

#include <cstdio>
#include <functional>
#include <stdexcept>
#include <unordered_map>

namespace bbf {

namespace {

void check_shapes(const PanopticResult& pred, const PanopticResult& gt) {
  if (!pred.ids.same_extent(gt.ids)) throw std::invalid_argument("pred and gt differ in size");
}

}  // namespace

std::vector<SegmentMatch> match_segments(const PanopticResult& pred, const PanopticResult& gt) {
  check_shapes(pred, gt);
  std::unordered_map<std::uint64_t, std::int64_t> inter;
  for (std::size_t p = 0; p < gt.ids.pixel_count(); ++p) {
    const auto a = pred.ids[p];
    const auto b = gt.ids[p];
    if (a == 0 || b == 0) continue;
    ++inter[(static_cast<std::uint64_t>(a) << 32) | b];
  }
  std::vector<SegmentMatch> out;
  for (const auto& [key, n] : inter) {
    const auto pid = static_cast<std::uint32_t>(key >> 32);
    const auto gid = static_cast<std::uint32_t>(key & 0xffffffffu);
    const Segment* ps = pred.find(pid);
    const Segment* gs = gt.find(gid);
    if (!ps || !gs) throw std::invalid_argument("match_segments: pixel id without segment");
    if (ps->class_id != gs->class_id) continue;
    const double iou = static_cast<double>(n) / static_cast<double>(ps->area + gs->area - n);
    if (iou > 0.5) out.push_back({pid, gid, iou});
  }
  std::sort(out.begin(), out.end(),
            [](const SegmentMatch& a, const SegmentMatch& b) { return a.gt_id < b.gt_id; });
  return out;
}

std::vector<SegmentMatch> bruteforce_match_oracle(const PanopticResult& pred,
                                                  const PanopticResult& gt, int max_segments) {
  check_shapes(pred, gt);
  const auto& ps = pred.segments;
  const auto& gs = gt.segments;
  if (static_cast<int>(ps.size()) > max_segments || static_cast<int>(gs.size()) > max_segments)
    throw MatchBudgetError("too many segments for exhaustive matching");

  // IoU of every same-class pair by direct pixel scan.
  std::vector<std::vector<double>> iou(gs.size(), std::vector<double>(ps.size(), -1.0));
  for (std::size_t g = 0; g < gs.size(); ++g) {
    for (std::size_t q = 0; q < ps.size(); ++q) {
      if (gs[g].class_id != ps[q].class_id) continue;
      std::int64_t i = 0, u = 0;
      for (std::size_t p = 0; p < gt.ids.pixel_count(); ++p) {
        const bool in_g = gt.ids[p] == gs[g].id;
        const bool in_p = pred.ids[p] == ps[q].id;
        i += in_g && in_p;
        u += in_g || in_p;
      }
      if (u > 0) iou[g][q] = static_cast<double>(i) / static_cast<double>(u);
    }
  }

  std::vector<int> current(gs.size(), -1), best(gs.size(), -1);
  std::vector<bool> used(ps.size(), false);
  int best_count = -1;
  double best_sum = -1.0;
  std::function<void(std::size_t, int, double)> dfs = [&](std::size_t g, int count, double sum) {
    if (g == gs.size()) {
      if (count > best_count || (count == best_count && sum > best_sum)) {
        best_count = count;
        best_sum = sum;
        best = current;
      }
      return;
    }
    current[g] = -1;
    dfs(g + 1, count, sum);
    for (std::size_t q = 0; q < ps.size(); ++q) {
      if (used[q] || !(iou[g][q] > 0.5)) continue;
      used[q] = true;
      current[g] = static_cast<int>(q);
      dfs(g + 1, count + 1, sum + iou[g][q]);
      used[q] = false;
      current[g] = -1;
    }
  };
  dfs(0, 0, 0.0);

  std::vector<SegmentMatch> out;
  for (std::size_t g = 0; g < gs.size(); ++g)
    if (best[g] >= 0) out.push_back({ps[best[g]].id, gs[g].id, iou[g][best[g]]});
  std::sort(out.begin(), out.end(),
            [](const SegmentMatch& a, const SegmentMatch& b) { return a.gt_id < b.gt_id; });
  return out;
}

SizeBucket size_bucket(std::int64_t area) {
  if (area < kSmallArea) return SizeBucket::small;
  if (area < kLargeArea) return SizeBucket::medium;
  return SizeBucket::large;
}

PQCounts& PQCounts::operator+=(const PQCounts& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  iou_sum += o.iou_sum;
  return *this;
}

void PQAccumulator::add(const std::vector<SegmentMatch>& matches, const PanopticResult& pred,
                        const PanopticResult& gt) {
  check_shapes(pred, gt);
  std::unordered_map<std::uint32_t, double> pred_hit, gt_hit;
  for (const auto& m : matches) {
    pred_hit[m.pred_id] = m.iou;
    gt_hit[m.gt_id] = m.iou;
  }
  auto bucket_of = [&](std::int64_t area) -> auto& {
    return bucket_[static_cast<int>(size_bucket(area))];
  };
  for (const auto& s : gt.segments) {
    auto& c = per_class_[s.class_id];
    auto it = gt_hit.find(s.id);
    const bool thing = catalog_.is_thing(s.class_id);
    if (it != gt_hit.end()) {
      ++c.tp;
      c.iou_sum += it->second;
      if (thing) {
        auto& b = bucket_of(s.area)[s.class_id];
        ++b.tp;
        b.iou_sum += it->second;
      }
    } else {
      ++c.fn;
      if (thing) ++bucket_of(s.area)[s.class_id].fn;
    }
  }
  for (const auto& s : pred.segments) {
    if (pred_hit.count(s.id)) continue;
    ++per_class_[s.class_id].fp;
    if (catalog_.is_thing(s.class_id)) ++bucket_of(s.area)[s.class_id].fp;
  }
}

namespace {

template <typename Pred>
PQStats average(const std::map<std::uint32_t, PQCounts>& per_class, Pred include) {
  PQStats s;
  for (const auto& [cls, c] : per_class) {
    if (!c.present() || !include(cls)) continue;
    s.pq += c.pq();
    s.sq += c.sq();
    s.rq += c.rq();
    ++s.n_classes;
  }
  if (s.n_classes > 0) {
    s.pq /= s.n_classes;
    s.sq /= s.n_classes;
    s.rq /= s.n_classes;
  }
  return s;
}

nlohmann::json stats_json(const PQStats& s) {
  return {{"pq", s.pq * 100.0}, {"sq", s.sq * 100.0}, {"rq", s.rq * 100.0}, {"n", s.n_classes}};
}

}  // namespace

PQReport PQAccumulator::report() const {
  PQReport r;
  r.per_class = per_class_;
  auto any = [](std::uint32_t) { return true; };
  r.all = average(per_class_, any);
  r.things = average(per_class_, [&](std::uint32_t c) { return catalog_.is_thing(c); });
  r.stuff = average(per_class_, [&](std::uint32_t c) { return !catalog_.is_thing(c); });
  r.small = average(bucket_[0], any);
  r.medium = average(bucket_[1], any);
  r.large = average(bucket_[2], any);
  return r;
}

PQReport compute_pq(const std::vector<SegmentMatch>& matches, const PanopticResult& pred,
                    const PanopticResult& gt, const ClassCatalog& catalog) {
  PQAccumulator acc(catalog);
  acc.add(matches, pred, gt);
  return acc.report();
}

nlohmann::json PQReport::to_json() const {
  nlohmann::json j;
  j["all"] = stats_json(all);
  j["things"] = stats_json(things);
  j["stuff"] = stats_json(stuff);
  j["small"] = stats_json(small);
  j["medium"] = stats_json(medium);
  j["large"] = stats_json(large);
  auto pc = nlohmann::json::array();
  for (const auto& [cls, c] : per_class) {
    pc.push_back({{"class", cls},
                  {"tp", c.tp},
                  {"fp", c.fp},
                  {"fn", c.fn},
                  {"pq", c.pq() * 100.0},
                  {"sq", c.sq() * 100.0},
                  {"rq", c.rq() * 100.0}});
  }
  j["per_class"] = std::move(pc);
  return j;
}

std::string PQReport::table_header() {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-12s %7s %7s %7s %7s %7s\n", "heads", "PQ", "SQ", "PQ_s",
                "PQ_m", "PQ_l");
  return buf;
}

std::string PQReport::table(const std::string& row_name) const {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-12s %7.1f %7.1f %7.1f %7.1f %7.1f\n", row_name.c_str(),
                all.pq * 100.0, all.sq * 100.0, small.pq * 100.0, medium.pq * 100.0,
                large.pq * 100.0);
  return buf;
}

}  // namespace bbf
