#include "bbfnet/hough.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace bbf {

CenterField predict_centers(const HoughPrediction& hough, const SemanticPrediction& sem,
                            const ClassCatalog& catalog) {
  if (!hough.x_off.same_extent(sem.labels) || hough.channels() != catalog.num_things())
    throw std::invalid_argument("predict_centers: shape mismatch");
  const int h = sem.labels.height();
  const int w = sem.labels.width();
  CenterField f{Image<double>(h, w, 2, 0.0), Image<std::uint8_t>(h, w)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int ch = catalog.thing_index(sem.labels.at(y, x));
      if (ch < 0) continue;
      f.center.at(y, x, 0) = normalize_x(x, w) + hough.x_off.at(y, x, ch);
      f.center.at(y, x, 1) = normalize_y(y, h) + hough.y_off.at(y, x, ch);
      f.valid.at(y, x) = 1;
    }
  }
  return f;
}

WeightedCenter weighted_center(const InstanceCandidate& candidate, const CenterField& centers,
                               const SemanticPrediction& sem, const ClassCatalog& catalog) {
  if (candidate.pixels.empty()) throw std::invalid_argument("weighted_center: empty candidate");
  double sx = 0.0, sy = 0.0, sw = 0.0, ux = 0.0, uy = 0.0;
  for (int p : candidate.pixels) {
    const double cx = centers.center.at_index(p, 0);
    const double cy = centers.center.at_index(p, 1);
    const double wt = sem.label_prob(p, catalog);
    sx += wt * cx;
    sy += wt * cy;
    sw += wt;
    ux += cx;
    uy += cy;
  }
  if (sw > 0.0) return {sx / sw, sy / sw, false};
  const double n = static_cast<double>(candidate.pixels.size());
  return {ux / n, uy / n, true};
}

bool center_in_bbox(const WeightedCenter& center, const BBox& box, int width, int height) {
  // Absorbs round-off from the normalize / denormalize round trip.
  constexpr double kTol = 1e-9;
  const double px = denormalize_x(center.x, width);
  const double py = denormalize_y(center.y, height);
  return px >= box.x_min - kTol && px <= box.x_max + kTol && py >= box.y_min - kTol &&
         py <= box.y_max + kTol;
}

CenterFilterResult filter_by_center(std::vector<InstanceCandidate> candidates,
                                    const CenterField& centers, const SemanticPrediction& sem,
                                    const ClassCatalog& catalog) {
  CenterFilterResult out;
  for (auto& c : candidates) {
    const auto wc = weighted_center(c, centers, sem, catalog);
    if (center_in_bbox(wc, c.bbox, centers.width(), centers.height()))
      out.kept.push_back(std::move(c));
    else
      out.rejected.push_back(std::move(c));
  }
  return out;
}

namespace {

// Exact disk sums over votes. Votes are bucketed into square cells of side
// g <= B / 16, grouped by cell row. Within a row the occupied cells are sorted
// by column and carry prefix sums, so a query adds the cells lying fully
// inside the disk in O(log n) per row and tests only the votes of cells that
// straddle the circle.
class VoteIndex {
 public:
  VoteIndex(const std::vector<Vote>& votes, double radius) : radius_(radius) {
    if (votes.empty()) return;
    double x_min = votes[0].x, y_min = votes[0].y, x_max = x_min, y_max = y_min;
    for (const auto& v : votes) {
      x_min = std::min(x_min, v.x);
      x_max = std::max(x_max, v.x);
      y_min = std::min(y_min, v.y);
      y_max = std::max(y_max, v.y);
    }
    cell_ = radius / 16.0;
    // Keep the row count bounded for far-flung votes.
    cell_ = std::max(cell_, (y_max - y_min) / 65536.0);
    x0_ = x_min;
    y0_ = y_min;
    rows_ = static_cast<long long>((y_max - y_min) / cell_) + 1;

    struct Keyed {
      long long row, col;
      int index;
    };
    std::vector<Keyed> keyed(votes.size());
    for (std::size_t i = 0; i < votes.size(); ++i)
      keyed[i] = {row_of(votes[i].y), col_of(votes[i].x), static_cast<int>(i)};
    std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
      if (a.row != b.row) return a.row < b.row;
      if (a.col != b.col) return a.col < b.col;
      return a.index < b.index;
    });

    xs_.reserve(votes.size());
    ys_.reserve(votes.size());
    row_begin_.assign(static_cast<std::size_t>(rows_) + 1, 0);
    std::size_t i = 0;
    for (long long r = 0; r < rows_; ++r) {
      row_begin_[r] = cols_.size();
      while (i < keyed.size() && keyed[i].row == r) {
        const long long c = keyed[i].col;
        cols_.push_back(c);
        vote_begin_.push_back(xs_.size());
        while (i < keyed.size() && keyed[i].row == r && keyed[i].col == c) {
          xs_.push_back(votes[keyed[i].index].x);
          ys_.push_back(votes[keyed[i].index].y);
          ++i;
        }
      }
    }
    row_begin_[rows_] = cols_.size();
    vote_begin_.push_back(xs_.size());

    // Prefix sums over the cells of each row, restarting at every row.
    pre_x_.assign(cols_.size() + 1, 0.0);
    pre_y_.assign(cols_.size() + 1, 0.0);
    for (long long r = 0; r < rows_; ++r) {
      double sx = 0.0, sy = 0.0;
      for (std::size_t c = row_begin_[r]; c < row_begin_[r + 1]; ++c) {
        pre_x_[c] = sx;
        pre_y_[c] = sy;
        for (std::size_t k = vote_begin_[c]; k < vote_begin_[c + 1]; ++k) {
          sx += xs_[k];
          sy += ys_[k];
        }
      }
      row_total_x_.push_back(sx);
      row_total_y_.push_back(sy);
    }
  }

  // Count and coordinate sums of the votes within the radius of (x, y).
  void sum_within(double x, double y, long long& n, double& sx, double& sy) const {
    n = 0;
    sx = sy = 0.0;
    if (rows_ == 0) return;
    const double r = radius_;
    const long long r_lo = std::max(0LL, row_of(y - r));
    const long long r_hi = std::min(rows_ - 1, row_of(y + r));
    for (long long row = r_lo; row <= r_hi; ++row) {
      const std::size_t b = row_begin_[row], e = row_begin_[row + 1];
      if (b == e) continue;
      const double ylo = y0_ + row * cell_, yhi = ylo + cell_;
      const double dy_near = std::max({0.0, ylo - y, y - yhi});
      if (dy_near > r) continue;
      const double dy_far = std::max(std::abs(ylo - y), std::abs(yhi - y));
      const double a_out = std::sqrt(r * r - dy_near * dy_near);
      const auto first = cols_.begin() + static_cast<std::ptrdiff_t>(b);
      const auto last = cols_.begin() + static_cast<std::ptrdiff_t>(e);
      const std::size_t o_lo = std::lower_bound(first, last, col_of(x - a_out)) - cols_.begin();
      const std::size_t o_hi = std::upper_bound(first, last, col_of(x + a_out)) - cols_.begin();
      std::size_t i_lo = o_hi, i_hi = o_hi;  // interior cell range [i_lo, i_hi)
      if (dy_far < r) {
        // Shrunk slightly so interior votes pass the exact test as well.
        const double a_in = std::sqrt(r * r - dy_far * dy_far) * (1.0 - 1e-12);
        const long long c_lo = static_cast<long long>(std::ceil((x - a_in - x0_) / cell_));
        const long long c_hi = static_cast<long long>(std::floor((x + a_in - x0_) / cell_)) - 1;
        if (c_lo <= c_hi) {
          i_lo = std::lower_bound(first, last, c_lo) - cols_.begin();
          i_hi = std::upper_bound(first, last, c_hi) - cols_.begin();
          if (i_lo >= i_hi) i_lo = i_hi = o_hi;
        }
      }
      if (i_lo < i_hi) {
        n += static_cast<long long>(vote_begin_[i_hi] - vote_begin_[i_lo]);
        sx += prefix(pre_x_, row_total_x_, row, i_hi) - pre_x_[i_lo];
        sy += prefix(pre_y_, row_total_y_, row, i_hi) - pre_y_[i_lo];
      }
      const double r2 = r * r;
      auto scan = [&](std::size_t c_begin, std::size_t c_end) {
        for (std::size_t k = vote_begin_[c_begin]; k < vote_begin_[c_end]; ++k) {
          const double ex = xs_[k] - x, ey = ys_[k] - y;
          if (ex * ex + ey * ey <= r2) {
            ++n;
            sx += xs_[k];
            sy += ys_[k];
          }
        }
      };
      scan(o_lo, std::max(o_lo, std::min(i_lo, o_hi)));
      if (i_hi < o_hi) scan(std::max(i_hi, o_lo), o_hi);
    }
  }

 private:
  long long row_of(double y) const { return static_cast<long long>(std::floor((y - y0_) / cell_)); }
  long long col_of(double x) const { return static_cast<long long>(std::floor((x - x0_) / cell_)); }
  // Prefix value at cell index c of `row`; the slot after a row's last cell is
  // shared with the next row's first cell, so the row total is kept apart.
  double prefix(const std::vector<double>& pre, const std::vector<double>& total, long long row,
                std::size_t c) const {
    return c == row_begin_[row + 1] ? total[row] : pre[c];
  }

  double radius_;
  double cell_ = 1.0;
  double x0_ = 0.0, y0_ = 0.0;
  long long rows_ = 0;
  std::vector<std::size_t> row_begin_;
  std::vector<long long> cols_;
  std::vector<std::size_t> vote_begin_;
  std::vector<double> xs_, ys_;
  std::vector<double> pre_x_, pre_y_;
  std::vector<double> row_total_x_, row_total_y_;
};

ClusterResult::Mode step(const VoteIndex& index, ClusterResult::Mode point) {
  long long n = 0;
  double sx = 0.0, sy = 0.0;
  index.sum_within(point.x, point.y, n, sx, sy);
  if (n == 0) return point;
  return {sx / n, sy / n};
}

struct PointHash {
  std::size_t operator()(const std::pair<double, double>& p) const noexcept {
    return std::hash<std::uint64_t>{}(std::bit_cast<std::uint64_t>(p.first) * 0x9E3779B97F4A7C15ULL ^
                                      std::bit_cast<std::uint64_t>(p.second));
  }
};

}  // namespace

ClusterResult::Mode mean_shift_step(const std::vector<Vote>& votes, ClusterResult::Mode point,
                                    double bandwidth) {
  VoteIndex index(votes, bandwidth);
  return step(index, point);
}

ClusterResult mean_shift(const std::vector<Vote>& votes, const MeanShiftParams& params) {
  if (!(params.bandwidth > 0)) throw std::invalid_argument("mean_shift: bandwidth must be positive");
  ClusterResult out;
  out.assignment.assign(votes.size(), std::nullopt);
  if (votes.empty()) return out;

  const double B = params.bandwidth;
  const double merge2 = (params.merge_factor * B) * (params.merge_factor * B);
  VoteIndex index(votes, B);

  // Seeds starting from the same point follow the same trajectory.
  std::unordered_map<std::pair<double, double>, ClusterResult::Mode, PointHash> converged;
  std::vector<ClusterResult::Mode> modes;
  for (const auto& v : votes) {
    const std::pair<double, double> start{v.x, v.y};
    auto it = converged.find(start);
    ClusterResult::Mode m{v.x, v.y};
    if (it != converged.end()) {
      m = it->second;
    } else {
      for (int iter = 0; iter < params.max_iters; ++iter) {
        const auto next = step(index, m);
        const double shift = std::hypot(next.x - m.x, next.y - m.y);
        m = next;
        if (shift < params.eps) break;
      }
      converged.emplace(start, m);
    }
    bool merged = false;
    for (const auto& existing : modes) {
      const double dx = existing.x - m.x, dy = existing.y - m.y;
      if (dx * dx + dy * dy <= merge2) {
        merged = true;
        break;
      }
    }
    if (!merged) modes.push_back(m);
  }

  // Nearest mode within the bandwidth.
  const double B2 = B * B;
  std::vector<int> nearest(votes.size(), -1);
  std::vector<int> count(modes.size(), 0);
  for (std::size_t i = 0; i < votes.size(); ++i) {
    double best = B2;
    int best_m = -1;
    for (std::size_t k = 0; k < modes.size(); ++k) {
      const double dx = modes[k].x - votes[i].x, dy = modes[k].y - votes[i].y;
      const double d2 = dx * dx + dy * dy;
      if (d2 < best || (best_m < 0 && d2 <= best)) {
        best = d2;
        best_m = static_cast<int>(k);
      }
    }
    nearest[i] = best_m;
    if (best_m >= 0) ++count[best_m];
  }

  std::vector<int> remap(modes.size(), -1);
  for (std::size_t k = 0; k < modes.size(); ++k) {
    if (count[k] >= params.min_cluster_size) {
      remap[k] = static_cast<int>(out.modes.size());
      out.modes.push_back(modes[k]);
    } else {
      ++out.dissolved;
    }
  }
  for (std::size_t i = 0; i < votes.size(); ++i)
    if (nearest[i] >= 0 && remap[nearest[i]] >= 0) out.assignment[i] = remap[nearest[i]];
  return out;
}

std::vector<Vote> votes_for(std::span<const int> pixels, const CenterField& centers) {
  std::vector<Vote> votes;
  votes.reserve(pixels.size());
  for (int p : pixels) {
    votes.push_back({denormalize_x(centers.center.at_index(p, 0), centers.width()),
                     denormalize_y(centers.center.at_index(p, 1), centers.height()), p});
  }
  return votes;
}

std::vector<InstanceCandidate> backtrace(const ClusterResult& clusters,
                                         const std::vector<Vote>& votes, const ClassMap& labels) {
  std::vector<std::vector<int>> members(clusters.modes.size());
  for (std::size_t i = 0; i < votes.size(); ++i)
    if (clusters.assignment[i]) members[*clusters.assignment[i]].push_back(votes[i].pixel);
  std::vector<InstanceCandidate> out;
  for (auto& m : members) {
    if (m.empty()) continue;
    out.push_back(make_candidate(std::move(m), labels, labels.width(), CandidateSource::hough));
  }
  return out;
}

}  // namespace bbf
