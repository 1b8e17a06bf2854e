#include "bbfnet/losses.hpp"

#include <algorithm>
#include <cmath>

namespace bbf {

namespace {

// The argument of every log is floored at kProbClamp, so a certain correct
// prediction costs exactly 0.
double clamp_prob(double p) { return std::max(p, kProbClamp); }

// d/dp of log(clamp(p)); zero where the floor is active.
double dlog_clamped(double p) { return p < kProbClamp ? 0.0 : 1.0 / p; }

}  // namespace

const Image<double>& LossValue::gradient(const std::string& name) const {
  for (const auto& g : gradients)
    if (g.name == name) return g.values;
  throw std::out_of_range("no gradient named " + name);
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

HoughFields HoughFields::from(const HoughPrediction& pred) {
  return {pred.x_off.cast<double>(), pred.y_off.cast<double>(), pred.sigma_x.cast<double>(),
          pred.sigma_y.cast<double>()};
}

LossValue semantic_loss(const Image<double>& probs, const ClassMap& gt_labels,
                        const ClassCatalog& catalog) {
  if (!probs.same_extent(gt_labels) || probs.channels() != catalog.num_classes())
    throw LossError("semantic_loss: shape mismatch");
  std::vector<double> terms;
  terms.reserve(probs.pixel_count());
  std::vector<std::size_t> counted;
  for (std::size_t p = 0; p < probs.pixel_count(); ++p) {
    const auto cls = gt_labels[p];
    if (cls == kVoidClass) continue;
    const int ch = catalog.channel_of(cls);
    if (ch < 0) throw LossError("semantic_loss: label outside catalog");
    const double pg = probs.at_index(p, ch);
    if (!(pg > 0.0)) throw LossError("semantic_loss: non-finite loss (p_gt <= 0)");
    terms.push_back(-std::log(clamp_prob(pg)));
    counted.push_back(p);
  }
  LossValue out;
  Image<double> grad(probs.height(), probs.width(), probs.channels(), 0.0);
  if (counted.empty()) {
    out.gradients.push_back({"probs", std::move(grad)});
    return out;
  }
  const double n = static_cast<double>(counted.size());
  out.value = pairwise_sum(terms) / n;
  for (std::size_t p : counted) {
    const int ch = catalog.channel_of(gt_labels[p]);
    grad.at_index(p, ch) = -dlog_clamped(probs.at_index(p, ch)) / n;
  }
  out.gradients.push_back({"probs", std::move(grad)});
  return out;
}

LossValue semantic_loss(const SemanticPrediction& pred, const ClassMap& gt_labels,
                        const ClassCatalog& catalog) {
  return semantic_loss(pred.probs.cast<double>(), gt_labels, catalog);
}

LossValue hough_loss(const HoughFields& pred, const HoughTargets& targets, const InstanceMap& gt,
                     HoughLossSign sign) {
  const int h = pred.x_off.height();
  const int w = pred.x_off.width();
  const int c = pred.x_off.channels();
  for (const auto* img : {&pred.y_off, &pred.sigma_x, &pred.sigma_y})
    if (!img->same_extent(pred.x_off) || img->channels() != c)
      throw LossError("hough_loss: prediction maps disagree in shape");
  if (!targets.x_off.same_extent(pred.x_off) || !gt.ids.same_extent(pred.x_off))
    throw LossError("hough_loss: target shape mismatch");

  // Pixels per instance among those carrying a target.
  const std::uint32_t n_ids = gt.count();
  std::vector<std::int64_t> size(n_ids + 1, 0);
  for (std::size_t p = 0; p < gt.ids.pixel_count(); ++p)
    if (targets.channel[p] >= 0 && gt.ids[p] > 0) ++size[gt.ids[p]];
  const auto n_inst = std::count_if(size.begin() + 1, size.end(), [](auto s) { return s > 0; });

  LossValue out;
  Image<double> gx(h, w, c, 0.0), gy(h, w, c, 0.0), gsx(h, w, c, 0.0), gsy(h, w, c, 0.0);
  std::vector<double> terms;
  const double s = sign == HoughLossSign::paper ? -0.5 : 0.5;
  for (std::size_t p = 0; p < gt.ids.pixel_count(); ++p) {
    const int ch = targets.channel[p];
    const auto id = gt.ids[p];
    if (ch < 0 || id == 0) continue;
    if (ch >= c) throw LossError("hough_loss: target channel out of range");
    const double sx = pred.sigma_x.at_index(p, ch);
    const double sy = pred.sigma_y.at_index(p, ch);
    if (!(sx > 0.0 && sy > 0.0)) throw LossError("hough_loss: non-positive sigma");
    const double wp = 1.0 / (static_cast<double>(size[id]) * static_cast<double>(n_inst));
    const double dx = targets.x_off[p] - pred.x_off.at_index(p, ch);
    const double dy = targets.y_off[p] - pred.y_off.at_index(p, ch);
    terms.push_back(wp * (dx * dx / sx + dy * dy / sy + s * (std::log(sx) + std::log(sy))));
    gx.at_index(p, ch) = -2.0 * wp * dx / sx;
    gy.at_index(p, ch) = -2.0 * wp * dy / sy;
    gsx.at_index(p, ch) = wp * (-dx * dx / (sx * sx) + s / sx);
    gsy.at_index(p, ch) = wp * (-dy * dy / (sy * sy) + s / sy);
  }
  out.value = pairwise_sum(terms);
  out.gradients.push_back({"x_off", std::move(gx)});
  out.gradients.push_back({"y_off", std::move(gy)});
  out.gradients.push_back({"sigma_x", std::move(gsx)});
  out.gradients.push_back({"sigma_y", std::move(gsy)});
  return out;
}

LossValue watershed_loss(const Image<double>& probs, const LevelMap& gt_levels,
                         const std::array<double, 4>& weights) {
  if (!probs.same_extent(gt_levels) || probs.channels() != kWatershedLevels)
    throw LossError("watershed_loss: shape mismatch");
  const std::size_t n = probs.pixel_count();
  LossValue out;
  Image<double> grad(probs.height(), probs.width(), kWatershedLevels, 0.0);
  if (n == 0) {
    out.gradients.push_back({"probs", std::move(grad)});
    return out;
  }
  std::vector<double> terms(n);
  for (std::size_t p = 0; p < n; ++p) {
    const int k = gt_levels[p];
    if (k < 0 || k >= kWatershedLevels) throw LossError("watershed_loss: level outside [0, 3]");
    const double pk = probs.at_index(p, k);
    if (!(pk > 0.0)) throw LossError("watershed_loss: zero probability at ground-truth level");
    terms[p] = -weights[k] * std::log(clamp_prob(pk));
    grad.at_index(p, k) = -weights[k] * dlog_clamped(pk) / static_cast<double>(n);
  }
  out.value = pairwise_sum(terms) / static_cast<double>(n);
  out.gradients.push_back({"probs", std::move(grad)});
  return out;
}

LossValue watershed_loss(const WatershedPrediction& pred, const LevelMap& gt_levels,
                         const std::array<double, 4>& weights) {
  return watershed_loss(pred.probs.cast<double>(), gt_levels, weights);
}

LossValue triplet_margin_loss(std::span<const double> anchor, std::span<const double> positive,
                              std::span<const double> negative, double margin) {
  const std::size_t n = anchor.size();
  if (positive.size() != n || negative.size() != n)
    throw LossError("triplet_margin_loss: feature lengths differ");
  std::vector<double> dp(n), dn(n);
  for (std::size_t i = 0; i < n; ++i) {
    dp[i] = (anchor[i] - positive[i]) * (anchor[i] - positive[i]);
    dn[i] = (anchor[i] - negative[i]) * (anchor[i] - negative[i]);
  }
  const double arg = pairwise_sum(dp) - pairwise_sum(dn) + margin;
  LossValue out;
  const int len = static_cast<int>(n);
  Image<double> ga(1, len, 1, 0.0), gp(1, len, 1, 0.0), gn(1, len, 1, 0.0);
  if (arg > 0.0) {
    out.value = arg;
    for (std::size_t i = 0; i < n; ++i) {
      ga[i] = 2.0 * (negative[i] - positive[i]);
      gp[i] = -2.0 * (anchor[i] - positive[i]);
      gn[i] = 2.0 * (anchor[i] - negative[i]);
    }
  }
  out.gradients.push_back({"f_a", std::move(ga)});
  out.gradients.push_back({"f_p", std::move(gp)});
  out.gradients.push_back({"f_n", std::move(gn)});
  return out;
}

LossValue triplet_ce_loss(std::span<const PairPrediction> pairs) {
  LossValue out;
  const int n = static_cast<int>(pairs.size());
  Image<double> grad(1, std::max(n, 0), 1, 0.0);
  if (n == 0) {
    out.gradients.push_back({"p_same", std::move(grad)});
    return out;
  }
  std::vector<double> terms(n);
  for (int i = 0; i < n; ++i) {
    const double p = pairs[i].p_same;
    const int label = pairs[i].label;
    if (!(p >= 0.0 && p <= 1.0)) throw LossError("triplet_ce_loss: probability outside [0, 1]");
    if (label != 0 && label != 1) throw LossError("triplet_ce_loss: label must be 0 or 1");
    // Both ends are clamped here so that p = 0 and p = 1 stay finite either way.
    const double pc = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
    const bool active = pc == p;
    if (label == 1) {
      terms[i] = -std::log(pc);
      grad[i] = active ? -1.0 / (p * n) : 0.0;
    } else {
      terms[i] = -std::log(1.0 - pc);
      grad[i] = active ? 1.0 / ((1.0 - p) * n) : 0.0;
    }
  }
  out.value = pairwise_sum(terms) / n;
  out.gradients.push_back({"p_same", std::move(grad)});
  return out;
}

LossValue total_loss(const LossValue& semantic, const LossValue& hough, const LossValue& watershed,
                     const LossValue& triplet, const std::array<double, 4>& alphas) {
  const LossValue* parts[4] = {&semantic, &hough, &watershed, &triplet};
  const char* prefix[4] = {"ss/", "hgh/", "wtr/", "trp/"};
  LossValue out;
  for (int i = 0; i < 4; ++i) {
    if (!std::isfinite(parts[i]->value)) throw LossError("total_loss: non-finite component");
    out.value += alphas[i] * parts[i]->value;
    for (const auto& g : parts[i]->gradients) {
      Image<double> scaled = g.values;
      for (double& v : scaled.values()) v *= alphas[i];
      out.gradients.push_back({prefix[i] + g.name, std::move(scaled)});
    }
  }
  return out;
}

}  // namespace bbf
