#include "bbfnet/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace bbf {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    kv.values_[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string KeyValues::get(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + it->second + "'");
  }
}

long long KeyValues::get_int(const std::string& key, long long fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    long long v = std::stoll(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + it->second + "'");
  }
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
  if (it->second == "false" || it->second == "0" || it->second == "no") return false;
  throw ConfigError("key '" + key + "': expected a boolean, got '" + it->second + "'");
}

void KeyValues::require_known(std::initializer_list<const char*> known) const {
  for (const auto& [key, value] : values_) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
      throw ConfigError("unknown config key '" + key + "'");
  }
}

ScorerChoice parse_scorer(const std::string& text) {
  ScorerChoice c;
  if (text == "oracle") return c;
  if (text.rfind("distance(", 0) == 0 && text.back() == ')') {
    c.kind = ScorerChoice::Kind::distance;
    try {
      c.tau = std::stod(text.substr(9, text.size() - 10));
    } catch (const std::exception&) {
      throw ConfigError("scorer: bad tau in '" + text + "'");
    }
    if (!(c.tau > 0)) throw ConfigError("scorer: tau must be positive");
    return c;
  }
  throw ConfigError("scorer must be 'oracle' or 'distance(tau)', got '" + text + "'");
}

std::string to_string(const ScorerChoice& choice) {
  if (choice.kind == ScorerChoice::Kind::oracle) return "oracle";
  std::ostringstream s;
  s << "distance(" << choice.tau << ")";
  return s.str();
}

void PipelineConfig::validate() const {
  if (!(bandwidth_B > 0)) throw ConfigError("bandwidth_B must be positive");
  for (double t : {conf_threshold, bbox_iou_threshold, triplet_threshold})
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("thresholds must lie in [0, 1]");
  if (min_cluster_size < 1) throw ConfigError("min_cluster_size must be >= 1");
  if (!(mode_merge_factor >= 0)) throw ConfigError("mode_merge_factor must be >= 0");
  if (mean_shift_max_iters < 1) throw ConfigError("mean_shift_max_iters must be >= 1");
  if (!(mean_shift_eps > 0)) throw ConfigError("mean_shift_eps must be positive");
  if (connectivity != 4) throw ConfigError("only 4-connectivity is supported");
}

PipelineConfig PipelineConfig::from(const KeyValues& kv) {
  kv.require_known({"bandwidth_B", "conf_threshold", "bbox_iou_threshold", "min_cluster_size",
                    "mode_merge_factor", "mean_shift_max_iters", "mean_shift_eps",
                    "triplet_threshold", "connectivity", "rng_seed", "hough_loss_sign", "scorer"});
  PipelineConfig c;
  c.bandwidth_B = kv.get_double("bandwidth_B", c.bandwidth_B);
  c.conf_threshold = kv.get_double("conf_threshold", c.conf_threshold);
  c.bbox_iou_threshold = kv.get_double("bbox_iou_threshold", c.bbox_iou_threshold);
  c.min_cluster_size = static_cast<int>(kv.get_int("min_cluster_size", c.min_cluster_size));
  c.mode_merge_factor = kv.get_double("mode_merge_factor", c.mode_merge_factor);
  c.mean_shift_max_iters =
      static_cast<int>(kv.get_int("mean_shift_max_iters", c.mean_shift_max_iters));
  c.mean_shift_eps = kv.get_double("mean_shift_eps", c.mean_shift_eps);
  c.triplet_threshold = kv.get_double("triplet_threshold", c.triplet_threshold);
  c.connectivity = static_cast<int>(kv.get_int("connectivity", c.connectivity));
  c.rng_seed = static_cast<std::uint64_t>(kv.get_int("rng_seed", 0));
  const auto sign = kv.get("hough_loss_sign", "paper");
  if (sign == "paper") c.hough_loss_sign = HoughLossSign::paper;
  else if (sign == "corrected") c.hough_loss_sign = HoughLossSign::corrected;
  else throw ConfigError("hough_loss_sign must be 'paper' or 'corrected'");
  c.scorer = parse_scorer(kv.get("scorer", "oracle"));
  c.validate();
  return c;
}

nlohmann::json PipelineConfig::to_json() const {
  return {{"bandwidth_B", bandwidth_B},
          {"conf_threshold", conf_threshold},
          {"bbox_iou_threshold", bbox_iou_threshold},
          {"min_cluster_size", min_cluster_size},
          {"mode_merge_factor", mode_merge_factor},
          {"mean_shift_max_iters", mean_shift_max_iters},
          {"mean_shift_eps", mean_shift_eps},
          {"triplet_threshold", triplet_threshold},
          {"connectivity", connectivity},
          {"rng_seed", rng_seed},
          {"hough_loss_sign", hough_loss_sign == HoughLossSign::paper ? "paper" : "corrected"},
          {"scorer", to_string(scorer)}};
}

void LossConfig::validate() const {
  for (double a : alphas)
    if (!(a > 0)) throw ConfigError("loss alphas must be positive");
  for (double w : watershed_weights)
    if (!(w > 0)) throw ConfigError("watershed weights must be positive");
  if (!(margin_alpha > 0)) throw ConfigError("margin_alpha must be positive");
  if (anchors_per_object < 1) throw ConfigError("anchors_per_object must be >= 1");
}

LossConfig LossConfig::from(const KeyValues& kv) {
  kv.require_known({"alpha1", "alpha2", "alpha3", "alpha4", "w0", "w1", "w2", "w3",
                    "margin_alpha", "anchors_per_object"});
  LossConfig c;
  for (int i = 0; i < 4; ++i) {
    c.alphas[i] = kv.get_double("alpha" + std::to_string(i + 1), c.alphas[i]);
    c.watershed_weights[i] = kv.get_double("w" + std::to_string(i), c.watershed_weights[i]);
  }
  c.margin_alpha = kv.get_double("margin_alpha", c.margin_alpha);
  c.anchors_per_object = static_cast<int>(kv.get_int("anchors_per_object", c.anchors_per_object));
  c.validate();
  return c;
}

nlohmann::json LossConfig::to_json() const {
  return {{"alphas", alphas},
          {"watershed_weights", watershed_weights},
          {"margin_alpha", margin_alpha},
          {"anchors_per_object", anchors_per_object}};
}

}  // namespace bbf
