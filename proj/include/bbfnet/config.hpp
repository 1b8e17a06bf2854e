#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace bbf {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` text; `#` starts a comment. Unknown keys are reported
/// by the typed parsers below.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text);
  static KeyValues load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  const std::map<std::string, std::string>& entries() const noexcept { return values_; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  /// Throws ConfigError naming the first key not in `known`.
  void require_known(std::initializer_list<const char*> known) const;

 private:
  std::map<std::string, std::string> values_;
};

enum class HoughLossSign { paper, corrected };

struct ScorerChoice {
  enum class Kind { oracle, distance } kind = Kind::oracle;
  double tau = 0.5;
};

struct PipelineConfig {
  double bandwidth_B = 10.0;        // pixels at pipeline resolution
  double conf_threshold = 0.65;
  double bbox_iou_threshold = 0.1;
  int min_cluster_size = 4;
  double mode_merge_factor = 0.5;   // modes closer than factor * B merge
  int mean_shift_max_iters = 100;
  double mean_shift_eps = 1e-3;     // pixels
  double triplet_threshold = 0.5;
  int connectivity = 4;
  std::uint64_t rng_seed = 0;
  HoughLossSign hough_loss_sign = HoughLossSign::paper;
  ScorerChoice scorer;

  /// Throws ConfigError when a field is out of range.
  void validate() const;
  static PipelineConfig from(const KeyValues& kv);
  nlohmann::json to_json() const;
};

struct LossConfig {
  std::array<double, 4> alphas = {1.0, 0.1, 1.0, 0.5};
  std::array<double, 4> watershed_weights = {0.2, 0.1, 0.05, 0.01};
  double margin_alpha = 0.5;
  int anchors_per_object = 1000;

  void validate() const;
  static LossConfig from(const KeyValues& kv);
  nlohmann::json to_json() const;
};

ScorerChoice parse_scorer(const std::string& text);
std::string to_string(const ScorerChoice& choice);

}  // namespace bbf
