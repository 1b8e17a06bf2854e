#include "bbfnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "bbfnet/targets.hpp"
#include "bbfnet/watershed.hpp"

namespace bbf {

void SceneSpec::validate() const {
  if (width < 1 || height < 1) throw ConfigError("scene size must be positive");
  if (min_instances < 0 || max_instances < min_instances)
    throw ConfigError("instance range must satisfy 0 <= min <= max");
  if (!rectangles && !ellipses) throw ConfigError("at least one shape kind is required");
  if (min_size < 1 || max_size < min_size) throw ConfigError("size range must satisfy 1 <= min <= max");
  if (max_size > width || max_size > height) throw ConfigError("max_size exceeds the image");
  if (n_stuff_classes < 1 || n_stuff_classes > height)
    throw ConfigError("n_stuff_classes must lie in [1, height]");
  if (n_thing_classes < 1) throw ConfigError("n_thing_classes must be >= 1");
  if (!(min_centroid_separation >= 0)) throw ConfigError("min_centroid_separation must be >= 0");
  if (!(min_visible_fraction >= 0 && min_visible_fraction <= 1))
    throw ConfigError("min_visible_fraction must lie in [0, 1]");
  if (max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
}

SceneSpec SceneSpec::from(const KeyValues& kv) {
  kv.require_known({"width", "height", "min_instances", "max_instances", "rectangles", "ellipses",
                    "min_size", "max_size", "n_thing_classes", "n_stuff_classes", "occlusion",
                    "min_centroid_separation", "min_visible_fraction", "single_core",
                    "max_attempts", "seed"});
  SceneSpec s;
  s.width = static_cast<int>(kv.get_int("width", s.width));
  s.height = static_cast<int>(kv.get_int("height", s.height));
  s.min_instances = static_cast<int>(kv.get_int("min_instances", s.min_instances));
  s.max_instances = static_cast<int>(kv.get_int("max_instances", s.max_instances));
  s.rectangles = kv.get_bool("rectangles", s.rectangles);
  s.ellipses = kv.get_bool("ellipses", s.ellipses);
  s.min_size = static_cast<int>(kv.get_int("min_size", s.min_size));
  s.max_size = static_cast<int>(kv.get_int("max_size", s.max_size));
  s.n_thing_classes = static_cast<int>(kv.get_int("n_thing_classes", s.n_thing_classes));
  s.n_stuff_classes = static_cast<int>(kv.get_int("n_stuff_classes", s.n_stuff_classes));
  s.occlusion = kv.get_bool("occlusion", s.occlusion);
  s.min_centroid_separation = kv.get_double("min_centroid_separation", s.min_centroid_separation);
  s.min_visible_fraction = kv.get_double("min_visible_fraction", s.min_visible_fraction);
  s.single_core = kv.get_bool("single_core", s.single_core);
  s.max_attempts = static_cast<int>(kv.get_int("max_attempts", s.max_attempts));
  s.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
  s.validate();
  return s;
}

nlohmann::json SceneSpec::to_json() const {
  return {{"width", width},
          {"height", height},
          {"min_instances", min_instances},
          {"max_instances", max_instances},
          {"rectangles", rectangles},
          {"ellipses", ellipses},
          {"min_size", min_size},
          {"max_size", max_size},
          {"n_thing_classes", n_thing_classes},
          {"n_stuff_classes", n_stuff_classes},
          {"occlusion", occlusion},
          {"min_centroid_separation", min_centroid_separation},
          {"min_visible_fraction", min_visible_fraction},
          {"single_core", single_core},
          {"max_attempts", max_attempts},
          {"seed", seed}};
}

namespace {

struct Placed {
  std::vector<int> pixels;  // painted, before occlusion
  std::uint32_t class_id = kVoidClass;
};

std::vector<int> rasterize(Shape shape, int x0, int y0, int sw, int sh, int width) {
  std::vector<int> px;
  px.reserve(static_cast<std::size_t>(sw) * sh);
  const double cx = x0 + sw / 2.0, cy = y0 + sh / 2.0;
  const double ax = sw / 2.0, ay = sh / 2.0;
  for (int y = y0; y < y0 + sh; ++y) {
    for (int x = x0; x < x0 + sw; ++x) {
      if (shape == Shape::ellipse) {
        const double dx = (x + 0.5 - cx) / ax, dy = (y + 0.5 - cy) / ay;
        if (dx * dx + dy * dy > 1.0) continue;
      }
      px.push_back(y * width + x);
    }
  }
  return px;
}

// Number of 4-connected regions per owner index.
std::vector<int> regions_per_owner(const Image<int>& owner, int n) {
  std::vector<int> regions(n, 0);
  Image<std::uint8_t> seen(owner.height(), owner.width());
  const int w = owner.width(), h = owner.height();
  std::vector<int> stack;
  for (int start = 0; start < static_cast<int>(owner.pixel_count()); ++start) {
    const int o = owner[start];
    if (o < 0 || seen[start]) continue;
    ++regions[o];
    seen[start] = 1;
    stack.push_back(start);
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      const int x = p % w, y = p / w;
      const int nb[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (const auto& q : nb) {
        if (q[0] < 0 || q[1] < 0 || q[0] >= w || q[1] >= h) continue;
        const int qi = q[1] * w + q[0];
        if (seen[qi] || owner[qi] != o) continue;
        seen[qi] = 1;
        stack.push_back(qi);
      }
    }
  }
  return regions;
}

bool constraints_hold(const SceneSpec& spec, const Image<int>& owner,
                      const std::vector<Placed>& placed) {
  const int n = static_cast<int>(placed.size());
  const int w = owner.width();
  std::vector<std::int64_t> area(n, 0);
  std::vector<double> sx(n, 0.0), sy(n, 0.0);
  for (int p = 0; p < static_cast<int>(owner.pixel_count()); ++p) {
    const int o = owner[p];
    if (o < 0) continue;
    ++area[o];
    sx[o] += p % w;
    sy[o] += p / w;
  }
  for (int i = 0; i < n; ++i) {
    const double painted = static_cast<double>(placed[i].pixels.size());
    if (spec.min_visible_fraction > 0 && area[i] < spec.min_visible_fraction * painted) return false;
  }
  if (spec.min_centroid_separation > 0) {
    const double min2 = spec.min_centroid_separation * spec.min_centroid_separation;
    for (int i = 0; i < n; ++i) {
      if (area[i] == 0) continue;
      for (int j = i + 1; j < n; ++j) {
        if (area[j] == 0) continue;
        const double dx = sx[i] / area[i] - sx[j] / area[j];
        const double dy = sy[i] / area[i] - sy[j] / area[j];
        if (dx * dx + dy * dy <= min2) return false;
      }
    }
  }
  if (spec.single_core) {
    const auto regions = regions_per_owner(owner, n);
    for (int i = 0; i < n; ++i)
      if (area[i] > 0 && regions[i] != 1) return false;
    InstanceMap ids{Image<std::uint32_t>(owner.height(), owner.width())};
    for (std::size_t p = 0; p < owner.pixel_count(); ++p)
      ids.ids[p] = owner[p] < 0 ? 0u : static_cast<std::uint32_t>(owner[p] + 1);
    const auto levels = derive_watershed_targets(ids);
    Image<std::uint8_t> core(owner.height(), owner.width());
    for (std::size_t p = 0; p < owner.pixel_count(); ++p) core[p] = levels[p] >= 1;
    const auto comps = label_components(core);
    // Cores of different instances never touch, so each component has one owner.
    // Labels appear in row-major first-pixel order.
    std::uint32_t last = 0;
    std::vector<int> cores(n, 0);
    for (std::size_t p = 0; p < owner.pixel_count(); ++p) {
      if (comps[p] > last) {
        last = comps[p];
        ++cores[owner[p]];
      }
    }
    for (int i = 0; i < n; ++i)
      if (cores[i] > 1) return false;
  }
  return true;
}

}  // namespace

Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const int w = spec.width, h = spec.height;

  Scene scene;
  scene.catalog = ClassCatalog::sequential(spec.n_stuff_classes, spec.n_thing_classes);

  // Horizontal stuff bands with distinct random cut rows.
  std::vector<int> cuts;
  {
    std::vector<int> rows(h - 1);
    for (int i = 0; i < h - 1; ++i) rows[i] = i + 1;
    std::shuffle(rows.begin(), rows.end(), rng);
    cuts.assign(rows.begin(), rows.begin() + (spec.n_stuff_classes - 1));
    std::sort(cuts.begin(), cuts.end());
  }

  const int n = std::uniform_int_distribution<int>(spec.min_instances, spec.max_instances)(rng);
  std::vector<Shape> kinds;
  if (spec.rectangles) kinds.push_back(Shape::rectangle);
  if (spec.ellipses) kinds.push_back(Shape::ellipse);

  Image<int> owner(h, w, 1, -1);
  std::vector<Placed> placed;
  int attempts = 0;
  for (int i = 0; i < n; ++i) {
    for (;;) {
      if (++attempts > spec.max_attempts)
        throw InfeasibleSceneError("scene spec infeasible after " +
                                   std::to_string(spec.max_attempts) + " placement attempts");
      const Shape kind = kinds[std::uniform_int_distribution<std::size_t>(0, kinds.size() - 1)(rng)];
      std::uniform_int_distribution<int> size(spec.min_size, spec.max_size);
      const int sw = size(rng), sh = size(rng);
      const int x0 = std::uniform_int_distribution<int>(0, w - sw)(rng);
      const int y0 = std::uniform_int_distribution<int>(0, h - sh)(rng);
      const auto cls = scene.catalog.thing_classes()[std::uniform_int_distribution<std::size_t>(
          0, scene.catalog.thing_classes().size() - 1)(rng)];
      auto px = rasterize(kind, x0, y0, sw, sh, w);
      if (!spec.occlusion &&
          std::any_of(px.begin(), px.end(), [&](int p) { return owner[p] >= 0; }))
        continue;
      Image<int> trial = owner;
      for (int p : px) trial[p] = i;
      placed.push_back({std::move(px), cls});
      if (constraints_hold(spec, trial, placed)) {
        owner = std::move(trial);
        break;
      }
      placed.pop_back();
    }
  }

  // Dense ids in paint order over the instances that are still visible.
  std::vector<std::int64_t> area(placed.size(), 0);
  for (std::size_t p = 0; p < owner.pixel_count(); ++p)
    if (owner[p] >= 0) ++area[owner[p]];
  std::vector<std::uint32_t> dense(placed.size(), 0);
  std::uint32_t next = 1;
  for (std::size_t i = 0; i < placed.size(); ++i)
    if (area[i] > 0) dense[i] = next++;

  scene.gt.ids = Image<std::uint32_t>(h, w);
  scene.labels = ClassMap(h, w);
  for (int y = 0; y < h; ++y) {
    const auto band = std::upper_bound(cuts.begin(), cuts.end(), y) - cuts.begin();
    const auto stuff = scene.catalog.stuff_classes()[band];
    for (int x = 0; x < w; ++x) {
      const int o = owner.at(y, x);
      if (o >= 0) {
        scene.gt.ids.at(y, x) = dense[o];
        scene.labels.at(y, x) = placed[o].class_id;
      } else {
        scene.labels.at(y, x) = stuff;
      }
    }
  }
  return scene;
}

HeadOutputs ideal_heads(const Scene& scene, bool with_embedding) {
  const auto& cat = scene.catalog;
  const int h = scene.labels.height(), w = scene.labels.width();
  HeadOutputs out;
  out.catalog = cat;

  Image<float> probs(h, w, cat.num_classes(), 0.0f);
  for (std::size_t p = 0; p < probs.pixel_count(); ++p) {
    const int ch = cat.channel_of(scene.labels[p]);
    if (ch < 0) throw std::invalid_argument("ideal_heads: label outside the catalog");
    probs.at_index(p, ch) = 1.0f;
  }
  out.sem = SemanticPrediction::from_probs(std::move(probs), cat);
  out.wtr = WatershedPrediction::one_hot(derive_watershed_targets(scene.gt));

  const auto targets = derive_hough_targets(scene.gt, scene.labels, cat);
  const int t = cat.num_things();
  out.hough.x_off = Image<float>(h, w, t, 0.0f);
  out.hough.y_off = Image<float>(h, w, t, 0.0f);
  out.hough.sigma_x = Image<float>(h, w, t, 1.0f);
  out.hough.sigma_y = Image<float>(h, w, t, 1.0f);
  for (std::size_t p = 0; p < targets.channel.pixel_count(); ++p) {
    const int ch = targets.channel[p];
    if (ch < 0) continue;
    out.hough.x_off.at_index(p, ch) = static_cast<float>(targets.x_off[p]);
    out.hough.y_off.at_index(p, ch) = static_cast<float>(targets.y_off[p]);
  }

  if (!with_embedding) return out;
  constexpr int kDim = 128;
  const float unit = static_cast<float>(1.0 / std::sqrt(static_cast<double>(kDim)));
  Image<float> emb(h, w, kDim, 0.0f);
  for (std::size_t p = 0; p < emb.pixel_count(); ++p) {
    const auto id = scene.gt.ids[p];
    if (id == 0) continue;
    auto e = emb.pixel(p);
    std::fill(e.begin(), e.end(), static_cast<float>(id) * unit);
  }
  out.embedding = std::move(emb);
  return out;
}

void NoiseSpec::validate() const {
  for (double p : {class_flip_p, level_flip_p})
    if (!(p >= 0 && p <= 1)) throw ConfigError("flip probabilities must lie in [0, 1]");
  for (double s : {prob_temperature, offset_sigma, sigma_jitter, embedding_sigma})
    if (!(s >= 0)) throw ConfigError("noise scales must be >= 0");
}

bool NoiseSpec::is_zero() const {
  return class_flip_p == 0 && prob_temperature == 0 && level_flip_p == 0 && offset_sigma == 0 &&
         sigma_jitter == 0 && embedding_sigma == 0;
}

NoiseSpec NoiseSpec::from(const KeyValues& kv) {
  kv.require_known({"class_flip_p", "prob_temperature", "level_flip_p", "offset_sigma",
                    "sigma_jitter", "embedding_sigma", "seed"});
  NoiseSpec n;
  n.class_flip_p = kv.get_double("class_flip_p", 0.0);
  n.prob_temperature = kv.get_double("prob_temperature", 0.0);
  n.level_flip_p = kv.get_double("level_flip_p", 0.0);
  n.offset_sigma = kv.get_double("offset_sigma", 0.0);
  n.sigma_jitter = kv.get_double("sigma_jitter", 0.0);
  n.embedding_sigma = kv.get_double("embedding_sigma", 0.0);
  n.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
  n.validate();
  return n;
}

nlohmann::json NoiseSpec::to_json() const {
  return {{"class_flip_p", class_flip_p},     {"prob_temperature", prob_temperature},
          {"level_flip_p", level_flip_p},     {"offset_sigma", offset_sigma},
          {"sigma_jitter", sigma_jitter},     {"embedding_sigma", embedding_sigma},
          {"seed", seed}};
}

HeadOutputs perturb(HeadOutputs heads, const NoiseSpec& noise) {
  noise.validate();
  if (noise.is_zero()) return heads;
  std::mt19937_64 rng(noise.seed);
  const auto& cat = heads.catalog;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  if (noise.class_flip_p > 0 && cat.num_classes() > 1) {
    auto probs = std::move(heads.sem.probs);
    const int c = probs.channels();
    for (std::size_t p = 0; p < probs.pixel_count(); ++p) {
      if (!(unit(rng) < noise.class_flip_p)) continue;
      const int cur = cat.channel_of(heads.sem.labels[p]);
      int other = std::uniform_int_distribution<int>(0, c - 2)(rng);
      if (other >= cur) ++other;
      std::swap(probs.at_index(p, cur), probs.at_index(p, other));
    }
    heads.sem = SemanticPrediction::from_probs(std::move(probs), cat);
  }

  if (noise.prob_temperature > 0) {
    auto probs = std::move(heads.sem.probs);
    for (std::size_t p = 0; p < probs.pixel_count(); ++p) {
      auto v = probs.pixel(p);
      const float mx = *std::max_element(v.begin(), v.end());
      double s = 0.0;
      for (auto& x : v) {
        x = static_cast<float>(std::exp((x - mx) / noise.prob_temperature));
        s += x;
      }
      for (auto& x : v) x = static_cast<float>(x / s);
    }
    heads.sem = SemanticPrediction::from_probs(std::move(probs), cat);
  }

  if (noise.level_flip_p > 0) {
    auto probs = std::move(heads.wtr.probs);
    for (std::size_t p = 0; p < probs.pixel_count(); ++p) {
      if (!(unit(rng) < noise.level_flip_p)) continue;
      const int cur = heads.wtr.levels[p];
      int next = unit(rng) < 0.5 ? cur - 1 : cur + 1;
      if (next < 0) next = 1;
      if (next >= kWatershedLevels) next = kWatershedLevels - 2;
      std::swap(probs.at_index(p, cur), probs.at_index(p, next));
    }
    heads.wtr = WatershedPrediction::from_probs(std::move(probs));
  }

  if (noise.offset_sigma > 0) {
    std::normal_distribution<double> g(0.0, noise.offset_sigma);
    constexpr float lim = 1.0f - 1e-6f;
    for (auto* img : {&heads.hough.x_off, &heads.hough.y_off})
      for (auto& v : img->values()) v = std::clamp(static_cast<float>(v + g(rng)), -lim, lim);
  }

  if (noise.sigma_jitter > 0) {
    std::normal_distribution<double> g(0.0, noise.sigma_jitter);
    for (auto* img : {&heads.hough.sigma_x, &heads.hough.sigma_y})
      for (auto& v : img->values())
        v = std::max(static_cast<float>(v * std::exp(g(rng))), 1e-6f);
  }

  if (noise.embedding_sigma > 0 && heads.embedding) {
    std::normal_distribution<double> g(0.0, noise.embedding_sigma);
    for (auto& v : heads.embedding->values()) v = static_cast<float>(v + g(rng));
  }
  return heads;
}

}  // namespace bbf
