#include "bbfnet/cli.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "bbfnet/bundle.hpp"
#include "bbfnet/config.hpp"
#include "bbfnet/fusion.hpp"
#include "bbfnet/losses.hpp"
#include "bbfnet/metrics.hpp"
#include "bbfnet/panoptic_io.hpp"
#include "bbfnet/synth.hpp"
#include "bbfnet/targets.hpp"
#include "bbfnet/tensor_io.hpp"
#include "bbfnet/triplet.hpp"

namespace bbf::cli {

namespace fs = std::filesystem;
using nlohmann::json;

int thread_count() {
  const char* env = std::getenv("BBF_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) return 1;
  return static_cast<int>(std::min<long>(n, 256));
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(std::max(n, 0)));
  auto run = [&](int i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  threads = std::max(1, std::min(threads, n));
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) run(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (int i = next++; i < n; i = next++) run(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

namespace {

class Stopwatch {
 public:
  void lap(const std::string& name) {
    const auto now = std::chrono::steady_clock::now();
    stages_[name] = stages_.value(name, 0.0) + std::chrono::duration<double>(now - start_).count();
    start_ = now;
  }
  const json& stages() const { return stages_; }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
  json stages_ = json::object();
};

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

struct Manifest {
  json j;

  explicit Manifest(const std::string& subcommand) {
    j["tool"] = "bbfnet";
    j["version"] = kVersion;
    j["subcommand"] = subcommand;
    j["inputs"] = json::object();
    j["outputs"] = json::array();
    j["seeds"] = json::object();
  }
  void write(const fs::path& dir, const Stopwatch& sw) {
    j["stage_seconds"] = sw.stages();
    j["created"] = utc_now();
    write_json(dir / "manifest.json", j);
  }
};

KeyValues load_kv(const std::string& path) {
  return path.empty() ? KeyValues{} : KeyValues::load(path);
}

PanopticResult gt_panoptic_of(const fs::path& dir) {
  if (fs::exists(dir / "panoptic.ppm")) return read_panoptic(dir);
  if (fs::exists(dir / "gt.bbft")) return read_scene(dir).panoptic();
  throw MissingFileError("no panoptic.ppm or gt.bbft in " + dir.string());
}

ClassCatalog catalog_near(const fs::path& a, const fs::path& b) {
  for (const auto& d : {a, b})
    if (fs::exists(d / "catalog.json")) return catalog_from_json(read_json(d / "catalog.json"));
  throw MissingFileError("missing catalog.json in " + a.string() + " and " + b.string());
}

std::unique_ptr<SameInstanceScorer> scorer_for(const PipelineConfig& config, const Bundle& b,
                                               const fs::path& dir) {
  if (config.scorer.kind == ScorerChoice::Kind::oracle && !b.gt)
    throw MissingFileError("oracle scorer needs gt.bbft in " + dir.string());
  return make_scorer(config.scorer, b.gt ? &b.gt->gt : nullptr);
}

// gen -------------------------------------------------------------------

int cmd_gen(const std::string& spec_path, const std::string& out_dir, int count,
            std::optional<std::uint64_t> seed, std::ostream& out) {
  Stopwatch sw;
  auto spec = SceneSpec::from(KeyValues::load(spec_path));
  if (seed) spec.seed = *seed;
  if (count < 1) throw std::invalid_argument("--count must be >= 1");
  const fs::path root(out_dir);
  fs::create_directories(root);

  auto scene_dir = [&](int i) {
    if (count == 1) return root;
    std::ostringstream n;
    n << "scene_" << std::setw(3) << std::setfill('0') << i;
    return root / n.str();
  };
  parallel_for(count, thread_count(), [&](int i) {
    SceneSpec s = spec;
    s.seed = spec.seed + static_cast<std::uint64_t>(i);
    Stopwatch local;
    const auto scene = generate_scene(s);
    write_scene(scene_dir(i), scene);
    local.lap("generate");
    if (count > 1) {
      Manifest m("gen");
      m.j["spec"] = s.to_json();
      m.j["seeds"]["scene"] = s.seed;
      m.j["outputs"] = {"catalog.json", "gt.bbft", "panoptic.ppm", "panoptic.json"};
      m.write(scene_dir(i), local);
    }
  });
  sw.lap("generate");

  Manifest m("gen");
  m.j["spec"] = spec.to_json();
  m.j["seeds"]["scene"] = spec.seed;
  m.j["count"] = count;
  m.j["inputs"]["spec"] = spec_path;
  if (count == 1) {
    m.j["outputs"] = {"catalog.json", "gt.bbft", "panoptic.ppm", "panoptic.json"};
  } else {
    for (int i = 0; i < count; ++i) m.j["outputs"].push_back(scene_dir(i).filename().string());
  }
  m.write(root, sw);
  out << "wrote " << count << " scene(s) to " << root.string() << '\n';
  return kOk;
}

// derive ----------------------------------------------------------------

int cmd_derive(const std::string& scene_path, const std::string& noise_path,
               const std::string& out_dir, std::optional<std::uint64_t> seed, std::ostream& out) {
  Stopwatch sw;
  auto noise = NoiseSpec::from(load_kv(noise_path));
  if (seed) noise.seed = *seed;
  const auto scene = read_scene(scene_path);
  sw.lap("read");
  auto heads = perturb(ideal_heads(scene), noise);
  sw.lap("derive");
  write_bundle(out_dir, heads, &scene);
  sw.lap("write");

  Manifest m("derive");
  m.j["noise"] = noise.to_json();
  m.j["seeds"]["noise"] = noise.seed;
  m.j["inputs"] = {{"scene", scene_path}, {"noise", noise_path}};
  m.j["outputs"] = {"catalog.json", "sem.bbft", "wtr.bbft", "hough.bbft", "feat.bbft", "gt.bbft"};
  m.write(out_dir, sw);
  out << "wrote bundle to " << out_dir << '\n';
  return kOk;
}

// infer -----------------------------------------------------------------

int cmd_infer(const std::string& bundle_path, const std::string& config_path,
              const std::string& heads_text, const std::string& out_dir, std::ostream& out) {
  Stopwatch sw;
  const auto config = PipelineConfig::from(load_kv(config_path));
  const auto heads = HeadSet::parse(heads_text);
  const auto bundle = read_bundle(bundle_path);
  const auto scorer = scorer_for(config, bundle, bundle_path);
  sw.lap("read");
  const auto res = ablation_pipeline(heads, bundle.heads, *scorer, config);
  sw.lap("pipeline");

  fs::create_directories(out_dir);
  write_panoptic(out_dir, res.result);
  write_json(fs::path(out_dir) / "trace.json", res.trace.to_json());
  write_json(fs::path(out_dir) / "catalog.json", catalog_to_json(bundle.heads.catalog));
  sw.lap("write");

  Manifest m("infer");
  m.j["config"] = config.to_json();
  m.j["heads"] = heads.name();
  m.j["seeds"]["pipeline"] = config.rng_seed;
  m.j["inputs"] = {{"bundle", bundle_path}, {"config", config_path}};
  m.j["outputs"] = {"panoptic.ppm", "panoptic.json", "trace.json", "catalog.json"};
  json pp = json::object();
  for (const auto& [name, secs] : res.trace.stage_seconds) pp[name] = secs;
  m.j["pipeline_stage_seconds"] = pp;
  m.write(out_dir, sw);
  out << "segments: " << res.result.segments.size() << " (things " << res.trace.final_things
      << ", stuff " << res.trace.final_stuff << ")\n";
  return kOk;
}

// eval ------------------------------------------------------------------

int cmd_eval(const std::string& pred_dir, const std::string& gt_dir, const std::string& out_file,
             std::ostream& out) {
  const auto catalog = catalog_near(gt_dir, pred_dir);
  const auto pred = read_panoptic(pred_dir);
  const auto gt = gt_panoptic_of(gt_dir);
  const auto report = compute_pq(match_segments(pred, gt), pred, gt, catalog);
  const auto table = PQReport::table_header() + report.table("result");
  if (!out_file.empty()) {
    const fs::path p(out_file);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    write_json(p, report.to_json());
    std::ofstream t(fs::path(p).replace_extension(".txt"));
    t << table;
  }
  out << table;
  return kOk;
}

// loss ------------------------------------------------------------------

struct LossTerms {
  LossValue semantic, hough, watershed, triplet, total;
  double triplet_ce = 0.0;
};

LossTerms evaluate_losses(const HeadOutputs& heads, const Scene& gt, const LossConfig& lc,
                          HoughLossSign sign, std::uint64_t seed) {
  LossTerms t;
  const auto levels = derive_watershed_targets(gt.gt);
  const auto hough_t = derive_hough_targets(gt.gt, gt.labels, gt.catalog);
  t.semantic = semantic_loss(heads.sem, gt.labels, heads.catalog);
  t.hough = hough_loss(HoughFields::from(heads.hough), hough_t, gt.gt, sign);
  t.watershed = watershed_loss(heads.wtr, levels, lc.watershed_weights);

  if (heads.embedding) {
    const auto samples =
        sample_triplet_anchors(gt.gt, gt.labels, levels, lc.anchors_per_object, seed);
    const auto& emb = *heads.embedding;
    const int w = emb.width();
    auto vec = [&](Pixel p) {
      auto s = emb.pixel(static_cast<std::size_t>(p.y) * w + p.x);
      return std::vector<double>(s.begin(), s.end());
    };
    std::vector<double> terms;
    std::vector<PairPrediction> pairs;
    const DistanceScorer scorer(0.5);
    for (const auto& s : samples) {
      if (!s.negative) continue;
      const auto a = vec(s.anchor), p = vec(s.positive), n = vec(*s.negative);
      terms.push_back(triplet_margin_loss(a, p, n, lc.margin_alpha).value);
      auto dist = [](const std::vector<double>& u, const std::vector<double>& v) {
        double d = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) d += (u[i] - v[i]) * (u[i] - v[i]);
        return std::sqrt(d);
      };
      pairs.push_back({scorer.score_distance(dist(a, p)), 1});
      pairs.push_back({scorer.score_distance(dist(a, n)), 0});
    }
    if (!terms.empty()) t.triplet.value = pairwise_sum(terms) / static_cast<double>(terms.size());
    if (!pairs.empty()) t.triplet_ce = triplet_ce_loss(pairs).value;
  }
  t.total = total_loss(t.semantic, t.hough, t.watershed, t.triplet, lc.alphas);
  return t;
}

// Central differences on randomly chosen interior entries of each head map.
json gradcheck(const HeadOutputs& heads, const Scene& gt, const LossConfig& lc, HoughLossSign sign,
               std::uint64_t seed) {
  constexpr double h = 1e-4;
  constexpr double tol = 1e-4;
  constexpr int kPerInput = 25;
  std::mt19937_64 rng(seed);
  const auto levels = derive_watershed_targets(gt.gt);
  const auto hough_t = derive_hough_targets(gt.gt, gt.labels, gt.catalog);

  int checked = 0;
  double worst = 0.0;
  auto compare = [&](double analytic, double numeric) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic - numeric) / scale);
    ++checked;
  };
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };

  {
    Image<double> probs = heads.sem.probs.cast<double>();
    const auto base = semantic_loss(probs, gt.labels, heads.catalog);
    const auto& g = base.gradient("probs");
    for (int k = 0; k < kPerInput; ++k) {
      const std::size_t i = pick(probs.values().size());
      const double v = probs.values()[i];
      if (v - h <= kProbClamp || v + h >= 1.0 - kProbClamp) continue;
      probs.values()[i] = v + h;
      const double up = semantic_loss(probs, gt.labels, heads.catalog).value;
      probs.values()[i] = v - h;
      const double down = semantic_loss(probs, gt.labels, heads.catalog).value;
      probs.values()[i] = v;
      compare(g.values()[i], (up - down) / (2 * h));
    }
  }
  {
    Image<double> probs = heads.wtr.probs.cast<double>();
    const auto base = watershed_loss(probs, levels, lc.watershed_weights);
    const auto& g = base.gradient("probs");
    for (int k = 0; k < kPerInput; ++k) {
      const std::size_t i = pick(probs.values().size());
      const double v = probs.values()[i];
      if (v - h <= kProbClamp || v + h >= 1.0 - kProbClamp) continue;
      probs.values()[i] = v + h;
      const double up = watershed_loss(probs, levels, lc.watershed_weights).value;
      probs.values()[i] = v - h;
      const double down = watershed_loss(probs, levels, lc.watershed_weights).value;
      probs.values()[i] = v;
      compare(g.values()[i], (up - down) / (2 * h));
    }
  }
  {
    HoughFields f = HoughFields::from(heads.hough);
    const auto base = hough_loss(f, hough_t, gt.gt, sign);
    std::vector<std::size_t> targeted;
    for (std::size_t p = 0; p < hough_t.channel.pixel_count(); ++p)
      if (hough_t.channel[p] >= 0) targeted.push_back(p * f.x_off.channels() + hough_t.channel[p]);
    const std::pair<const char*, Image<double>*> fields[] = {
        {"x_off", &f.x_off}, {"y_off", &f.y_off}, {"sigma_x", &f.sigma_x}, {"sigma_y", &f.sigma_y}};
    for (const auto& [name, img] : fields) {
      if (targeted.empty()) break;
      const auto& g = base.gradient(name);
      for (int k = 0; k < kPerInput; ++k) {
        const std::size_t i = targeted[pick(targeted.size())];
        const double v = img->values()[i];
        img->values()[i] = v + h;
        const double up = hough_loss(f, hough_t, gt.gt, sign).value;
        img->values()[i] = v - h;
        const double down = hough_loss(f, hough_t, gt.gt, sign).value;
        img->values()[i] = v;
        compare(g.values()[i], (up - down) / (2 * h));
      }
    }
  }
  return {{"checked", checked}, {"max_rel_error", worst}, {"tolerance", tol},
          {"passed", worst <= tol}};
}

int cmd_loss(const std::string& bundle_path, const std::string& targets_path,
             const std::string& config_path, const std::string& out_file, bool do_gradcheck,
             std::uint64_t seed, std::ostream& out) {
  auto kv = load_kv(config_path);
  std::string sign_text = kv.get("hough_loss_sign", "paper");
  KeyValues loss_kv;
  for (const auto& [k, v] : kv.entries())
    if (k != "hough_loss_sign") loss_kv.set(k, v);
  const auto lc = LossConfig::from(loss_kv);
  HoughLossSign sign;
  if (sign_text == "paper") sign = HoughLossSign::paper;
  else if (sign_text == "corrected") sign = HoughLossSign::corrected;
  else throw ConfigError("hough_loss_sign must be 'paper' or 'corrected'");

  const auto bundle = read_bundle(bundle_path);
  const auto gt = read_scene(targets_path);
  if (!gt.labels.same_extent(bundle.heads.sem.labels))
    throw std::invalid_argument("targets and bundle differ in size");
  const auto t = evaluate_losses(bundle.heads, gt, lc, sign, seed);
  json j = {{"semantic", t.semantic.value},   {"hough", t.hough.value},
            {"watershed", t.watershed.value}, {"triplet", t.triplet.value},
            {"triplet_ce", t.triplet_ce},     {"total", t.total.value},
            {"config", lc.to_json()},         {"hough_loss_sign", sign_text},
            {"seed", seed}};
  bool ok = true;
  if (do_gradcheck) {
    j["gradcheck"] = gradcheck(bundle.heads, gt, lc, sign, seed);
    ok = j["gradcheck"]["passed"].get<bool>();
  }
  const auto text = j.dump(2);
  if (!out_file.empty()) {
    std::ofstream f(out_file);
    f << text << '\n';
    if (!f) throw std::runtime_error("cannot write " + out_file);
  }
  out << text << '\n';
  return ok ? kOk : kDataError;
}

// ablate ----------------------------------------------------------------

std::vector<double> parse_sweep(const std::string& text) {
  std::vector<double> parts;
  std::stringstream s(text);
  std::string item;
  while (std::getline(s, item, ':')) parts.push_back(std::stod(item));
  if (parts.size() != 3 || !(parts[2] > 0) || !(parts[0] > 0) || parts[1] < parts[0])
    throw ConfigError("--sweep-B expects lo:hi:step with 0 < lo <= hi and step > 0");
  std::vector<double> out;
  for (int i = 0;; ++i) {
    const double b = parts[0] + i * parts[2];
    if (b > parts[1] + 1e-9) break;
    out.push_back(b);
  }
  return out;
}

PQReport run_suite(const std::vector<Bundle>& bundles, const std::vector<std::string>& paths,
                   const HeadSet& heads, const PipelineConfig& config) {
  std::vector<PanopticResult> preds(bundles.size());
  parallel_for(static_cast<int>(bundles.size()), thread_count(), [&](int i) {
    const auto scorer = scorer_for(config, bundles[i], paths[i]);
    preds[i] = ablation_pipeline(heads, bundles[i].heads, *scorer, config).result;
  });
  PQAccumulator acc(bundles.front().heads.catalog);
  for (std::size_t i = 0; i < bundles.size(); ++i) acc.add(preds[i], bundles[i].gt->panoptic());
  return acc.report();
}

int cmd_ablate(const std::vector<std::string>& bundle_paths, const std::string& heads_text,
               const std::string& config_path, const std::string& sweep, const std::string& out_dir,
               std::ostream& out) {
  Stopwatch sw;
  const auto config = PipelineConfig::from(load_kv(config_path));
  std::vector<HeadSet> sets;
  {
    std::stringstream s(heads_text);
    std::string item;
    while (std::getline(s, item, ',')) sets.push_back(HeadSet::parse(item));
  }
  if (sets.empty()) throw ConfigError("--heads is empty");
  std::vector<double> sweep_b;
  if (!sweep.empty()) sweep_b = parse_sweep(sweep);

  std::vector<Bundle> bundles;
  for (const auto& p : bundle_paths) {
    bundles.push_back(read_bundle(p));
    if (!bundles.back().gt) throw MissingFileError("missing gt.bbft in " + p);
    if (!(bundles.back().heads.catalog == bundles.front().heads.catalog))
      throw std::invalid_argument("bundles use different class catalogs");
  }
  sw.lap("read");

  json rows = json::array();
  std::string table = PQReport::table_header();
  for (const auto& hs : sets) {
    const auto r = run_suite(bundles, bundle_paths, hs, config);
    rows.push_back({{"heads", hs.name()}, {"report", r.to_json()}});
    table += r.table(hs.name());
  }
  sw.lap("ablation");

  json sweep_rows = json::array();
  if (!sweep_b.empty()) {
    table += "\nH-only bandwidth sweep\n" + PQReport::table_header();
    for (double b : sweep_b) {
      PipelineConfig c = config;
      c.bandwidth_B = b;
      const auto r = run_suite(bundles, bundle_paths, HeadSet::parse("H"), c);
      sweep_rows.push_back({{"B", b}, {"report", r.to_json()}});
      std::ostringstream name;
      name << "H B=" << b;
      table += r.table(name.str());
    }
    const auto ref = run_suite(bundles, bundle_paths, HeadSet::parse("WT"), config);
    table += ref.table("W+T (ref)");
    sweep_rows.push_back({{"reference", "W+T"}, {"report", ref.to_json()}});
    sw.lap("sweep");
  }

  fs::create_directories(out_dir);
  write_json(fs::path(out_dir) / "ablation.json",
             {{"config", config.to_json()}, {"bundles", bundle_paths}, {"rows", rows},
              {"sweep", sweep_rows}});
  {
    std::ofstream t(fs::path(out_dir) / "ablation.txt");
    t << table;
  }
  Manifest m("ablate");
  m.j["config"] = config.to_json();
  m.j["seeds"]["pipeline"] = config.rng_seed;
  m.j["inputs"] = {{"bundles", bundle_paths}, {"config", config_path}, {"heads", heads_text},
                   {"sweep_B", sweep}};
  m.j["outputs"] = {"ablation.json", "ablation.txt"};
  m.write(out_dir, sw);
  out << table;
  return kOk;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bounding-box-free panoptic segmentation toolkit", "bbfnet"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string spec, out_dir, scene, noise, bundle, config, heads = "WHT", pred, gt, out_file,
                                                           targets, sweep, ablate_heads;
  std::vector<std::string> bundles;
  int count = 1;
  std::optional<std::uint64_t> seed;
  std::uint64_t loss_seed = 0;
  bool grad = false;

  auto* gen = app.add_subcommand("gen", "Generate synthetic scenes");
  gen->add_option("--spec", spec, "Scene spec (key = value)")->required();
  gen->add_option("--out", out_dir, "Output directory")->required();
  gen->add_option("--count", count, "Number of scenes");
  gen->add_option("--seed", seed, "Override the spec seed");

  auto* derive = app.add_subcommand("derive", "Derive (noisy) head outputs from a scene");
  derive->add_option("--scene", scene, "Scene directory")->required();
  derive->add_option("--noise", noise, "Noise spec (key = value)");
  derive->add_option("--out", out_dir, "Output bundle directory")->required();
  derive->add_option("--seed", seed, "Override the noise seed");

  auto* infer = app.add_subcommand("infer", "Run instance fusion on a bundle");
  infer->add_option("--bundle", bundle, "Bundle directory")->required();
  infer->add_option("--config", config, "Pipeline config (key = value)");
  infer->add_option("--heads", heads, "Head subset, e.g. WHT or W+T");
  infer->add_option("--out", out_dir, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Panoptic quality of a prediction");
  eval->add_option("--pred", pred, "Prediction directory")->required();
  eval->add_option("--gt", gt, "Ground-truth scene or bundle directory")->required();
  eval->add_option("--out", out_file, "Report JSON path");

  auto* loss = app.add_subcommand("loss", "Evaluate training losses of a bundle");
  loss->add_option("--bundle", bundle, "Bundle directory")->required();
  loss->add_option("--targets", targets, "Scene directory with gt.bbft")->required();
  loss->add_option("--config", config, "Loss config (key = value)");
  loss->add_option("--out", out_file, "Write the JSON result here as well");
  loss->add_option("--seed", loss_seed, "Anchor sampling seed");
  loss->add_flag("--gradcheck", grad, "Compare gradients with central differences");

  auto* ablate = app.add_subcommand("ablate", "Compare head subsets over bundles");
  ablate->add_option("--bundle", bundles, "Bundle directory (repeatable)")->required();
  ablate->add_option("--heads", ablate_heads, "Comma-separated head sets, e.g. W,H,WT,WHT")
      ->required();
  ablate->add_option("--config", config, "Pipeline config (key = value)");
  ablate->add_option("--sweep-B", sweep, "H-only bandwidth sweep lo:hi:step");
  ablate->add_option("--out", out_dir, "Output directory")->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kOk;
    }
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen(spec, out_dir, count, seed, out);
    if (derive->parsed()) return cmd_derive(scene, noise, out_dir, seed, out);
    if (infer->parsed()) return cmd_infer(bundle, config, heads, out_dir, out);
    if (eval->parsed()) return cmd_eval(pred, gt, out_file, out);
    if (loss->parsed()) return cmd_loss(bundle, targets, config, out_file, grad, loss_seed, out);
    if (ablate->parsed()) return cmd_ablate(bundles, ablate_heads, config, sweep, out_dir, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  err << app.help();
  return kUsage;
}

}  // namespace bbf::cli
