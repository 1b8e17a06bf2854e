#include "bbfnet/bundle.hpp"

#include <fstream>

#include "bbfnet/panoptic_io.hpp"
#include "bbfnet/tensor_io.hpp"

namespace bbf {

namespace fs = std::filesystem;

nlohmann::json catalog_to_json(const ClassCatalog& catalog) {
  return {{"stuff", catalog.stuff_classes()}, {"things", catalog.thing_classes()}};
}

ClassCatalog catalog_from_json(const nlohmann::json& j) {
  try {
    return ClassCatalog(j.at("stuff").get<std::vector<std::uint32_t>>(),
                        j.at("things").get<std::vector<std::uint32_t>>());
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("catalog: ") + e.what());
  }
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFileError("missing " + path.filename().string() + " in " +
                                  path.parent_path().string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

namespace {

fs::path require(const fs::path& dir, const char* name) {
  const auto p = dir / name;
  if (!fs::exists(p)) throw MissingFileError("missing " + std::string(name) + " in " + dir.string());
  return p;
}

void write_gt(const fs::path& path, const Scene& scene) {
  const int h = scene.labels.height(), w = scene.labels.width();
  Image<std::uint32_t> gt(h, w, 2);
  for (std::size_t p = 0; p < gt.pixel_count(); ++p) {
    gt.at_index(p, 0) = scene.labels[p];
    gt.at_index(p, 1) = scene.gt.ids[p];
  }
  write_tensor(path, to_tensor(gt));
}

Scene read_gt(const fs::path& path, ClassCatalog catalog) {
  const auto gt = to_image<std::uint32_t>(read_tensor(path));
  if (gt.channels() != 2) throw TensorError(TensorErrc::shape_mismatch, "gt.bbft must be H x W x 2");
  Scene s;
  s.catalog = std::move(catalog);
  s.labels = ClassMap(gt.height(), gt.width());
  s.gt.ids = Image<std::uint32_t>(gt.height(), gt.width());
  for (std::size_t p = 0; p < gt.pixel_count(); ++p) {
    s.labels[p] = gt.at_index(p, 0);
    s.gt.ids[p] = gt.at_index(p, 1);
  }
  return s;
}

}  // namespace

void write_scene(const fs::path& dir, const Scene& scene) {
  fs::create_directories(dir);
  write_json(dir / "catalog.json", catalog_to_json(scene.catalog));
  write_gt(dir / "gt.bbft", scene);
  write_panoptic(dir, scene.panoptic());
}

Scene read_scene(const fs::path& dir) {
  auto catalog = catalog_from_json(read_json(require(dir, "catalog.json")));
  return read_gt(require(dir, "gt.bbft"), std::move(catalog));
}

void write_bundle(const fs::path& dir, const HeadOutputs& heads, const Scene* gt) {
  heads.validate();
  fs::create_directories(dir);
  write_json(dir / "catalog.json", catalog_to_json(heads.catalog));
  write_tensor(dir / "sem.bbft", to_tensor(heads.sem.probs));
  write_tensor(dir / "wtr.bbft", to_tensor(heads.wtr.probs));

  const auto& hg = heads.hough;
  const int t = hg.channels();
  Image<float> packed(hg.height(), hg.width(), 4 * t);
  for (std::size_t p = 0; p < packed.pixel_count(); ++p) {
    for (int c = 0; c < t; ++c) {
      packed.at_index(p, 4 * c + 0) = hg.x_off.at_index(p, c);
      packed.at_index(p, 4 * c + 1) = hg.y_off.at_index(p, c);
      packed.at_index(p, 4 * c + 2) = hg.sigma_x.at_index(p, c);
      packed.at_index(p, 4 * c + 3) = hg.sigma_y.at_index(p, c);
    }
  }
  write_tensor(dir / "hough.bbft", to_tensor(packed));
  if (heads.embedding) write_tensor(dir / "feat.bbft", to_tensor(*heads.embedding));
  if (gt) write_gt(dir / "gt.bbft", *gt);
}

Bundle read_bundle(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw MissingFileError("bundle directory not found: " + dir.string());
  Bundle b;
  auto& heads = b.heads;
  heads.catalog = catalog_from_json(read_json(require(dir, "catalog.json")));
  const auto sem_path = require(dir, "sem.bbft");
  const auto wtr_path = require(dir, "wtr.bbft");
  const auto hough_path = require(dir, "hough.bbft");

  heads.sem = SemanticPrediction::from_probs(to_image<float>(read_tensor(sem_path)), heads.catalog);
  heads.wtr = WatershedPrediction::from_probs(to_image<float>(read_tensor(wtr_path)));

  const auto packed = to_image<float>(read_tensor(hough_path));
  if (packed.channels() % 4 != 0)
    throw TensorError(TensorErrc::shape_mismatch, "hough.bbft depth must be a multiple of 4");
  const int t = packed.channels() / 4;
  const int h = packed.height(), w = packed.width();
  auto& hg = heads.hough;
  hg.x_off = Image<float>(h, w, t);
  hg.y_off = Image<float>(h, w, t);
  hg.sigma_x = Image<float>(h, w, t);
  hg.sigma_y = Image<float>(h, w, t);
  for (std::size_t p = 0; p < packed.pixel_count(); ++p) {
    for (int c = 0; c < t; ++c) {
      hg.x_off.at_index(p, c) = packed.at_index(p, 4 * c + 0);
      hg.y_off.at_index(p, c) = packed.at_index(p, 4 * c + 1);
      hg.sigma_x.at_index(p, c) = packed.at_index(p, 4 * c + 2);
      hg.sigma_y.at_index(p, c) = packed.at_index(p, 4 * c + 3);
    }
  }
  if (fs::exists(dir / "feat.bbft"))
    heads.embedding = to_image<float>(read_tensor(dir / "feat.bbft"));
  heads.validate();
  if (fs::exists(dir / "gt.bbft")) {
    b.gt = read_gt(dir / "gt.bbft", heads.catalog);
    if (!b.gt->labels.same_extent(heads.sem.labels))
      throw TensorError(TensorErrc::shape_mismatch, "gt.bbft differs in size from the heads");
  }
  return b;
}

}  // namespace bbf
