#pragma once

// Directory layouts shared by the command-line tools.
//
// Scene directory:   catalog.json, gt.bbft (H x W x 2 u32: class, instance),
//                    panoptic.ppm + panoptic.json
// Bundle directory:  catalog.json, sem.bbft (H x W x C), wtr.bbft (H x W x 4),
//                    hough.bbft (H x W x 4T, channel 4t + {x, y, sigma_x, sigma_y}),
//                    optional feat.bbft (H x W x 128) and gt.bbft

#include <filesystem>
#include <optional>
#include <stdexcept>

#include <json.hpp>

#include "bbfnet/maps.hpp"
#include "bbfnet/synth.hpp"

namespace bbf {

class MissingFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json catalog_to_json(const ClassCatalog& catalog);
ClassCatalog catalog_from_json(const nlohmann::json& j);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

void write_scene(const std::filesystem::path& dir, const Scene& scene);
Scene read_scene(const std::filesystem::path& dir);

struct Bundle {
  HeadOutputs heads;
  std::optional<Scene> gt;
};

void write_bundle(const std::filesystem::path& dir, const HeadOutputs& heads,
                  const Scene* gt = nullptr);
/// Throws MissingFileError naming the first required file that is absent.
Bundle read_bundle(const std::filesystem::path& dir);

}  // namespace bbf
