#pragma once

#include <array>
#include <cstdint>

#include "bbfnet/maps.hpp"

namespace bbf {

/// Exact squared Euclidean distance from every pixel to the nearest pixel
/// where `feature` is nonzero (Felzenszwalb-Huttenlocher lower envelope).
/// Pixels with no feature anywhere get a large sentinel.
Image<double> squared_distance_transform(const Image<std::uint8_t>& feature);

struct WatershedThresholds {
  std::array<double, 3> bounds = {2.0, 5.0, 15.0};
};

/// Quantized distance-to-boundary level of each instance pixel:
/// d <= 2 -> 0, d <= 5 -> 1, d <= 15 -> 2, else 3. Distance is to the nearest
/// pixel outside the instance, where pixels beyond the image border count as
/// outside. Non-instance pixels get level 0.
LevelMap derive_watershed_targets(const InstanceMap& gt, const WatershedThresholds& thresholds = {});

/// Center-offset regression targets. Offsets are written for thing pixels of
/// an instance; `channel` holds the thing index of the pixel's class, or -1
/// where the pixel carries no target.
struct HoughTargets {
  Image<double> x_off;
  Image<double> y_off;
  Image<int> channel;
};

/// Offset = centroid of the visible instance mask minus the pixel, both in
/// pixel-center normalized coordinates.
HoughTargets derive_hough_targets(const InstanceMap& gt, const ClassMap& labels,
                                  const ClassCatalog& catalog);

}  // namespace bbf
