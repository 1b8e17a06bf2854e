#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "bbfnet/maps.hpp"

namespace bbf {

class PanopticFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Segment id as a 24-bit color (id >> 16, (id >> 8) & 255, id & 255) plus
/// the segment list as JSON.
struct EncodedPanoptic {
  Image<std::uint8_t> rgb;  // 3 channels
  nlohmann::json info;
};

inline constexpr std::uint32_t kMaxSegmentId = (1u << 24) - 1;

EncodedPanoptic encode_panoptic(const PanopticResult& result);
PanopticResult decode_panoptic(const EncodedPanoptic& encoded);

void write_ppm(const std::filesystem::path& path, const Image<std::uint8_t>& rgb);
Image<std::uint8_t> read_ppm(const std::filesystem::path& path);

/// Writes <dir>/<stem>.ppm and <dir>/<stem>.json.
void write_panoptic(const std::filesystem::path& dir, const PanopticResult& result,
                    const std::string& stem = "panoptic");
PanopticResult read_panoptic(const std::filesystem::path& dir,
                             const std::string& stem = "panoptic");

}  // namespace bbf
