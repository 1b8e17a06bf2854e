#include "bbfnet/panoptic_io.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace bbf {

EncodedPanoptic encode_panoptic(const PanopticResult& result) {
  EncodedPanoptic out;
  const int h = result.ids.height();
  const int w = result.ids.width();
  out.rgb = Image<std::uint8_t>(h, w, 3);
  for (std::size_t p = 0; p < result.ids.pixel_count(); ++p) {
    const std::uint32_t id = result.ids[p];
    if (id > kMaxSegmentId) throw PanopticFormatError("segment id exceeds 24 bits");
    out.rgb.at_index(p, 0) = static_cast<std::uint8_t>(id >> 16);
    out.rgb.at_index(p, 1) = static_cast<std::uint8_t>((id >> 8) & 255u);
    out.rgb.at_index(p, 2) = static_cast<std::uint8_t>(id & 255u);
  }
  nlohmann::json segments = nlohmann::json::array();
  for (const auto& s : result.segments) {
    if (s.id > kMaxSegmentId) throw PanopticFormatError("segment id exceeds 24 bits");
    segments.push_back(
        {{"id", s.id}, {"class", s.class_id}, {"area", s.area}, {"mean_prob", s.mean_prob}});
  }
  out.info = {{"image", {{"w", w}, {"h", h}}}, {"segments", std::move(segments)}};
  return out;
}

PanopticResult decode_panoptic(const EncodedPanoptic& encoded) {
  PanopticResult out;
  int w = 0, h = 0;
  try {
    w = encoded.info.at("image").at("w").get<int>();
    h = encoded.info.at("image").at("h").get<int>();
    for (const auto& s : encoded.info.at("segments")) {
      Segment seg;
      seg.id = s.at("id").get<std::uint32_t>();
      seg.class_id = s.at("class").get<std::uint32_t>();
      seg.area = s.at("area").get<std::int64_t>();
      seg.mean_prob = s.value("mean_prob", 1.0);
      out.segments.push_back(seg);
    }
  } catch (const nlohmann::json::exception& e) {
    throw PanopticFormatError(std::string("panoptic json: ") + e.what());
  }
  if (encoded.rgb.height() != h || encoded.rgb.width() != w || encoded.rgb.channels() != 3)
    throw PanopticFormatError("panoptic image size disagrees with json");

  std::unordered_map<std::uint32_t, std::uint32_t> class_of;
  for (const auto& s : out.segments) class_of[s.id] = s.class_id;
  out.ids = Image<std::uint32_t>(h, w);
  out.labels = ClassMap(h, w);
  for (std::size_t p = 0; p < out.ids.pixel_count(); ++p) {
    const std::uint32_t id = (std::uint32_t{encoded.rgb.at_index(p, 0)} << 16) |
                             (std::uint32_t{encoded.rgb.at_index(p, 1)} << 8) |
                             encoded.rgb.at_index(p, 2);
    out.ids[p] = id;
    if (id == 0) continue;
    auto it = class_of.find(id);
    if (it == class_of.end())
      throw PanopticFormatError("pixel color " + std::to_string(id) + " has no segment");
    out.labels[p] = it->second;
  }
  return out;
}

void write_ppm(const std::filesystem::path& path, const Image<std::uint8_t>& rgb) {
  if (rgb.channels() != 3) throw PanopticFormatError("ppm needs 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PanopticFormatError("cannot open " + path.string() + " for writing");
  out << "P6\n" << rgb.width() << ' ' << rgb.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.storage().data()),
            static_cast<std::streamsize>(rgb.storage().size()));
  if (!out) throw PanopticFormatError("ppm write failed: " + path.string());
}

Image<std::uint8_t> read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PanopticFormatError("cannot open " + path.string());
  auto token = [&]() {
    std::string t;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        if (!t.empty()) break;
      } else {
        t.push_back(c);
      }
    }
    return t;
  };
  if (token() != "P6") throw PanopticFormatError("not a binary PPM: " + path.string());
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw PanopticFormatError("malformed PPM header: " + path.string());
  }
  if (maxval != 255 || w < 0 || h < 0) throw PanopticFormatError("unsupported PPM: " + path.string());
  Image<std::uint8_t> rgb(h, w, 3);
  in.read(reinterpret_cast<char*>(rgb.storage().data()),
          static_cast<std::streamsize>(rgb.storage().size()));
  if (in.gcount() != static_cast<std::streamsize>(rgb.storage().size()))
    throw PanopticFormatError("PPM payload truncated: " + path.string());
  return rgb;
}

void write_panoptic(const std::filesystem::path& dir, const PanopticResult& result,
                    const std::string& stem) {
  const auto enc = encode_panoptic(result);
  write_ppm(dir / (stem + ".ppm"), enc.rgb);
  std::ofstream js(dir / (stem + ".json"));
  js << enc.info.dump(2) << '\n';
  if (!js) throw PanopticFormatError("cannot write " + (dir / (stem + ".json")).string());
}

PanopticResult read_panoptic(const std::filesystem::path& dir, const std::string& stem) {
  EncodedPanoptic enc;
  enc.rgb = read_ppm(dir / (stem + ".ppm"));
  std::ifstream js(dir / (stem + ".json"));
  if (!js) throw PanopticFormatError("cannot open " + (dir / (stem + ".json")).string());
  try {
    enc.info = nlohmann::json::parse(js);
  } catch (const nlohmann::json::exception& e) {
    throw PanopticFormatError(std::string("panoptic json: ") + e.what());
  }
  return decode_panoptic(enc);
}

}  // namespace bbf
