#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace bbf {

/// Dense H x W x C array, row-major with the channel index innermost.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels = 1, T fill = T{})
      : height_(height), width_(width), channels_(channels) {
    if (height < 0 || width < 0 || channels < 1) {
      throw std::invalid_argument("Image: invalid shape");
    }
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(height_) * width_;
  }
  bool empty() const noexcept { return data_.empty(); }

  T& at(int y, int x, int c = 0) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  const T& at(int y, int x, int c = 0) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  // Linear pixel access; channel 0 unless stated.
  T& operator[](std::size_t pixel) { return data_[pixel * channels_]; }
  const T& operator[](std::size_t pixel) const { return data_[pixel * channels_]; }
  T& at_index(std::size_t pixel, int c) { return data_[pixel * channels_ + c]; }
  const T& at_index(std::size_t pixel, int c) const {
    return data_[pixel * channels_ + c];
  }

  std::span<T> pixel(std::size_t index) {
    return {data_.data() + index * channels_, static_cast<std::size_t>(channels_)};
  }
  std::span<const T> pixel(std::size_t index) const {
    return {data_.data() + index * channels_, static_cast<std::size_t>(channels_)};
  }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  template <typename U>
  bool same_extent(const Image<U>& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  template <typename U>
  Image<U> cast() const {
    Image<U> out(height_, width_, channels_);
    std::transform(data_.begin(), data_.end(), out.values().begin(),
                   [](const T& v) { return static_cast<U>(v); });
    return out;
  }

  bool operator==(const Image& other) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 1;
  std::vector<T> data_;
};

using ClassMap = Image<std::uint32_t>;
using LevelMap = Image<std::uint8_t>;

struct Pixel {
  int x = 0;
  int y = 0;
  bool operator==(const Pixel&) const = default;
};

/// Inclusive axis-aligned pixel bounds.
struct BBox {
  int x_min = 0;
  int y_min = 0;
  int x_max = -1;
  int y_max = -1;

  bool valid() const noexcept { return x_max >= x_min && y_max >= y_min; }
  long long area() const noexcept {
    return valid() ? static_cast<long long>(x_max - x_min + 1) * (y_max - y_min + 1) : 0;
  }
  void include(int x, int y) noexcept {
    if (!valid()) {
      x_min = x_max = x;
      y_min = y_max = y;
      return;
    }
    x_min = std::min(x_min, x);
    x_max = std::max(x_max, x);
    y_min = std::min(y_min, y);
    y_max = std::max(y_max, y);
  }
  bool operator==(const BBox&) const = default;
};

/// Tight bounds of a set of linear pixel indices on an image of the given width.
inline BBox bounds_of(std::span<const int> pixels, int width) {
  BBox box;
  for (int p : pixels) box.include(p % width, p / width);
  return box;
}

/// Pixel-center normalized coordinates: (x + 0.5) / W.
inline double normalize_x(double x, int width) { return (x + 0.5) / width; }
inline double normalize_y(double y, int height) { return (y + 0.5) / height; }
inline double denormalize_x(double nx, int width) { return nx * width - 0.5; }
inline double denormalize_y(double ny, int height) { return ny * height - 0.5; }

}  // namespace bbf
