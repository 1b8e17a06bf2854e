#pragma once

// Binary tensor files (".bbft").
//
// Layout, little-endian:
//   bytes 0-3   magic "BBFT"
//   u16         version (1)
//   u8          dtype   (0 = f32, 1 = u32, 2 = u8)
//   u8          rank
//   rank x u32  dims
//   payload     row-major elements

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "bbfnet/image.hpp"

namespace bbf {

enum class DType : std::uint8_t { f32 = 0, u32 = 1, u8 = 2 };

enum class TensorErrc {
  io,
  bad_magic,
  unsupported_version,
  unsupported_dtype,
  truncated,
  shape_mismatch,
};

class TensorError : public std::runtime_error {
 public:
  TensorError(TensorErrc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  TensorErrc code() const noexcept { return code_; }

 private:
  TensorErrc code_;
};

struct Tensor {
  std::vector<std::uint32_t> dims;
  std::variant<std::vector<float>, std::vector<std::uint32_t>, std::vector<std::uint8_t>> data;

  DType dtype() const noexcept { return static_cast<DType>(data.index()); }
  std::size_t element_count() const noexcept;
  bool operator==(const Tensor&) const = default;
};

void write_tensor(std::ostream& out, const Tensor& tensor);
Tensor read_tensor(std::istream& in);
void write_tensor(const std::filesystem::path& path, const Tensor& tensor);
Tensor read_tensor(const std::filesystem::path& path);

/// Images map to rank-3 tensors (H, W, C); a rank-2 tensor reads as C = 1.
template <typename T>
Tensor to_tensor(const Image<T>& image) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(image.height()), static_cast<std::uint32_t>(image.width()),
            static_cast<std::uint32_t>(image.channels())};
  t.data = image.storage();
  return t;
}

template <typename T>
Image<T> to_image(const Tensor& tensor) {
  const auto* values = std::get_if<std::vector<T>>(&tensor.data);
  if (values == nullptr) throw TensorError(TensorErrc::shape_mismatch, "tensor dtype mismatch");
  if (tensor.dims.size() != 2 && tensor.dims.size() != 3)
    throw TensorError(TensorErrc::shape_mismatch, "expected a rank-2 or rank-3 tensor");
  const int c = tensor.dims.size() == 3 ? static_cast<int>(tensor.dims[2]) : 1;
  Image<T> image(static_cast<int>(tensor.dims[0]), static_cast<int>(tensor.dims[1]), c);
  image.storage() = *values;
  return image;
}

}  // namespace bbf
