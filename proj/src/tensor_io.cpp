#include "bbfnet/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace bbf {

namespace {

constexpr std::array<char, 4> kMagic = {'B', 'B', 'F', 'T'};
constexpr std::uint16_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "tensor I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T)))
    throw TensorError(TensorErrc::truncated, "tensor header truncated");
  return value;
}

}  // namespace

std::size_t Tensor::element_count() const noexcept {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

void write_tensor(std::ostream& out, const Tensor& tensor) {
  const std::size_t n = std::visit([](const auto& v) { return v.size(); }, tensor.data);
  if (n != tensor.element_count())
    throw TensorError(TensorErrc::shape_mismatch, "tensor dims do not match payload size");
  if (tensor.dims.size() > 255) throw TensorError(TensorErrc::shape_mismatch, "rank too large");
  out.write(kMagic.data(), kMagic.size());
  put<std::uint16_t>(out, kVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(tensor.dtype()));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(tensor.dims.size()));
  for (auto d : tensor.dims) put<std::uint32_t>(out, d);
  std::visit(
      [&](const auto& v) {
        out.write(reinterpret_cast<const char*>(v.data()),
                  static_cast<std::streamsize>(v.size() * sizeof(v[0])));
      },
      tensor.data);
  if (!out) throw TensorError(TensorErrc::io, "tensor write failed");
}

Tensor read_tensor(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()))
    throw TensorError(TensorErrc::truncated, "tensor header truncated");
  if (magic != kMagic) throw TensorError(TensorErrc::bad_magic, "bad tensor magic");
  const auto version = get<std::uint16_t>(in);
  if (version != kVersion)
    throw TensorError(TensorErrc::unsupported_version,
                      "unsupported tensor version " + std::to_string(version));
  const auto dtype = get<std::uint8_t>(in);
  const auto rank = get<std::uint8_t>(in);
  Tensor t;
  for (int i = 0; i < rank; ++i) t.dims.push_back(get<std::uint32_t>(in));
  const std::size_t n = t.element_count();

  auto load = [&](auto& values) {
    values.resize(n);
    const auto bytes = static_cast<std::streamsize>(n * sizeof(values[0]));
    if (!in.read(reinterpret_cast<char*>(values.data()), bytes) || in.gcount() != bytes)
      throw TensorError(TensorErrc::truncated, "tensor payload truncated");
  };
  switch (dtype) {
    case 0: {
      std::vector<float> v;
      load(v);
      t.data = std::move(v);
      break;
    }
    case 1: {
      std::vector<std::uint32_t> v;
      load(v);
      t.data = std::move(v);
      break;
    }
    case 2: {
      std::vector<std::uint8_t> v;
      load(v);
      t.data = std::move(v);
      break;
    }
    default:
      throw TensorError(TensorErrc::unsupported_dtype,
                        "unsupported tensor dtype code " + std::to_string(dtype));
  }
  return t;
}

void write_tensor(const std::filesystem::path& path, const Tensor& tensor) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TensorError(TensorErrc::io, "cannot open " + path.string() + " for writing");
  write_tensor(out, tensor);
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TensorError(TensorErrc::io, "cannot open " + path.string());
  return read_tensor(in);
}

}  // namespace bbf
