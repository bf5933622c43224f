#include "openvox/tensor_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>

static_assert(std::endian::native == std::endian::little,
              "DTEN payloads are memcpy'd; big-endian hosts need byte swapping");

namespace openvox {

namespace {

constexpr std::array<char, 4> kMagic = {'D', 'T', 'E', 'N'};
constexpr std::size_t kFixedHeader = 7;

std::size_t checked_numel(std::span<const std::uint32_t> dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

DType dtype_from_code(std::uint8_t code) {
  switch (code) {
    case 0: return DType::F32;
    case 1: return DType::U8;
    case 2: return DType::I32;
    default: throw FormatError("DTEN: unknown dtype code " + std::to_string(code));
  }
}

std::string shape_string(std::span<const std::uint32_t> dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

}  // namespace

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::F32: return 4;
    case DType::U8: return 1;
    case DType::I32: return 4;
  }
  return 0;
}

std::string dtype_name(DType dtype) {
  switch (dtype) {
    case DType::F32: return "f32";
    case DType::U8: return "u8";
    case DType::I32: return "i32";
  }
  return "?";
}

Tensor::Tensor(DType dtype, std::vector<std::uint32_t> dims) : dtype_(dtype), dims_(std::move(dims)) {
  if (dims_.size() > kMaxTensorRank) throw ValidationError("tensor rank exceeds 4");
  data_.assign(checked_numel(dims_) * dtype_size(dtype_), std::byte{0});
}

Tensor Tensor::from_f32(std::vector<std::uint32_t> dims, std::span<const float> values) {
  Tensor t(DType::F32, std::move(dims));
  if (values.size() != t.numel()) throw ValidationError("from_f32: value count does not match dims");
  std::memcpy(t.data_.data(), values.data(), values.size_bytes());
  return t;
}

Tensor Tensor::from_u8(std::vector<std::uint32_t> dims, std::span<const std::uint8_t> values) {
  Tensor t(DType::U8, std::move(dims));
  if (values.size() != t.numel()) throw ValidationError("from_u8: value count does not match dims");
  std::memcpy(t.data_.data(), values.data(), values.size_bytes());
  return t;
}

Tensor Tensor::from_i32(std::vector<std::uint32_t> dims, std::span<const std::int32_t> values) {
  Tensor t(DType::I32, std::move(dims));
  if (values.size() != t.numel()) throw ValidationError("from_i32: value count does not match dims");
  std::memcpy(t.data_.data(), values.data(), values.size_bytes());
  return t;
}

std::size_t Tensor::numel() const { return checked_numel(dims_); }

template <typename T>
std::span<T> Tensor::view_as(DType want) const {
  if (dtype_ != want) {
    throw ValidationError("tensor has dtype " + dtype_name(dtype_) + ", expected " + dtype_name(want));
  }
  auto* base = const_cast<std::byte*>(data_.data());
  return {reinterpret_cast<T*>(base), numel()};
}

std::span<const float> Tensor::f32() const { return view_as<const float>(DType::F32); }
std::span<float> Tensor::f32() { return view_as<float>(DType::F32); }
std::span<const std::uint8_t> Tensor::u8() const { return view_as<const std::uint8_t>(DType::U8); }
std::span<std::uint8_t> Tensor::u8() { return view_as<std::uint8_t>(DType::U8); }
std::span<const std::int32_t> Tensor::i32() const { return view_as<const std::int32_t>(DType::I32); }
std::span<std::int32_t> Tensor::i32() { return view_as<std::int32_t>(DType::I32); }

void Tensor::expect_shape(DType dtype, std::span<const std::uint32_t> expected, const std::string& what) const {
  if (dtype != dtype_) {
    throw ValidationError(what + ": dtype " + dtype_name(dtype_) + ", expected " + dtype_name(dtype));
  }
  if (!std::equal(dims_.begin(), dims_.end(), expected.begin(), expected.end())) {
    throw ValidationError(what + ": dims " + shape_string(dims_) + ", expected " + shape_string(expected));
  }
}

std::vector<std::byte> encode_tensor(const Tensor& tensor) {
  std::vector<std::byte> out(kFixedHeader + 4 * tensor.ndim());
  std::memcpy(out.data(), kMagic.data(), 4);
  out[4] = std::byte{kTensorVersion};
  out[5] = static_cast<std::byte>(tensor.dtype());
  out[6] = static_cast<std::byte>(tensor.ndim());
  for (std::size_t i = 0; i < tensor.ndim(); ++i) {
    const std::uint32_t d = tensor.dims()[i];
    for (int b = 0; b < 4; ++b) out[kFixedHeader + 4 * i + b] = static_cast<std::byte>((d >> (8 * b)) & 0xFF);
  }
  out.insert(out.end(), tensor.bytes().begin(), tensor.bytes().end());
  return out;
}

Tensor decode_tensor(std::span<const std::byte> buffer) {
  if (buffer.size() < kFixedHeader || std::memcmp(buffer.data(), kMagic.data(), 4) != 0) {
    throw FormatError("DTEN: bad magic");
  }
  const auto version = std::to_integer<std::uint8_t>(buffer[4]);
  if (version != kTensorVersion) throw FormatError("DTEN: unsupported version " + std::to_string(version));
  Tensor t;
  t.dtype_ = dtype_from_code(std::to_integer<std::uint8_t>(buffer[5]));
  const auto ndim = std::to_integer<std::uint8_t>(buffer[6]);
  if (ndim > kMaxTensorRank) throw FormatError("DTEN: ndim " + std::to_string(ndim) + " exceeds 4");
  if (buffer.size() < kFixedHeader + 4u * ndim) throw CorruptionError("DTEN: truncated header");
  t.dims_.resize(ndim);
  for (std::size_t i = 0; i < ndim; ++i) {
    std::uint32_t d = 0;
    for (int b = 0; b < 4; ++b) {
      d |= std::uint32_t{std::to_integer<std::uint8_t>(buffer[kFixedHeader + 4 * i + b])} << (8 * b);
    }
    t.dims_[i] = d;
  }
  const auto payload = buffer.subspan(kFixedHeader + 4u * ndim);
  const std::size_t expected = t.numel() * dtype_size(t.dtype_);
  if (payload.size() != expected) {
    throw CorruptionError("DTEN: payload is " + std::to_string(payload.size()) + " bytes, header implies " +
                          std::to_string(expected));
  }
  t.data_.assign(payload.begin(), payload.end());
  return t;
}

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::byte> bytes(size);
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size))) {
    throw IoError("short read on " + path.string());
  }
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed on " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return {reinterpret_cast<const char*>(bytes.data()), bytes.size()};
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_file_bytes(path, std::as_bytes(std::span(text.data(), text.size())));
}

Tensor read_tensor(const std::filesystem::path& path) { return decode_tensor(read_file_bytes(path)); }

void write_tensor(const Tensor& tensor, const std::filesystem::path& path) {
  write_file_bytes(path, encode_tensor(tensor));
}

}  // namespace openvox
