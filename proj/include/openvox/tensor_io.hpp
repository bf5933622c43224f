#pragma once

// DTEN: a minimal binary tensor container.
//
//   offset  size      field
//   0       4         magic "DTEN"
//   4       1         version (1)
//   5       1         dtype code (0 = f32, 1 = u8, 2 = i32)
//   6       1         ndim (0..4)
//   7       4*ndim    dims, u32 little endian
//   ...     rest      row-major little-endian payload
//
// The payload length must equal product(dims) * sizeof(dtype) exactly.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "openvox/error.hpp"

namespace openvox {

enum class DType : std::uint8_t { F32 = 0, U8 = 1, I32 = 2 };

std::size_t dtype_size(DType dtype);
std::string dtype_name(DType dtype);

inline constexpr std::size_t kMaxTensorRank = 4;
inline constexpr std::uint8_t kTensorVersion = 1;

class Tensor {
 public:
  Tensor() = default;
  // Zero-filled tensor of the given shape.
  Tensor(DType dtype, std::vector<std::uint32_t> dims);

  static Tensor from_f32(std::vector<std::uint32_t> dims, std::span<const float> values);
  static Tensor from_u8(std::vector<std::uint32_t> dims, std::span<const std::uint8_t> values);
  static Tensor from_i32(std::vector<std::uint32_t> dims, std::span<const std::int32_t> values);

  DType dtype() const { return dtype_; }
  const std::vector<std::uint32_t>& dims() const { return dims_; }
  std::size_t ndim() const { return dims_.size(); }
  std::size_t numel() const;
  std::span<const std::byte> bytes() const { return data_; }

  // Typed views. Throw ValidationError when the dtype does not match.
  std::span<const float> f32() const;
  std::span<float> f32();
  std::span<const std::uint8_t> u8() const;
  std::span<std::uint8_t> u8();
  std::span<const std::int32_t> i32() const;
  std::span<std::int32_t> i32();

  // Throws ValidationError unless dims() == expected.
  void expect_shape(DType dtype, std::span<const std::uint32_t> expected, const std::string& what) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  template <typename T>
  std::span<T> view_as(DType want) const;

  DType dtype_ = DType::F32;
  std::vector<std::uint32_t> dims_{0};
  std::vector<std::byte> data_;

  friend Tensor decode_tensor(std::span<const std::byte> buffer);
};

std::vector<std::byte> encode_tensor(const Tensor& tensor);
Tensor decode_tensor(std::span<const std::byte> buffer);

Tensor read_tensor(const std::filesystem::path& path);
void write_tensor(const Tensor& tensor, const std::filesystem::path& path);

// Whole-file helpers shared by the JSON and tensor writers.
std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace openvox
