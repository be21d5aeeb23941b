#pragma once

// Binary tensor container:
//   "BTNS" | version u8 (1) | dtype u8 (0 f32, 1 f64, 2 u8) | ndim u8 |
//   ndim x u64 little-endian extents | row-major little-endian payload

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "boxcorner/nn/tensor.hpp"

namespace boxc::io {

enum class DType : std::uint8_t { F32 = 0, F64 = 1, U8 = 2 };

std::size_t element_size(DType t);

struct RawTensor {
  DType dtype = DType::F32;
  std::vector<std::uint64_t> dims;
  std::vector<std::uint8_t> payload;  // little-endian element bytes

  std::uint64_t count() const;
};

template <class T>
RawTensor to_raw(const std::vector<std::size_t>& dims, const std::vector<T>& values);
template <class T>
RawTensor to_raw(const nn::Tensor<T>& t) {
  return to_raw<T>(t.shape, t.data);
}

// Throws ErrorKind::Format (naming `what`) on a dtype mismatch.
template <class T>
std::vector<T> values_of(const RawTensor& raw, const std::string& what);
template <class T>
nn::Tensor<T> tensor_of(const RawTensor& raw, const std::string& what);

void write_tensor(std::ostream& out, const RawTensor& t);
// `what` names the source in error messages.
RawTensor read_tensor(std::istream& in, const std::string& what);

void save_tensor(const std::string& path, const RawTensor& t);
RawTensor load_tensor(const std::string& path);

// Little-endian scalar helpers shared by the other binary formats.
void put_u32(std::ostream& out, std::uint32_t v);
void put_u64(std::ostream& out, std::uint64_t v);
std::uint32_t get_u32(std::istream& in, const std::string& what);
std::uint64_t get_u64(std::istream& in, const std::string& what);

// Writes atomically enough for our purposes: to path + ".tmp", then rename.
void write_file(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

}  // namespace boxc::io
