#include "boxcorner/io/tensor_file.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "boxcorner/error.hpp"

namespace boxc::io {
namespace {

constexpr char kMagic[4] = {'B', 'T', 'N', 'S'};
constexpr std::uint8_t kVersion = 1;
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 36;

template <class T>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() { return DType::F32; }
template <>
constexpr DType dtype_of<double>() { return DType::F64; }
template <>
constexpr DType dtype_of<std::uint8_t>() { return DType::U8; }

void swap_if_big_endian(std::uint8_t* bytes, std::size_t count, std::size_t width) {
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < count; ++i) {
      std::uint8_t* e = bytes + i * width;
      for (std::size_t a = 0, b = width - 1; a < b; ++a, --b) std::swap(e[a], e[b]);
    }
  } else {
    (void)bytes;
    (void)count;
    (void)width;
  }
}

void read_exact(std::istream& in, void* dst, std::size_t n, const std::string& what) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    throw Error(ErrorKind::Format, what + ": unexpected end of data");
}

}  // namespace

std::size_t element_size(DType t) {
  switch (t) {
    case DType::F32: return 4;
    case DType::F64: return 8;
    case DType::U8: return 1;
  }
  throw Error(ErrorKind::Format, "unknown dtype code");
}

std::uint64_t RawTensor::count() const {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

template <class T>
RawTensor to_raw(const std::vector<std::size_t>& dims, const std::vector<T>& values) {
  RawTensor r;
  r.dtype = dtype_of<T>();
  r.dims.assign(dims.begin(), dims.end());
  if (r.count() != values.size()) throw Error(ErrorKind::Shape, "tensor extents do not match its data length");
  r.payload.resize(values.size() * sizeof(T));
  if (!values.empty()) std::memcpy(r.payload.data(), values.data(), r.payload.size());
  swap_if_big_endian(r.payload.data(), values.size(), sizeof(T));
  return r;
}

template <class T>
std::vector<T> values_of(const RawTensor& raw, const std::string& what) {
  if (raw.dtype != dtype_of<T>())
    throw Error(ErrorKind::Format, what + ": unexpected dtype code " + std::to_string(int(raw.dtype)));
  std::vector<std::uint8_t> bytes = raw.payload;
  const std::size_t n = bytes.size() / sizeof(T);
  swap_if_big_endian(bytes.data(), n, sizeof(T));
  std::vector<T> out(n);
  if (n) std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

template <class T>
nn::Tensor<T> tensor_of(const RawTensor& raw, const std::string& what) {
  nn::Tensor<T> t;
  t.shape.assign(raw.dims.begin(), raw.dims.end());
  t.data = values_of<T>(raw, what);
  return t;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint32_t get_u32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  read_exact(in, b, 4, what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{b[i]} << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& in, const std::string& what) {
  unsigned char b[8];
  read_exact(in, b, 8, what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[i]} << (8 * i);
  return v;
}

void write_tensor(std::ostream& out, const RawTensor& t) {
  if (t.dims.size() > 255) throw Error(ErrorKind::Shape, "tensor has more than 255 dimensions");
  if (t.payload.size() != t.count() * element_size(t.dtype))
    throw Error(ErrorKind::Shape, "tensor payload length does not match its extents");
  out.write(kMagic, 4);
  const char head[3] = {static_cast<char>(kVersion), static_cast<char>(t.dtype), static_cast<char>(t.dims.size())};
  out.write(head, 3);
  for (auto d : t.dims) put_u64(out, d);
  out.write(reinterpret_cast<const char*>(t.payload.data()), static_cast<std::streamsize>(t.payload.size()));
}

RawTensor read_tensor(std::istream& in, const std::string& what) {
  char magic[4];
  read_exact(in, magic, 4, what);
  if (std::memcmp(magic, kMagic, 4) != 0) throw Error(ErrorKind::Format, what + ": bad tensor magic");
  unsigned char head[3];
  read_exact(in, head, 3, what);
  if (head[0] != kVersion)
    throw Error(ErrorKind::Format, what + ": unsupported tensor version " + std::to_string(head[0]));
  if (head[1] > 2) throw Error(ErrorKind::Format, what + ": unknown dtype code " + std::to_string(head[1]));
  RawTensor t;
  t.dtype = static_cast<DType>(head[1]);
  t.dims.resize(head[2]);
  for (auto& d : t.dims) d = get_u64(in, what);
  std::uint64_t n = 1;
  for (auto d : t.dims) {
    if (d != 0 && n > kMaxElements / d) throw Error(ErrorKind::Format, what + ": tensor is implausibly large");
    n *= d;
  }
  t.payload.resize(n * element_size(t.dtype));
  read_exact(in, t.payload.data(), t.payload.size(), what);
  return t;
}

void write_file(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorKind::Io, "cannot open '" + tmp + "' for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error(ErrorKind::Io, "write failed for '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot move '" + tmp + "' to '" + path + "': " + ec.message());
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void save_tensor(const std::string& path, const RawTensor& t) {
  std::ostringstream ss;
  write_tensor(ss, t);
  write_file(path, ss.str());
}

RawTensor load_tensor(const std::string& path) {
  std::istringstream in(read_file(path));
  RawTensor t = read_tensor(in, path);
  if (in.peek() != std::char_traits<char>::eof())
    throw Error(ErrorKind::Format, path + ": trailing bytes after tensor payload");
  return t;
}

template RawTensor to_raw<float>(const std::vector<std::size_t>&, const std::vector<float>&);
template RawTensor to_raw<double>(const std::vector<std::size_t>&, const std::vector<double>&);
template RawTensor to_raw<std::uint8_t>(const std::vector<std::size_t>&, const std::vector<std::uint8_t>&);
template std::vector<float> values_of<float>(const RawTensor&, const std::string&);
template std::vector<double> values_of<double>(const RawTensor&, const std::string&);
template std::vector<std::uint8_t> values_of<std::uint8_t>(const RawTensor&, const std::string&);
template nn::Tensor<float> tensor_of<float>(const RawTensor&, const std::string&);
template nn::Tensor<double> tensor_of<double>(const RawTensor&, const std::string&);

}  // namespace boxc::io
