#include "boxcorner/io/checkpoint.hpp"

#include <cstring>
#include <map>
#include <sstream>

#include "boxcorner/error.hpp"
#include "boxcorner/io/tensor_file.hpp"

namespace boxc::io {
namespace {

constexpr char kMagic[4] = {'B', 'X', 'C', 'K'};
constexpr std::uint8_t kVersion = 1;

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ck) {
  std::ostringstream out;
  out.write(kMagic, 4);
  out.put(static_cast<char>(kVersion));
  nlohmann::json header = {{"model", ck.config}, {"step", ck.step}, {"extra", ck.extra}};
  const std::string h = header.dump();
  put_u64(out, h.size());
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  std::uint32_t count = 0;
  ck.params.for_each([&](const std::string&, const nn::Tensor<float>&) { ++count; });
  put_u32(out, count);
  ck.params.for_each([&](const std::string& name, const nn::Tensor<float>& t) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_tensor(out, to_raw(t));
  });
  return out.str();
}

Checkpoint parse_checkpoint(const std::string& bytes, const std::string& what) {
  std::istringstream in(bytes);
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
    throw Error(ErrorKind::Format, what + ": not a checkpoint (bad magic)");
  const int version = in.get();
  if (version != kVersion) throw Error(ErrorKind::Format, what + ": unsupported checkpoint version");
  const std::uint64_t hlen = get_u64(in, what);
  if (hlen > bytes.size()) throw Error(ErrorKind::Format, what + ": truncated header");
  std::string h(hlen, '\0');
  in.read(h.data(), static_cast<std::streamsize>(hlen));
  if (static_cast<std::uint64_t>(in.gcount()) != hlen) throw Error(ErrorKind::Format, what + ": truncated header");

  Checkpoint ck;
  try {
    const auto header = nlohmann::json::parse(h);
    header.at("model").get_to(ck.config);
    ck.step = header.at("step").get<std::int64_t>();
    ck.extra = header.value("extra", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, what + ": bad checkpoint header: " + e.what());
  }
  try {
    ck.config.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Format, what + ": " + e.what());
  }

  const std::uint32_t count = get_u32(in, what);
  std::map<std::string, RawTensor> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t len = get_u32(in, what);
    if (len > 4096) throw Error(ErrorKind::Format, what + ": implausible entry name length");
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (in.gcount() != static_cast<std::streamsize>(len)) throw Error(ErrorKind::Format, what + ": truncated entry");
    entries[name] = read_tensor(in, what + ":" + name);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw Error(ErrorKind::Format, what + ": trailing bytes");

  // Shapes come from a freshly laid-out model; every entry must match.
  ck.params = nn::init_params<float>(ck.config, 0);
  std::size_t used = 0;
  ck.params.for_each([&](const std::string& name, nn::Tensor<float>& t) {
    auto it = entries.find(name);
    if (it == entries.end()) throw Error(ErrorKind::Format, what + ": missing parameter " + name);
    nn::Tensor<float> loaded = tensor_of<float>(it->second, what + ":" + name);
    if (loaded.shape != t.shape) throw Error(ErrorKind::Format, what + ": shape mismatch for " + name);
    t = std::move(loaded);
    ++used;
  });
  if (used != entries.size()) throw Error(ErrorKind::Format, what + ": unknown parameter entries");
  return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) { write_file(path, serialize_checkpoint(ck)); }

Checkpoint load_checkpoint(const std::string& path) { return parse_checkpoint(read_file(path), path); }

}  // namespace boxc::io
