#pragma once

// Checkpoint file:
//   "BXCK" | version u8 (1) | u64 header length | JSON header |
//   u32 entry count | per entry: u32 name length, name, tensor container

#include <cstdint>
#include <string>

#include "boxcorner/nn/model.hpp"
#include "json.hpp"

namespace boxc::io {

struct Checkpoint {
  nn::ModelConfig config;
  nn::ModelParams<float> params;
  std::int64_t step = 0;
  nlohmann::json extra = nlohmann::json::object();  // e.g. the training config
};

std::string serialize_checkpoint(const Checkpoint& ck);
Checkpoint parse_checkpoint(const std::string& bytes, const std::string& what);

void save_checkpoint(const std::string& path, const Checkpoint& ck);
// Throws ErrorKind::Format naming `path` on a corrupt file.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace boxc::io
