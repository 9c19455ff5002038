#pragma once

// Binary parameter checkpoints.
//
// Layout (little-endian):
//   "ODGS" | version u32 | count u32
//   version >= 2: metadata length u32 | metadata bytes (UTF-8 JSON)
//   per parameter: name length u16 | name | rank u8 | extents u32 x rank |
//                  payload flag u8 (0 = f32, 1 = f64) | payload

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include "odegs/nn.hpp"

namespace odegs {

inline constexpr std::uint32_t kCheckpointVersion = 2;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointData {
  std::uint32_t version = kCheckpointVersion;
  std::string metadata;
  std::vector<std::pair<std::string, Tensor>> params;
};

enum class Payload : std::uint8_t { kF32 = 0, kF64 = 1 };

void write_checkpoint(const std::filesystem::path& path, const ParamStore& store, const std::string& metadata,
                      Payload payload = Payload::kF64);
CheckpointData read_checkpoint(const std::filesystem::path& path);

// Copies values by name into `store`; every store entry must be present with
// a matching shape.
void load_into(const CheckpointData& ckpt, ParamStore& store);

}  // namespace odegs
