#pragma once

#include "vcasr/modelkit.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace vcasr {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// "VCKP", u32 version, length-prefixed config text, then named tensors:
/// length-prefixed name, u32 rank, u32 dims..., row-major float32.
struct Checkpoint {
  std::string config;
  std::vector<std::pair<std::string, Matrix>> tensors;

  const Matrix* tensor(const std::string& name) const;
  std::uint64_t hash() const;
};

std::vector<char> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<char>& bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Snapshot of a parameter store, rounded through float32.
Checkpoint snapshot(const ParamStore& store, std::string config);
/// Copies tensors into matching parameters; every parameter must be present.
void restore(ParamStore& store, const Checkpoint& ckpt);

}  // namespace vcasr
