#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>

#include "rsisc/autograd.hpp"
#include "rsisc/model.hpp"

namespace rsisc {

/// Model configuration, parameters and free-form training metadata.
///
/// On disk: a text header ("rsisc-checkpoint <version>", the model config
/// sections, a [metadata] section), a "%%tensors <bytes>" marker line, the
/// binary tensor section (u64 count, then per tensor a u64 name length, the
/// name, and the tensor record), and a trailing little-endian u64 FNV-1a
/// digest of every preceding byte.
struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  ModelConfig model;
  ModelParams params;
  std::map<std::string, std::string> metadata;
};

std::uint64_t fnv1a64(std::string_view bytes);

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::string_view bytes);

}  // namespace rsisc
