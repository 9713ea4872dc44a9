#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rsisc/config.hpp"

namespace rsisc::cli {

// manifest.txt in the output directory: the command line, the effective
// configuration and an FNV-1a digest of every artifact written.
class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& argv);

  void set(const std::string& key, const std::string& value) { kv_.set("run", key, value); }
  void add_config(const KeyValueConfig& config) { kv_.merge(config); }
  void add_artifact(const std::filesystem::path& file);
  void write(const std::filesystem::path& dir) const;

 private:
  KeyValueConfig kv_;
};

std::string hex_digest(const std::filesystem::path& file);

}  // namespace rsisc::cli
