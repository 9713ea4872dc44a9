#pragma once

// Plain-text configuration: "[section]" headers followed by "key = value"
// lines; '#' starts a comment. Section names mirror the config structs.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "rsisc/model.hpp"
#include "rsisc/trainer.hpp"

namespace rsisc {

class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in);
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(const std::string& section, const std::string& key, const std::string& value);
  std::optional<std::string> get(const std::string& section, const std::string& key) const;
  bool has_section(const std::string& section) const { return sections_.count(section) != 0; }
  // Empty map when the section is absent.
  const std::map<std::string, std::string>& section(const std::string& name) const;

  std::string get_string(const std::string& section, const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  std::size_t get_size(const std::string& section, const std::string& key, std::size_t fallback) const;
  std::uint64_t get_u64(const std::string& section, const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

  // Sections and keys in lexicographic order; stable for identical content.
  std::string to_text() const;

  // Adds every entry of `other`, overwriting duplicates.
  void merge(const KeyValueConfig& other);

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

// Round-trip exact text form of a double.
std::string format_double(double v);

void write_model_config(KeyValueConfig& kv, const ModelConfig& cfg);
ModelConfig read_model_config(const KeyValueConfig& kv, const ModelConfig& defaults = {});

void write_train_config(KeyValueConfig& kv, const TrainConfig& cfg);
TrainConfig read_train_config(const KeyValueConfig& kv, const TrainConfig& defaults = {});

}  // namespace rsisc
