#include "manifest.hpp"

#include <cstdio>
#include <fstream>

#include "rsisc/checkpoint.hpp"
#include "rsisc/error.hpp"

namespace rsisc::cli {

Manifest::Manifest(std::string command, const std::vector<std::string>& argv) {
  std::string joined;
  for (const auto& arg : argv) {
    if (!joined.empty()) joined += ' ';
    joined += arg;
  }
  kv_.set("run", "command", std::move(command));
  kv_.set("run", "argv", joined);
}

std::string hex_digest(const std::filesystem::path& file) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(read_file_bytes(file))));
  return buf;
}

void Manifest::add_artifact(const std::filesystem::path& file) {
  kv_.set("artifacts", file.filename().string(), "fnv1a64:" + hex_digest(file));
}

void Manifest::write(const std::filesystem::path& dir) const {
  std::ofstream out(dir / "manifest.txt");
  if (!out) throw IoError("cannot write " + (dir / "manifest.txt").string());
  out << kv_.to_text();
}

}  // namespace rsisc::cli
