#include "rsisc/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "rsisc/config.hpp"
#include "rsisc/error.hpp"

namespace rsisc {

namespace {

constexpr std::string_view kMagic = "rsisc-checkpoint";
constexpr std::string_view kTensorMarker = "%%tensors";

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::string_view bytes, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
  return v;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  KeyValueConfig header;
  write_model_config(header, ckpt.model);
  for (const auto& [key, value] : ckpt.metadata) header.set("metadata", key, value);

  std::ostringstream tensors(std::ios::binary);
  std::string count;
  put_u64(count, ckpt.params.size());
  tensors << count;
  for (const auto& [name, p] : ckpt.params) {
    std::string len;
    put_u64(len, name.size());
    tensors << len << name;
    write_tensor(tensors, p.value);
  }
  const std::string payload = tensors.str();

  std::string out;
  out += std::string(kMagic) + " " + std::to_string(Checkpoint::kFormatVersion) + "\n";
  out += header.to_text();
  out += std::string(kTensorMarker) + " " + std::to_string(payload.size()) + "\n";
  out += payload;
  put_u64(out, fnv1a64(out));
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  const auto first_nl = bytes.find('\n');
  if (first_nl == std::string_view::npos) throw FormatError("checkpoint: missing header line");
  std::istringstream first(std::string(bytes.substr(0, first_nl)));
  std::string magic;
  int version = -1;
  if (!(first >> magic >> version) || magic != kMagic) throw FormatError("checkpoint: bad magic");
  if (version != Checkpoint::kFormatVersion)
    throw VersionError("checkpoint format version " + std::to_string(version) + ", this build reads version " +
                       std::to_string(Checkpoint::kFormatVersion));

  const std::string marker = "\n" + std::string(kTensorMarker) + " ";
  const auto marker_at = bytes.find(marker, first_nl);
  if (marker_at == std::string_view::npos) throw TruncationError("checkpoint: tensor section missing (truncated?)");
  const auto marker_end = bytes.find('\n', marker_at + 1);
  if (marker_end == std::string_view::npos) throw TruncationError("checkpoint: truncated marker line");
  std::size_t payload_size = 0;
  try {
    payload_size = std::stoull(std::string(bytes.substr(marker_at + marker.size(), marker_end - marker_at - marker.size())));
  } catch (const std::logic_error&) {
    throw FormatError("checkpoint: bad tensor section length");
  }
  const std::size_t payload_at = marker_end + 1;
  if (bytes.size() < payload_at + payload_size + 8)
    throw TruncationError("checkpoint: file has " + std::to_string(bytes.size()) + " bytes, header promises " +
                          std::to_string(payload_at + payload_size + 8));
  if (bytes.size() > payload_at + payload_size + 8) throw FormatError("checkpoint: trailing bytes after digest");
  const std::size_t digest_at = payload_at + payload_size;
  if (fnv1a64(bytes.substr(0, digest_at)) != get_u64(bytes, digest_at))
    throw DigestError("checkpoint: digest mismatch, file is corrupt");

  const KeyValueConfig header =
      KeyValueConfig::parse(std::string(bytes.substr(first_nl + 1, marker_at + 1 - (first_nl + 1))));
  Checkpoint ckpt;
  ckpt.model = read_model_config(header);
  for (const auto& [key, value] : header.section("metadata")) ckpt.metadata[key] = value;

  std::istringstream payload(std::string(bytes.substr(payload_at, payload_size)), std::ios::binary);
  char buf[8];
  auto read_u64 = [&]() {
    if (!payload.read(buf, 8)) throw FormatError("checkpoint: truncated tensor section");
    return get_u64(std::string_view(buf, 8), 0);
  };
  const std::uint64_t count = read_u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t len = read_u64();
    if (len > 4096) throw FormatError("checkpoint: tensor name too long");
    std::string name(len, '\0');
    if (!payload.read(name.data(), static_cast<std::streamsize>(len))) throw FormatError("checkpoint: truncated name");
    ckpt.params.add(name, read_tensor(payload));
  }
  return ckpt;
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_bytes(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return deserialize_checkpoint(read_file_bytes(path));
  } catch (const VersionError& e) {
    throw VersionError(path.string() + ": " + e.what());
  } catch (const TruncationError& e) {
    throw TruncationError(path.string() + ": " + e.what());
  } catch (const DigestError& e) {
    throw DigestError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace rsisc
