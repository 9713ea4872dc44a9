#include "rsisc/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <string>

#include "rsisc/error.hpp"

namespace rsisc {

Tensor to_feature_map(std::span<const Image> images) {
  if (images.empty()) throw ShapeError("to_feature_map: empty batch");
  const Image& ref = images.front();
  Tensor out({images.size(), ref.width, ref.height, ref.channels});
  double* od = out.data().data();
  for (const Image& img : images) {
    if (img.width != ref.width || img.height != ref.height || img.channels != ref.channels)
      throw ShapeError("to_feature_map: images of different sizes in one batch");
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t c = 0; c < img.channels; ++c) *od++ = img.at(x, y, c);
  }
  return out;
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      if (!tok.empty()) break;
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  if (tok.empty()) throw FormatError("PPM: truncated header");
  return tok;
}

std::size_t header_number(std::istream& in) {
  const std::string tok = header_token(in);
  if (!std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
    throw FormatError("PPM: expected a number in header, got '" + tok + "'");
  return std::stoul(tok);
}

}  // namespace

Image decode_ppm(std::istream& in) {
  const std::string magic = header_token(in);
  if (magic != "P6" && magic != "P3") throw FormatError("PPM: unsupported magic '" + magic + "'");
  const std::size_t w = header_number(in);
  const std::size_t h = header_number(in);
  const std::size_t maxval = header_number(in);
  if (w == 0 || h == 0 || w > 65536 || h > 65536) throw FormatError("PPM: bad dimensions");
  if (maxval == 0 || maxval > 65535) throw FormatError("PPM: bad maxval");
  Image img(w, h, 3);
  const auto scale = static_cast<double>(maxval);
  if (magic == "P3") {
    for (double& v : img.pixels) {
      const std::size_t s = header_number(in);
      if (s > maxval) throw FormatError("PPM: sample exceeds maxval");
      v = static_cast<double>(s) / scale;
    }
    return img;
  }
  const std::size_t bytes_per = maxval < 256 ? 1 : 2;
  std::vector<unsigned char> raw(img.pixels.size() * bytes_per);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
    throw FormatError("PPM: truncated pixel data");
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const std::size_t s = bytes_per == 1 ? raw[i] : (std::size_t{raw[2 * i]} << 8) | raw[2 * i + 1];
    if (s > maxval) throw FormatError("PPM: sample exceeds maxval");
    img.pixels[i] = static_cast<double>(s) / scale;
  }
  return img;
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  try {
    return decode_ppm(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_ppm(const std::filesystem::path& path, const Image& img) {
  if (img.channels != 3) throw ShapeError("write_ppm: only 3-channel images are supported");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image " + path.string());
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  std::vector<char> raw(img.pixels.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    raw[i] = static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(img.pixels[i], 0.0, 1.0) * 255.0)));
  out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace rsisc
