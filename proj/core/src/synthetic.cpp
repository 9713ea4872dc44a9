#include "rsisc/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "rsisc/error.hpp"
#include "rsisc/rng.hpp"

namespace rsisc {

namespace {

struct Palette {
  std::array<double, 3> low;
  std::array<double, 3> high;
};

Palette draw_palette(Rng& rng) {
  Palette p;
  const double base = 0.1 + 0.3 * uniform01(rng);
  const double contrast = 0.35 + 0.35 * uniform01(rng);
  for (std::size_t c = 0; c < 3; ++c) {
    const double tint = 0.1 * (uniform01(rng) - 0.5);
    p.low[c] = std::clamp(base + tint, 0.0, 1.0);
    p.high[c] = std::clamp(base + contrast + tint, 0.0, 1.0);
  }
  return p;
}

double wave(double t) { return 0.5 + 0.5 * std::sin(t); }

// Intensity in [0, 1] for pixel (x, y) of one texture instance.
using Pattern = double (*)(double x, double y, const std::array<double, 4>& k);

double checker(double x, double y, const std::array<double, 4>& k) {
  const auto cx = static_cast<long>(std::floor((x + k[1]) / k[0]));
  const auto cy = static_cast<long>(std::floor((y + k[2]) / k[0]));
  return ((cx + cy) & 1) ? 1.0 : 0.0;
}

double stripes(double x, double y, const std::array<double, 4>& k) {
  const double t = k[3] < 0.5 ? x : y;
  return wave(2.0 * std::numbers::pi * (t + k[1]) / k[0]) > 0.5 ? 1.0 : 0.0;
}

double blobs(double x, double y, const std::array<double, 4>& k) {
  // Three soft discs placed on a jittered triangle.
  double v = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double angle = k[3] * 2.0 * std::numbers::pi + i * 2.0 * std::numbers::pi / 3.0;
    const double cx = k[1] + 4.5 * std::cos(angle);
    const double cy = k[2] + 4.5 * std::sin(angle);
    const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
    v = std::max(v, std::exp(-d2 / (2.0 * k[0] * k[0])));
  }
  return v;
}

double dots(double x, double y, const std::array<double, 4>& k) {
  const double px = std::fmod(x + k[1], k[0]);
  const double py = std::fmod(y + k[2], k[0]);
  return (px < 1.0 && py < 1.0) ? 1.0 : 0.0;
}

double diagonal(double x, double y, const std::array<double, 4>& k) {
  const double t = k[3] < 0.5 ? x + y : x - y;
  return wave(2.0 * std::numbers::pi * (t + k[1]) / k[0]);
}

double crosshatch(double x, double y, const std::array<double, 4>& k) {
  const double a = wave(2.0 * std::numbers::pi * (x + y + k[1]) / k[0]);
  const double b = wave(2.0 * std::numbers::pi * (x - y + k[2]) / k[0]);
  return std::max(a, b) > 0.85 ? 1.0 : 0.0;
}

double grid(double x, double y, const std::array<double, 4>& k) {
  const double px = std::fmod(x + k[1], k[0]);
  const double py = std::fmod(y + k[2], k[0]);
  return (px < 1.0 || py < 1.0) ? 1.0 : 0.0;
}

double rings(double x, double y, const std::array<double, 4>& k) {
  const double r = std::hypot(x - k[1], y - k[2]);
  return wave(2.0 * std::numbers::pi * r / k[0] + k[3] * 2.0 * std::numbers::pi);
}

struct TextureClass {
  const char* name;
  Pattern pattern;
  double period_low;
  double period_high;
};

const std::array<TextureClass, 4>& classes_of(TextureTask task) {
  static const std::array<TextureClass, 4> task_a{{
      {"blobs", blobs, 1.2, 2.2},
      {"checker", checker, 2.0, 4.0},
      {"dots", dots, 3.0, 5.0},
      {"stripes", stripes, 3.0, 6.0},
  }};
  static const std::array<TextureClass, 4> task_b{{
      {"crosshatch", crosshatch, 4.0, 7.0},
      {"diagonal", diagonal, 3.0, 6.0},
      {"grid", grid, 3.0, 6.0},
      {"rings", rings, 3.0, 5.0},
  }};
  return task == TextureTask::a ? task_a : task_b;
}

}  // namespace

std::vector<std::string> texture_class_names(TextureTask task) {
  std::vector<std::string> names;
  for (const auto& c : classes_of(task)) names.emplace_back(c.name);
  return names;
}

TextureTask parse_texture_task(const std::string& text) {
  if (text == "a" || text == "A") return TextureTask::a;
  if (text == "b" || text == "B") return TextureTask::b;
  throw ConfigError("unknown texture task '" + text + "' (expected a or b)");
}

Dataset make_texture_dataset(const SyntheticConfig& cfg) {
  if (cfg.per_class == 0) throw ConfigError("per_class must be positive");
  if (cfg.size < 4) throw ConfigError("texture images must be at least 4x4");
  if (!(cfg.noise >= 0.0)) throw ConfigError("noise must be non-negative");
  const auto& classes = classes_of(cfg.task);
  Dataset data;
  data.class_names = texture_class_names(cfg.task);
  const double side = static_cast<double>(cfg.size);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    for (std::size_t i = 0; i < cfg.per_class; ++i) {
      Rng rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(cfg.task), c, i}));
      const auto& tc = classes[c];
      const double period = tc.period_low + (tc.period_high - tc.period_low) * uniform01(rng);
      const std::array<double, 4> k{period, side * uniform01(rng), side * uniform01(rng), uniform01(rng)};
      const Palette palette = draw_palette(rng);
      std::normal_distribution<double> noise(0.0, cfg.noise > 0.0 ? cfg.noise : 1.0);
      Image img(cfg.size, cfg.size);
      for (std::size_t y = 0; y < cfg.size; ++y)
        for (std::size_t x = 0; x < cfg.size; ++x) {
          const double v = tc.pattern(static_cast<double>(x), static_cast<double>(y), k);
          for (std::size_t ch = 0; ch < 3; ++ch) {
            double p = palette.low[ch] + v * (palette.high[ch] - palette.low[ch]);
            if (cfg.noise > 0.0) p += noise(rng);
            img.at(x, y, ch) = std::clamp(p, 0.0, 1.0);
          }
        }
      char id[16];
      std::snprintf(id, sizeof id, "%04zu.ppm", i);
      data.images.push_back(std::move(img));
      data.labels.push_back(c);
      data.ids.push_back(std::string(tc.name) + "/" + id);
    }
  }
  return data;
}

}  // namespace rsisc
