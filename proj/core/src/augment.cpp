#include "rsisc/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "rsisc/error.hpp"

namespace rsisc {

Image rotate(const Image& img, int angle) {
  if (angle != 90 && angle != 180 && angle != 270)
    throw ConfigError("rotation angle must be 90, 180 or 270, got " + std::to_string(angle));
  const std::size_t w = img.width, h = img.height;
  Image out = angle == 180 ? Image(w, h, img.channels) : Image(h, w, img.channels);
  for (std::size_t y = 0; y < out.height; ++y)
    for (std::size_t x = 0; x < out.width; ++x) {
      std::size_t sx = 0, sy = 0;
      switch (angle) {
        case 90:
          sx = y;
          sy = h - 1 - x;
          break;
        case 180:
          sx = w - 1 - x;
          sy = h - 1 - y;
          break;
        default:
          sx = w - 1 - y;
          sy = x;
          break;
      }
      for (std::size_t c = 0; c < img.channels; ++c) out.at(x, y, c) = img.at(sx, sy, c);
    }
  return out;
}

Dataset expand_rotations(const Dataset& data) {
  Dataset out;
  out.class_names = data.class_names;
  out.images.reserve(4 * data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.images.push_back(data.images[i]);
    for (int angle : {90, 180, 270}) out.images.push_back(rotate(data.images[i], angle));
    for (int k = 0; k < 4; ++k) out.labels.push_back(data.labels[i]);
    if (!data.ids.empty()) {
      out.ids.push_back(data.ids[i]);
      for (const char* suffix : {"@rot90", "@rot180", "@rot270"}) out.ids.push_back(data.ids[i] + suffix);
    }
  }
  return out;
}

Image crop(const Image& img, std::size_t reduction, std::size_t offset_x, std::size_t offset_y) {
  if (reduction >= img.width || reduction >= img.height)
    throw ShapeError("crop reduction " + std::to_string(reduction) + " must be smaller than image " +
                     std::to_string(img.width) + "x" + std::to_string(img.height));
  if (offset_x > reduction || offset_y > reduction) throw ShapeError("crop offset exceeds reduction");
  Image out(img.width - reduction, img.height - reduction, img.channels);
  for (std::size_t y = 0; y < out.height; ++y) {
    const double* src = &img.pixels[((y + offset_y) * img.width + offset_x) * img.channels];
    std::copy_n(src, out.width * img.channels, &out.pixels[y * out.width * img.channels]);
  }
  return out;
}

Image center_crop(const Image& img, std::size_t reduction) { return crop(img, reduction, reduction / 2, reduction / 2); }

Image random_crop(const Image& img, std::size_t reduction, Rng& rng) {
  if (reduction >= img.width || reduction >= img.height)
    throw ShapeError("crop reduction " + std::to_string(reduction) + " must be smaller than image " +
                     std::to_string(img.width) + "x" + std::to_string(img.height));
  const std::size_t ox = uniform_index(rng, reduction);
  const std::size_t oy = uniform_index(rng, reduction);
  return crop(img, reduction, ox, oy);
}

std::vector<Image> random_crop(std::span<const Image> batch, std::size_t reduction, Rng& rng) {
  std::vector<Image> out;
  out.reserve(batch.size());
  for (const Image& img : batch) out.push_back(random_crop(img, reduction, rng));
  return out;
}

Image erase(const Image& img, std::size_t size, std::size_t offset_x, std::size_t offset_y, double fill) {
  if (size > img.width || size > img.height)
    throw ShapeError("erase size " + std::to_string(size) + " exceeds image " + std::to_string(img.width) + "x" +
                     std::to_string(img.height));
  if (offset_x + size > img.width || offset_y + size > img.height) throw ShapeError("erase block out of bounds");
  Image out = img;
  for (std::size_t y = offset_y; y < offset_y + size; ++y)
    for (std::size_t x = offset_x; x < offset_x + size; ++x)
      for (std::size_t c = 0; c < img.channels; ++c) out.at(x, y, c) = fill;
  return out;
}

Image random_erase(const Image& img, std::size_t size, double fill, Rng& rng) {
  if (size > img.width || size > img.height)
    throw ShapeError("erase size " + std::to_string(size) + " exceeds image " + std::to_string(img.width) + "x" +
                     std::to_string(img.height));
  const std::size_t ox = uniform_index(rng, img.width - size);
  const std::size_t oy = uniform_index(rng, img.height - size);
  return erase(img, size, ox, oy, fill);
}

void MixupConfig::validate() const {
  if (!(0.0 <= uniform_low && uniform_low < uniform_high && uniform_high <= 1.0))
    throw ConfigError("mixup uniform bounds must satisfy 0 <= low < high <= 1");
  if (!(beta_alpha > 0.0 && beta_beta > 0.0)) throw ConfigError("mixup beta parameters must be positive");
}

LabeledBatch make_batch(const Dataset& data, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ShapeError("make_batch: no indices");
  LabeledBatch batch;
  batch.labels = Tensor({indices.size(), data.num_classes()});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    batch.images.push_back(data.images.at(indices[i]));
    batch.labels.at({i, data.labels.at(indices[i])}) = 1.0;
  }
  return batch;
}

Image mix_images(const Image& a, const Image& b, double ratio) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels)
    throw ShapeError("mix_images: image sizes differ");
  Image out = a;
  if (ratio == 1.0) return out;
  for (std::size_t i = 0; i < out.pixels.size(); ++i) out.pixels[i] = ratio * a.pixels[i] + (1.0 - ratio) * b.pixels[i];
  return out;
}

double sample_beta(double alpha, double beta, Rng& rng) {
  std::gamma_distribution<double> ga(alpha, 1.0), gb(beta, 1.0);
  for (;;) {
    const double x = ga(rng);
    const double y = gb(rng);
    if (x + y > 0.0) return x / (x + y);
  }
}

LabeledBatch mix_batch(const LabeledBatch& batch, std::span<const std::size_t> partner, std::span<const double> ratios) {
  const std::size_t n = batch.size();
  if (partner.size() != n || ratios.size() != n) throw ShapeError("mix_batch: partner/ratio count mismatch");
  const std::size_t classes = batch.labels.extent(1);
  LabeledBatch out;
  out.labels = Tensor({n, classes});
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = partner[i];
    const double r = ratios[i];
    if (j >= n) throw ShapeError("mix_batch: partner index out of range");
    if (!(r >= 0.0 && r <= 1.0)) throw NumericError("mix_batch: ratio outside [0, 1]");
    out.images.push_back(mix_images(batch.images[i], batch.images[j], r));
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      const double v = r * batch.labels.at({i, c}) + (1.0 - r) * batch.labels.at({j, c});
      out.labels.at({i, c}) = v;
      total += v;
    }
    // Rounding can leave the row a few ulps away from 1.
    if (total != 1.0)
      for (std::size_t c = 0; c < classes; ++c) out.labels.at({i, c}) /= total;
  }
  return out;
}

LabeledBatch mixup_expand(const LabeledBatch& batch, const MixupConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t n = batch.size();
  if (n < 2) throw ShapeError("mixup_expand needs at least 2 images, got " + std::to_string(n));
  if (batch.labels.rank() != 2 || batch.labels.extent(0) != n)
    throw ShapeError("mixup_expand: labels shape " + shape_string(batch.labels.shape()) + " does not match batch");
  for (const Image& img : batch.images)
    if (img.width != batch.images[0].width || img.height != batch.images[0].height)
      throw ShapeError("mixup_expand: images of different sizes");
  const std::size_t classes = batch.labels.extent(1);
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      const double v = batch.labels.at({i, c});
      if (v < 0.0) throw NumericError("mixup_expand: negative label entry");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) throw NumericError("mixup_expand: label row does not sum to 1");
  }

  Rng pairing(derive_seed(cfg.pairing_seed, {rng()}));
  std::vector<std::size_t> uniform_partner(n), beta_partner(n);
  std::iota(uniform_partner.begin(), uniform_partner.end(), 0);
  std::iota(beta_partner.begin(), beta_partner.end(), 0);
  std::shuffle(uniform_partner.begin(), uniform_partner.end(), pairing);
  std::shuffle(beta_partner.begin(), beta_partner.end(), pairing);

  std::uniform_real_distribution<double> uniform(cfg.uniform_low, cfg.uniform_high);
  std::vector<double> uniform_ratio(n), beta_ratio(n);
  for (double& r : uniform_ratio) r = uniform(rng);
  for (double& r : beta_ratio) r = sample_beta(cfg.beta_alpha, cfg.beta_beta, rng);

  LabeledBatch out;
  out.images = batch.images;
  out.images.reserve(3 * n);
  out.labels = Tensor({3 * n, classes});
  std::copy(batch.labels.data().begin(), batch.labels.data().end(), out.labels.data().begin());
  std::size_t row = n;
  for (const LabeledBatch& mixed : {mix_batch(batch, uniform_partner, uniform_ratio),
                                    mix_batch(batch, beta_partner, beta_ratio)}) {
    for (std::size_t i = 0; i < n; ++i) out.images.push_back(mixed.images[i]);
    std::copy(mixed.labels.data().begin(), mixed.labels.data().end(),
              out.labels.data().begin() + static_cast<std::ptrdiff_t>(row * classes));
    row += n;
  }
  return out;
}

}  // namespace rsisc
