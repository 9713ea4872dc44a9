#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "rsisc/image.hpp"

namespace rsisc {

/// Labelled images. Class indices follow the lexicographic order of
/// class names; `ids` holds "class/file" paths relative to the root when
/// the dataset came from disk.
struct Dataset {
  std::vector<std::string> class_names;
  std::vector<Image> images;
  std::vector<std::size_t> labels;
  std::vector<std::string> ids;

  std::size_t size() const { return images.size(); }
  std::size_t num_classes() const { return class_names.size(); }
  std::vector<std::size_t> class_counts() const;
  // Subset in the given index order.
  Dataset subset(const std::vector<std::size_t>& indices) const;
};

// Reads root/<class>/<file>.ppm. When `only` is non-empty, files whose id is
// not listed are skipped (used to apply a saved split).
Dataset load_dataset(const std::filesystem::path& root, const std::vector<std::string>& only = {});

void write_dataset_tree(const Dataset& data, const std::filesystem::path& root);

struct Split {
  Dataset train;
  Dataset test;
};

// Stratified per class: round(fraction * count) train items per class,
// clamped to [1, count]. Members keep their original relative order.
Split split(const Dataset& data, double train_fraction, std::uint64_t seed);

}  // namespace rsisc
