#include "rsisc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <set>
#include <thread>

#include "rsisc/error.hpp"
#include "rsisc/rng.hpp"

namespace fs = std::filesystem;

namespace rsisc {

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(class_names.size(), 0);
  for (std::size_t l : labels) ++counts.at(l);
  return counts;
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.class_names = class_names;
  for (std::size_t i : indices) {
    out.images.push_back(images.at(i));
    out.labels.push_back(labels.at(i));
    if (!ids.empty()) out.ids.push_back(ids.at(i));
  }
  return out;
}

Dataset load_dataset(const fs::path& root, const std::vector<std::string>& only) {
  if (!fs::is_directory(root)) throw IoError("dataset root is not a directory: " + root.string());
  const std::set<std::string> wanted(only.begin(), only.end());

  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) throw IoError("no class directories under " + root.string());

  Dataset data;
  std::vector<fs::path> paths;
  for (const fs::path& dir : class_dirs) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      const std::string ext = entry.path().extension().string();
      if (ext == ".ppm" || ext == ".PPM") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("empty class directory: " + dir.string());

    const std::size_t label = data.class_names.size();
    data.class_names.push_back(dir.filename().string());
    for (const fs::path& file : files) {
      std::string id = dir.filename().string() + "/" + file.filename().string();
      if (!wanted.empty() && !wanted.count(id)) continue;
      paths.push_back(file);
      data.labels.push_back(label);
      data.ids.push_back(std::move(id));
    }
  }

  // Decode in contiguous chunks, one per hardware thread.
  data.images.resize(paths.size());
  const std::size_t workers = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 16);
  const std::size_t chunk = (paths.size() + workers - 1) / std::max<std::size_t>(workers, 1);
  std::vector<std::future<void>> jobs;
  for (std::size_t start = 0; start < paths.size(); start += chunk) {
    const std::size_t end = std::min(paths.size(), start + chunk);
    jobs.push_back(std::async(std::launch::async, [&data, &paths, start, end] {
      for (std::size_t i = start; i < end; ++i) data.images[i] = read_ppm(paths[i]);
    }));
  }
  for (auto& job : jobs) job.wait();
  for (auto& job : jobs) job.get();

  for (std::size_t i = 1; i < data.images.size(); ++i) {
    const Image& img = data.images[i];
    const Image& ref = data.images.front();
    if (img.width != ref.width || img.height != ref.height)
      throw FormatError("inconsistent image dimensions in " + paths[i].string() + ": " + std::to_string(img.width) +
                        "x" + std::to_string(img.height) + ", expected " + std::to_string(ref.width) + "x" +
                        std::to_string(ref.height));
  }
  return data;
}

void write_dataset_tree(const Dataset& data, const fs::path& root) {
  std::vector<std::size_t> next(data.num_classes(), 0);
  for (const std::string& name : data.class_names) fs::create_directories(root / name);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t label = data.labels[i];
    fs::path file;
    if (!data.ids.empty()) {
      file = root / data.ids[i];
      if (file.extension() != ".ppm") file += ".ppm";
    } else {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%06zu.ppm", next[label]++);
      file = root / data.class_names[label] / buf;
    }
    write_ppm(file, data.images[i]);
  }
}

Split split(const Dataset& data, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train fraction must lie in (0, 1), got " + std::to_string(train_fraction));
  std::vector<std::vector<std::size_t>> per_class(data.num_classes());
  for (std::size_t i = 0; i < data.size(); ++i) per_class.at(data.labels[i]).push_back(i);

  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    std::vector<std::size_t> members = per_class[c];
    if (members.empty()) continue;
    Rng rng(derive_seed(seed, {c}));
    std::shuffle(members.begin(), members.end(), rng);
    const auto n = members.size();
    auto take = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    take = std::clamp<std::size_t>(take, 1, n);
    train_idx.insert(train_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
    test_idx.insert(test_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(take), members.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {data.subset(train_idx), data.subset(test_idx)};
}

}  // namespace rsisc
