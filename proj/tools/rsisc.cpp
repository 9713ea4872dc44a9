#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "manifest.hpp"
#include "rsisc/augment.hpp"
#include "rsisc/checkpoint.hpp"
#include "rsisc/config.hpp"
#include "rsisc/dataset.hpp"
#include "rsisc/error.hpp"
#include "rsisc/fusion.hpp"
#include "rsisc/gradcheck.hpp"
#include "rsisc/synthetic.hpp"
#include "rsisc/trainer.hpp"
#include "svg_plot.hpp"

namespace fs = std::filesystem;
using namespace rsisc;
using rsisc::cli::Manifest;

namespace {

struct Common {
  std::string data;
  std::string config;
  std::string list;
  std::optional<std::uint64_t> seed;
  std::string strategy;
  std::string from;
  std::string pool;
  std::string pool_mode;
  std::string out = ".";
  std::optional<std::size_t> epochs;
  std::optional<double> learning_rate;
};

std::vector<std::string> g_argv;

KeyValueConfig effective_config(const Common& o) {
  KeyValueConfig kv = o.config.empty() ? KeyValueConfig{} : KeyValueConfig::load(o.config);
  if (o.seed) kv.set("train", "seed", std::to_string(*o.seed));
  if (!o.strategy.empty()) kv.set("train", "strategy", to_string(parse_strategy(o.strategy)));
  if (!o.pool.empty()) kv.set("model", "pool", to_string(parse_pool_kind(o.pool)));
  if (!o.pool_mode.empty()) kv.set("attention", "mode", to_string(parse_pool_mode(o.pool_mode)));
  if (o.epochs) kv.set("train", "epochs", std::to_string(*o.epochs));
  if (o.learning_rate) kv.set("train", "learning_rate", format_double(*o.learning_rate));
  return kv;
}

std::vector<std::string> read_list(const std::string& path) {
  std::vector<std::string> ids;
  if (path.empty()) return ids;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open list " + path);
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) ids.push_back(line);
  if (ids.empty()) throw FormatError("list " + path + " is empty");
  return ids;
}

Dataset load(const Common& o) {
  if (o.data.empty()) throw ConfigError("--data is required");
  Dataset data = load_dataset(o.data, read_list(o.list));
  if (data.size() == 0) throw ConfigError("no images selected from " + o.data);
  return data;
}

fs::path prepare_out(const Common& o) {
  fs::path dir(o.out);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

int run_train(const Common& o) {
  KeyValueConfig kv = effective_config(o);
  std::optional<Checkpoint> source;
  if (!o.from.empty()) {
    source = load_checkpoint(o.from);
    if (!kv.get("train", "strategy")) kv.set("train", "strategy", "transfer");
    if (!kv.get("backbone", "stages")) kv.set("backbone", "stages", stages_to_string(source->model.backbone.stages));
  }
  const TrainConfig cfg = read_train_config(kv);
  if (cfg.strategy == Strategy::transfer && !source) throw ConfigError("--strategy transfer needs --from <checkpoint>");

  const Dataset raw = load(o);
  if (!kv.get("head", "classes")) kv.set("head", "classes", std::to_string(raw.num_classes()));
  if (!kv.get("model", "input_size")) {
    const std::size_t side = raw.images.front().width;
    if (side <= cfg.crop_reduction) throw ConfigError("images are smaller than the crop reduction");
    kv.set("model", "input_size", std::to_string(side - cfg.crop_reduction));
  }
  const ModelConfig model = read_model_config(kv);
  const Dataset data = expand_rotations(raw);

  const fs::path dir = prepare_out(o);
  KeyValueConfig resolved;
  write_model_config(resolved, model);
  write_train_config(resolved, cfg);
  write_text(dir / "config.conf", resolved.to_text());

  std::cerr << "training on " << data.size() << " images (" << raw.size() << " before rotation), "
            << data.num_classes() << " classes\n";
  TrainResult result = train(data, model, cfg, source ? &*source : nullptr, [](const EpochRecord& r) {
    std::fprintf(stderr, "epoch %4zu  loss %.5f  train %.2f%%  val %.2f%%  (%.1fs)\n", r.epoch, r.loss,
                 r.train_accuracy, r.val_accuracy, r.seconds);
  });

  save_checkpoint(result.checkpoint, dir / "checkpoint.rsisc");
  {
    std::ofstream h(dir / "history.tsv");
    result.history.write(h);
    std::ofstream t(dir / "timing.tsv");
    result.history.write(t, true);
  }

  Manifest manifest("train", g_argv);
  manifest.set("seed", std::to_string(cfg.seed));
  manifest.set("data", o.data);
  if (!o.list.empty()) manifest.set("list", o.list);
  if (source) {
    manifest.set("from", o.from);
    manifest.set("from_digest", "fnv1a64:" + cli::hex_digest(o.from));
  }
  manifest.add_config(resolved);
  for (const char* name : {"config.conf", "checkpoint.rsisc", "history.tsv"}) manifest.add_artifact(dir / name);
  manifest.write(dir);
  if (!result.history.epochs.empty()) {
    const auto& last = result.history.epochs.back();
    std::printf("epochs %zu  train %.2f%%  val %.2f%%\n", last.epoch, last.train_accuracy, last.val_accuracy);
  }
  return 0;
}

int run_eval(const Common& o) {
  if (o.from.empty()) throw ConfigError("--from <checkpoint> is required");
  Checkpoint ckpt = load_checkpoint(o.from);
  const Dataset data = load(o);
  if (data.class_names.size() != ckpt.model.head.num_classes)
    throw ConfigError("dataset has " + std::to_string(data.num_classes()) + " classes, checkpoint expects " +
                      std::to_string(ckpt.model.head.num_classes));
  const std::size_t side = data.images.front().width;
  if (side < ckpt.model.input_size) throw ConfigError("images are smaller than the model input");
  const std::size_t crop = side - ckpt.model.input_size;

  const Tensor probs = predict_dataset(data, ckpt.params, ckpt.model, crop);
  const double acc = accuracy(predict_label(probs), data.labels);

  const fs::path dir = prepare_out(o);
  {
    std::ofstream out(dir / "probabilities.txt");
    write_probabilities(out, data.ids, probs, data.class_names);
  }
  Manifest manifest("eval", g_argv);
  manifest.set("data", o.data);
  if (!o.list.empty()) manifest.set("list", o.list);
  manifest.set("from", o.from);
  manifest.set("from_digest", "fnv1a64:" + cli::hex_digest(o.from));
  manifest.set("accuracy", format_double(acc));
  manifest.add_artifact(dir / "probabilities.txt");
  manifest.write(dir);
  std::printf("accuracy %.2f%% on %zu images\n", acc, data.size());
  return 0;
}

std::vector<std::size_t> labels_from_ids(const ProbabilityFile& f) {
  if (f.class_names.empty()) throw FormatError("probability file has no '# classes' line, cannot recover labels");
  std::vector<std::size_t> labels;
  for (const auto& id : f.ids) {
    const std::string cls = id.substr(0, id.find('/'));
    const auto it = std::find(f.class_names.begin(), f.class_names.end(), cls);
    if (it == f.class_names.end()) throw FormatError("id '" + id + "' does not start with a known class");
    labels.push_back(static_cast<std::size_t>(it - f.class_names.begin()));
  }
  return labels;
}

int run_fuse(const Common& o, const std::vector<std::string>& inputs, const std::vector<std::string>& names) {
  if (inputs.empty()) throw ConfigError("fuse needs at least one probability file");
  if (!names.empty() && names.size() != inputs.size())
    throw ConfigError("--name must be given once per input file");
  FusionInput in;
  std::vector<ProbabilityFile> files;
  for (const auto& path : inputs) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    files.push_back(read_probabilities(f));
    if (files.back().ids != files.front().ids) throw FormatError(path + ": example ids differ from " + inputs.front());
    in.model_ids.push_back(names.empty() ? fs::path(path).parent_path().filename().string() : names[files.size() - 1]);
    in.probabilities.push_back(files.back().probabilities);
  }
  const std::vector<std::size_t> truth = labels_from_ids(files.front());
  const Tensor log_scores = prod_fuse_log(in);
  const double fused_acc = accuracy(predict_label(log_scores), truth);

  std::vector<FusionReportRow> rows;
  for (std::size_t n = 0; n < in.models(); ++n) {
    const auto& id = in.model_ids[n];
    const auto colon = id.find(':');
    rows.push_back({colon == std::string::npos ? "-" : id.substr(0, colon),
                    colon == std::string::npos ? id : id.substr(colon + 1),
                    accuracy(predict_label(in.probabilities[n]), truth)});
  }
  rows.push_back({"PROD", "ensemble of " + std::to_string(in.models()), fused_acc});

  const fs::path dir = prepare_out(o);
  {
    std::ofstream out(dir / "fused.txt");
    write_probabilities(out, files.front().ids, softmax_rows(log_scores), files.front().class_names);
    std::ofstream report(dir / "report.md");
    write_fusion_report(report, rows);
  }
  Manifest manifest("fuse", g_argv);
  for (std::size_t n = 0; n < inputs.size(); ++n)
    manifest.set("input." + in.model_ids[n], inputs[n] + " fnv1a64:" + cli::hex_digest(inputs[n]));
  manifest.set("accuracy", format_double(fused_acc));
  manifest.add_artifact(dir / "fused.txt");
  manifest.add_artifact(dir / "report.md");
  manifest.write(dir);
  write_fusion_report(std::cout, rows);
  return 0;
}

int run_split(const Common& o, double fraction) {
  const KeyValueConfig kv = effective_config(o);
  const std::uint64_t seed = kv.get_u64("train", "seed", 0);
  const Dataset data = load(o);
  const Split parts = split(data, fraction, seed);
  const fs::path dir = prepare_out(o);
  auto write_ids = [&](const fs::path& path, const Dataset& d) {
    std::ofstream out(path);
    for (const auto& id : d.ids) out << id << '\n';
  };
  write_ids(dir / "train.txt", parts.train);
  write_ids(dir / "test.txt", parts.test);
  Manifest manifest("split", g_argv);
  manifest.set("data", o.data);
  manifest.set("seed", std::to_string(seed));
  manifest.set("fraction", format_double(fraction));
  manifest.add_artifact(dir / "train.txt");
  manifest.add_artifact(dir / "test.txt");
  manifest.write(dir);
  std::printf("%zu train / %zu test\n", parts.train.size(), parts.test.size());
  return 0;
}

int run_augment_preview(const Common& o, std::size_t count) {
  const KeyValueConfig kv = effective_config(o);
  const TrainConfig cfg = read_train_config(kv);
  const Dataset data = load(o);
  if (count < 2) throw ConfigError("--count must be at least 2 so mixup has a partner");
  count = std::min(count, data.size());
  std::vector<std::size_t> picks;
  Rng pick_rng(derive_seed(cfg.seed, {0x9e37}));
  for (std::size_t i = 0; i < count; ++i) picks.push_back(uniform_index(pick_rng, data.size() - 1));

  const fs::path dir = prepare_out(o);
  Manifest manifest("augment-preview", g_argv);
  manifest.set("seed", std::to_string(cfg.seed));
  auto save = [&](const std::string& name, const Image& img) {
    write_ppm(dir / name, img);
    manifest.add_artifact(dir / name);
  };
  LabeledBatch batch = make_batch(data, picks);
  for (std::size_t i = 0; i < count; ++i) {
    char prefix[24];
    std::snprintf(prefix, sizeof prefix, "%02zu", i);
    const Image& img = batch.images[i];
    save(std::string(prefix) + "_original.ppm", img);
    for (int angle : {90, 180, 270}) save(std::string(prefix) + "_rot" + std::to_string(angle) + ".ppm", rotate(img, angle));
    Rng rng(derive_seed(cfg.seed, {i}));
    Image cropped = random_crop(img, cfg.crop_reduction, rng);
    save(std::string(prefix) + "_crop.ppm", cropped);
    Image erased = random_erase(cropped, cfg.erase_size, cfg.erase_fill, rng);
    save(std::string(prefix) + "_erase.ppm", erased);
    batch.images[i] = std::move(erased);
  }
  Rng mix_rng(derive_seed(cfg.seed, {count}));
  const LabeledBatch mixed = mixup_expand(batch, cfg.mixup, mix_rng);
  for (std::size_t i = 0; i < count; ++i) {
    char prefix[24];
    std::snprintf(prefix, sizeof prefix, "%02zu", i);
    save(std::string(prefix) + "_mix_uniform.ppm", mixed.images[count + i]);
    save(std::string(prefix) + "_mix_beta.ppm", mixed.images[2 * count + i]);
  }
  manifest.write(dir);
  std::printf("wrote previews for %zu images to %s\n", count, dir.string().c_str());
  return 0;
}

int run_gradcheck(const Common& o, std::size_t probes, std::size_t batch, double step, double tolerance,
                  double variance, bool verbose) {
  KeyValueConfig kv = effective_config(o);
  ModelConfig model = read_model_config(kv);
  model.head.dropout_rate = 0.0;
  const TrainConfig cfg = read_train_config(kv);
  Rng rng(derive_seed(cfg.seed, {0x6772}));
  // At the default N(0, 0.1) init the loss saturates and its gradient is exactly zero.
  ModelParams params = init_params(model, Strategy::direct, nullptr, rng, InitOptions{variance, cfg.init.zero_bias});

  const std::size_t s = model.input_size;
  Tensor images({batch, s, s, model.backbone.in_channels});
  for (double& v : images.data()) v = uniform01(rng);
  const std::size_t rows = batch * model.rows_per_image();
  Tensor targets({rows, model.head.num_classes});
  for (std::size_t r = 0; r < rows; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < model.head.num_classes; ++c) total += targets.at({r, c}) = 0.1 + uniform01(rng);
    for (std::size_t c = 0; c < model.head.num_classes; ++c) targets.at({r, c}) /= total;
  }

  const GradCheckReport report = check_model_gradients(model, params, images, targets, cfg.loss, probes, rng, step);
  if (verbose)
    for (const auto& p : report.probes)
      std::printf("%-28s %6zu  analytic % .10e  numeric % .10e  rel %.3e\n", p.param.c_str(), p.index, p.analytic,
                  p.numeric, p.relative_error);
  const bool ok = report.max_relative_error < tolerance;
  std::printf("loss %.6g\n", report.loss);
  std::printf("%zu probes, max relative error %.3e (tolerance %.1e): %s\n", report.probes.size(),
              report.max_relative_error, tolerance, ok ? "ok" : "FAILED");
  return ok ? 0 : 1;
}

int run_plot(const Common& o, const std::string& history_path) {
  std::ifstream in(history_path);
  if (!in) throw IoError("cannot open " + history_path);
  const TrainHistory history = TrainHistory::read(in);
  const fs::path dir = prepare_out(o);
  {
    std::ofstream out(dir / "curves.svg");
    cli::write_history_svg(out, history);
  }
  std::printf("wrote %s\n", (dir / "curves.svg").string().c_str());
  return 0;
}

int run_make_synthetic(const Common& o, const std::string& task, std::size_t per_class, std::size_t size,
                       double noise) {
  SyntheticConfig cfg;
  cfg.task = parse_texture_task(task);
  cfg.per_class = per_class;
  cfg.size = size;
  cfg.noise = noise;
  cfg.seed = o.seed.value_or(0);
  const Dataset data = make_texture_dataset(cfg);
  const fs::path dir = prepare_out(o);
  write_dataset_tree(data, dir);
  std::printf("wrote %zu images in %zu classes to %s\n", data.size(), data.num_classes(), dir.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  g_argv.assign(argv, argv + argc);
  CLI::App app{"Remote-sensing scene classification with attention pooling"};
  app.require_subcommand(1);
  Common o;

  auto add_out = [&](CLI::App* sub) { sub->add_option("--out", o.out, "Output directory")->capture_default_str(); };
  auto add_data = [&](CLI::App* sub) {
    sub->add_option("--data", o.data, "Dataset root with one subdirectory per class");
    sub->add_option("--list", o.list, "File of example ids to keep (output of split)");
  };
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Key-value config file");
    sub->add_option("--seed", o.seed, "Run seed");
  };
  auto add_model = [&](CLI::App* sub) {
    sub->add_option("--pool", o.pool, "attention|avg|max");
    sub->add_option("--pool-mode", o.pool_mode, "Pooling inside the attention streams: average|max");
  };

  auto* train_cmd = app.add_subcommand("train", "Train a model");
  add_data(train_cmd);
  add_config(train_cmd);
  add_model(train_cmd);
  add_out(train_cmd);
  train_cmd->add_option("--strategy", o.strategy, "direct|transfer");
  train_cmd->add_option("--from", o.from, "Source checkpoint for transfer learning");
  train_cmd->add_option("--epochs", o.epochs, "Epoch budget");
  train_cmd->add_option("--lr", o.learning_rate, "Learning rate");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint and write class probabilities");
  add_data(eval_cmd);
  add_out(eval_cmd);
  eval_cmd->add_option("--from", o.from, "Checkpoint to evaluate")->required();

  std::vector<std::string> fuse_inputs, fuse_names;
  auto* fuse_cmd = app.add_subcommand("fuse", "PROD-fuse probability files from eval");
  fuse_cmd->add_option("inputs", fuse_inputs, "probabilities.txt files")->required();
  fuse_cmd->add_option("--name", fuse_names, "Column label per input, as pooling:network");
  add_out(fuse_cmd);

  double fraction = 0.2;
  auto* split_cmd = app.add_subcommand("split", "Stratified train/test split of a dataset tree");
  add_data(split_cmd);
  add_config(split_cmd);
  add_out(split_cmd);
  split_cmd->add_option("--fraction", fraction, "Training fraction per class")->capture_default_str();

  std::size_t preview_count = 4;
  auto* preview_cmd = app.add_subcommand("augment-preview", "Write images before and after each augmentation");
  add_data(preview_cmd);
  add_config(preview_cmd);
  add_out(preview_cmd);
  preview_cmd->add_option("--count", preview_count, "Number of images")->capture_default_str();

  std::size_t probes = 100, gc_batch = 2;
  double gc_variance = 0.01;
  double tolerance = 1e-4, step = 1e-5;
  bool verbose = false;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Compare model gradients with central finite differences");
  add_config(grad_cmd);
  add_model(grad_cmd);
  grad_cmd->add_option("--probes", probes, "Parameters to probe")->capture_default_str();
  grad_cmd->add_option("--batch", gc_batch, "Random images per check")->capture_default_str();
  grad_cmd->add_option("--step", step, "Finite-difference step h")->capture_default_str();
  grad_cmd->add_option("--tolerance", tolerance, "Maximum relative error")->capture_default_str();
  grad_cmd->add_option("--init-variance", gc_variance, "Variance of the random parameters")->capture_default_str();
  grad_cmd->add_flag("--verbose", verbose, "Print every probe");

  std::string history_path;
  auto* plot_cmd = app.add_subcommand("plot", "Render a training history as SVG curves");
  plot_cmd->add_option("history", history_path, "history.tsv from train")->required();
  add_out(plot_cmd);

  std::string task = "a";
  std::size_t per_class = 24, size = 16;
  double noise = 0.08;
  auto* synth_cmd = app.add_subcommand("make-synthetic", "Write a seeded synthetic texture dataset tree");
  synth_cmd->add_option("--task", task, "a|b")->capture_default_str();
  synth_cmd->add_option("--per-class", per_class, "Images per class")->capture_default_str();
  synth_cmd->add_option("--size", size, "Image side in pixels")->capture_default_str();
  synth_cmd->add_option("--noise", noise, "Pixel noise std-dev")->capture_default_str();
  synth_cmd->add_option("--seed", o.seed, "Generator seed");
  add_out(synth_cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return run_train(o);
    if (*eval_cmd) return run_eval(o);
    if (*fuse_cmd) return run_fuse(o, fuse_inputs, fuse_names);
    if (*split_cmd) return run_split(o, fraction);
    if (*preview_cmd) return run_augment_preview(o, preview_count);
    if (*grad_cmd) return run_gradcheck(o, probes, gc_batch, step, tolerance, gc_variance, verbose);
    if (*plot_cmd) return run_plot(o, history_path);
    if (*synth_cmd) return run_make_synthetic(o, task, per_class, size, noise);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
