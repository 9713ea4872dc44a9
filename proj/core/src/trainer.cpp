#include "rsisc/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <future>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "rsisc/error.hpp"
#include "rsisc/fusion.hpp"

namespace rsisc {

namespace {

enum Salt : std::uint64_t { kInit = 1, kValidation, kShuffle, kBatch, kCrop, kErase, kMix, kDropout };

std::string strip_rotation(const std::string& id) {
  const auto at = id.rfind("@rot");
  return at == std::string::npos ? id : id.substr(0, at);
}

// Stratified hold-out that keeps all rotations of one source image on the
// same side.
std::pair<Dataset, Dataset> hold_out(const Dataset& data, double fraction, std::uint64_t seed) {
  if (fraction <= 0.0) return {data, Dataset{data.class_names, {}, {}, {}}};
  std::vector<std::vector<std::string>> groups_per_class(data.num_classes());
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::string key = data.ids.empty() ? std::to_string(i) : strip_rotation(data.ids[i]);
    auto& list = members[key];
    if (list.empty()) groups_per_class[data.labels[i]].push_back(key);
    list.push_back(i);
  }
  std::vector<std::size_t> train_idx, val_idx;
  for (std::size_t c = 0; c < groups_per_class.size(); ++c) {
    auto groups = groups_per_class[c];
    Rng rng(derive_seed(seed, {kValidation, c}));
    std::shuffle(groups.begin(), groups.end(), rng);
    std::size_t take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(groups.size())));
    if (groups.size() >= 2) take = std::clamp<std::size_t>(take, 1, groups.size() - 1);
    else take = 0;
    for (std::size_t g = 0; g < groups.size(); ++g)
      for (std::size_t i : members[groups[g]]) (g < take ? val_idx : train_idx).push_back(i);
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());
  return {data.subset(train_idx), data.subset(val_idx)};
}

LabeledBatch prepare_batch(const Dataset& data, const std::vector<std::size_t>& indices, const TrainConfig& cfg,
                           std::uint64_t batch_seed) {
  LabeledBatch batch = make_batch(data, indices);
  if (!cfg.augment) {
    for (Image& img : batch.images) img = center_crop(img, cfg.crop_reduction);
    return batch;
  }
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Rng crop_rng(derive_seed(batch_seed, {kCrop, i}));
    batch.images[i] = random_crop(batch.images[i], cfg.crop_reduction, crop_rng);
    if (cfg.erase_size > 0) {
      Rng erase_rng(derive_seed(batch_seed, {kErase, i}));
      batch.images[i] = random_erase(batch.images[i], cfg.erase_size, cfg.erase_fill, erase_rng);
    }
  }
  Rng mix_rng(derive_seed(batch_seed, {kMix}));
  return mixup_expand(batch, cfg.mixup, mix_rng);
}

Tensor repeat_rows(const Tensor& t, std::size_t times) {
  if (times == 1) return t;
  std::vector<double> values;
  values.reserve(t.size() * times);
  for (std::size_t k = 0; k < times; ++k) values.insert(values.end(), t.data().begin(), t.data().end());
  return Tensor({t.extent(0) * times, t.extent(1)}, std::move(values));
}

std::string format_value(const char* fmt, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

}  // namespace

void optimizer_step(ModelParams& params, OptimizerState& state, const OptimizerConfig& cfg, double learning_rate) {
  for (const auto& [name, p] : params)
    if (!p.grad.all_finite()) throw NumericError("non-finite gradient in " + name);
  ++state.step;
  if (cfg.kind == OptimizerKind::sgd) {
    for (auto& [name, p] : params)
      for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] -= learning_rate * p.grad[i];
    return;
  }
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [name, p] : params) {
    auto m_it = state.first_moment.try_emplace(name, p.value.shape(), 0.0).first;
    auto v_it = state.second_moment.try_emplace(name, p.value.shape(), 0.0).first;
    Tensor& m = m_it->second;
    Tensor& v = v_it->second;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p.value[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2 for mixup pairing");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw ConfigError("validation_fraction must lie in [0, 1)");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0 && optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0))
    throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(optimizer.epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
  mixup.validate();
  loss.validate();
  if (!(init.variance > 0.0)) throw ConfigError("init variance must be positive");
}

void TrainHistory::write(std::ostream& out, bool include_seconds) const {
  out << "epoch\tloss\ttrain_acc\tval_acc";
  if (include_seconds) out << "\tseconds";
  out << '\n';
  for (const auto& r : epochs) {
    out << r.epoch << '\t' << format_value("%.10g", r.loss) << '\t' << format_value("%.4f", r.train_accuracy) << '\t'
        << format_value("%.4f", r.val_accuracy);
    if (include_seconds) out << '\t' << format_value("%.3f", r.seconds);
    out << '\n';
  }
}

TrainHistory TrainHistory::read(std::istream& in) {
  TrainHistory history;
  std::string line;
  if (!std::getline(in, line) || line.rfind("epoch\t", 0) != 0) throw FormatError("history: missing header");
  const bool has_seconds = line.find("seconds") != std::string::npos;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    EpochRecord r;
    is >> r.epoch >> r.loss >> r.train_accuracy >> r.val_accuracy;
    if (has_seconds) is >> r.seconds;
    if (!is) throw FormatError("history: bad row '" + line + "'");
    history.epochs.push_back(r);
  }
  return history;
}

std::optional<std::size_t> TrainHistory::epochs_to_val_accuracy(double threshold) const {
  for (const auto& r : epochs)
    if (r.val_accuracy >= threshold) return r.epoch;
  return std::nullopt;
}

Tensor predict_dataset(const Dataset& data, ModelParams& params, const ModelConfig& model, std::size_t crop_reduction) {
  std::vector<Image> images;
  images.reserve(data.size());
  for (const Image& img : data.images) images.push_back(center_crop(img, crop_reduction));
  return predict_probs(images, params, model);
}

double evaluate_accuracy(const Dataset& data, ModelParams& params, const ModelConfig& model,
                         std::size_t crop_reduction) {
  const Tensor probs = predict_dataset(data, params, model, crop_reduction);
  const auto predicted = predict_label(probs);
  return accuracy(predicted, data.labels);
}

TrainResult train(const Dataset& data, const ModelConfig& model, const TrainConfig& cfg, const Checkpoint* source,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  model.validate();
  if (data.size() == 0) throw ConfigError("training set is empty");
  if (data.num_classes() != model.head.num_classes)
    throw ConfigError("dataset has " + std::to_string(data.num_classes()) + " classes, model head has " +
                      std::to_string(model.head.num_classes));
  const Image& first = data.images.front();
  if (first.width != first.height || first.width <= cfg.crop_reduction ||
      first.width - cfg.crop_reduction != model.input_size)
    throw ConfigError("images of " + std::to_string(first.width) + "x" + std::to_string(first.height) +
                      " cropped by " + std::to_string(cfg.crop_reduction) + " do not give the model input size " +
                      std::to_string(model.input_size));
  if (cfg.erase_size > model.input_size)
    throw ConfigError("erase size " + std::to_string(cfg.erase_size) + " exceeds the cropped image size");
  if (cfg.strategy == Strategy::transfer && source == nullptr)
    throw ConfigError("transfer training needs a source checkpoint");

  auto held = hold_out(data, cfg.validation_fraction, cfg.seed);
  const Dataset& train_set = held.first;
  const Dataset& val_set = held.second;
  if (train_set.size() < cfg.batch_size)
    throw ConfigError("training set of " + std::to_string(train_set.size()) + " images is smaller than one batch of " +
                      std::to_string(cfg.batch_size));

  Rng init_rng(derive_seed(cfg.seed, {kInit}));
  TrainResult result;
  result.checkpoint.model = model;
  result.checkpoint.params = init_params(model, cfg.strategy, source, init_rng, cfg.init);
  ModelParams& params = result.checkpoint.params;
  OptimizerState opt_state;

  auto& meta = result.checkpoint.metadata;
  meta["seed"] = std::to_string(cfg.seed);
  meta["strategy"] = to_string(cfg.strategy);
  meta["learning_rate"] = format_value("%.17g", cfg.learning_rate);
  if (source != nullptr) {
    char hex[20];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(serialize_checkpoint(*source))));
    meta["source_digest"] = hex;
  }

  const std::size_t rows = model.rows_per_image();
  double best_val = -1.0;
  std::size_t since_best = 0;
  std::size_t completed = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(cfg.seed, {kShuffle, epoch}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), at + cfg.batch_size);
      if (end - at < 2) break;
      batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(at),
                           order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    auto launch = [&](std::size_t b) {
      return std::async(std::launch::async, prepare_batch, std::cref(train_set), std::cref(batches[b]),
                        std::cref(cfg), derive_seed(cfg.seed, {kBatch, epoch, b}));
    };

    double loss_total = 0.0;
    std::future<LabeledBatch> next = launch(0);
    for (std::size_t b = 0; b < batches.size(); ++b) {
      LabeledBatch batch = next.get();
      if (b + 1 < batches.size()) next = launch(b + 1);

      Tape tape;
      Var images = tape.constant(to_feature_map(batch.images));
      Rng dropout_rng(derive_seed(cfg.seed, {kDropout, epoch, b}));
      Var probs = model_forward(tape, images, params, model, true, &dropout_rng);
      Var loss = kl_loss(tape, probs, repeat_rows(batch.labels, rows), params, cfg.loss);
      const double value = loss.value().item();
      if (!std::isfinite(value))
        throw NumericError("loss became non-finite at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b + 1));
      params.zero_grad();
      tape.backward(loss);
      optimizer_step(params, opt_state, cfg.optimizer, cfg.learning_rate);
      loss_total += value;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.loss = loss_total / static_cast<double>(batches.size());
    record.train_accuracy = evaluate_accuracy(train_set, params, model, cfg.crop_reduction);
    record.val_accuracy = val_set.size() ? evaluate_accuracy(val_set, params, model, cfg.crop_reduction) : 0.0;
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.history.epochs.push_back(record);
    completed = epoch;
    if (on_epoch) on_epoch(record);

    if (cfg.stop_at_train_accuracy && record.train_accuracy >= *cfg.stop_at_train_accuracy) break;
    if (cfg.stop_at_val_accuracy && val_set.size() && record.val_accuracy >= *cfg.stop_at_val_accuracy) break;
    if (cfg.patience > 0 && val_set.size()) {
      if (record.val_accuracy > best_val) {
        best_val = record.val_accuracy;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        break;
      }
    }
  }

  meta["epochs_completed"] = std::to_string(completed);
  if (!result.history.epochs.empty()) {
    const auto& last = result.history.epochs.back();
    meta["final_loss"] = format_value("%.17g", last.loss);
    meta["final_train_accuracy"] = format_value("%.17g", last.train_accuracy);
    meta["final_val_accuracy"] = format_value("%.17g", last.val_accuracy);
  }
  return result;
}

}  // namespace rsisc
