#include "rsisc/config.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>

#include "rsisc/error.hpp"

namespace rsisc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& section, const std::string& key, const std::string& value,
                            const char* expected) {
  throw ConfigError("[" + section + "] " + key + " = '" + value + "' is not " + expected);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in) {
  KeyValueConfig kv;
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config line " + std::to_string(lineno) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      kv.sections_[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    kv.sections_[section][key] = value;
  }
  return kv;
}

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse(in);
}

void KeyValueConfig::set(const std::string& section, const std::string& key, const std::string& value) {
  if (value.find('\n') != std::string::npos) throw ConfigError("config values cannot contain newlines");
  sections_[section][key] = value;
}

std::optional<std::string> KeyValueConfig::get(const std::string& section, const std::string& key) const {
  auto s = sections_.find(section);
  if (s == sections_.end()) return std::nullopt;
  auto k = s->second.find(key);
  if (k == s->second.end()) return std::nullopt;
  return k->second;
}

const std::map<std::string, std::string>& KeyValueConfig::section(const std::string& name) const {
  static const std::map<std::string, std::string> empty;
  auto it = sections_.find(name);
  return it == sections_.end() ? empty : it->second;
}

std::string KeyValueConfig::get_string(const std::string& section, const std::string& key,
                                       const std::string& fallback) const {
  return get(section, key).value_or(fallback);
}

double KeyValueConfig::get_double(const std::string& section, const std::string& key, double fallback) const {
  const auto v = get(section, key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used != v->size()) bad_value(section, key, *v, "a number");
    return d;
  } catch (const std::logic_error&) {
    bad_value(section, key, *v, "a number");
  }
}

std::uint64_t KeyValueConfig::get_u64(const std::string& section, const std::string& key,
                                      std::uint64_t fallback) const {
  const auto v = get(section, key);
  if (!v) return fallback;
  if (v->empty() || v->find_first_not_of("0123456789") != std::string::npos)
    bad_value(section, key, *v, "a non-negative integer");
  try {
    return std::stoull(*v);
  } catch (const std::logic_error&) {
    bad_value(section, key, *v, "a non-negative integer");
  }
}

std::size_t KeyValueConfig::get_size(const std::string& section, const std::string& key, std::size_t fallback) const {
  return static_cast<std::size_t>(get_u64(section, key, fallback));
}

bool KeyValueConfig::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  const auto v = get(section, key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  bad_value(section, key, *v, "a boolean");
}

std::string KeyValueConfig::to_text() const {
  std::ostringstream os;
  bool first = true;
  for (const auto& [section, entries] : sections_) {
    if (!first) os << '\n';
    first = false;
    os << '[' << section << "]\n";
    for (const auto& [key, value] : entries) os << key << " = " << value << '\n';
  }
  return os.str();
}

void KeyValueConfig::merge(const KeyValueConfig& other) {
  for (const auto& [section, entries] : other.sections_)
    for (const auto& [key, value] : entries) sections_[section][key] = value;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_model_config(KeyValueConfig& kv, const ModelConfig& cfg) {
  kv.set("model", "input_size", std::to_string(cfg.input_size));
  kv.set("model", "pool", to_string(cfg.pool));
  kv.set("backbone", "stages", stages_to_string(cfg.backbone.stages));
  kv.set("backbone", "in_channels", std::to_string(cfg.backbone.in_channels));
  kv.set("attention", "heads", std::to_string(cfg.attention.num_heads));
  kv.set("attention", "key_dim", std::to_string(cfg.attention.key_dim));
  kv.set("attention", "mode", to_string(cfg.attention.mode));
  kv.set("attention", "concat_axis", to_string(cfg.attention.concat_axis));
  kv.set("head", "hidden", std::to_string(cfg.head.hidden_width));
  kv.set("head", "dropout", format_double(cfg.head.dropout_rate));
  kv.set("head", "classes", std::to_string(cfg.head.num_classes));
}

ModelConfig read_model_config(const KeyValueConfig& kv, const ModelConfig& defaults) {
  ModelConfig cfg = defaults;
  cfg.input_size = kv.get_size("model", "input_size", cfg.input_size);
  if (auto v = kv.get("model", "pool")) cfg.pool = parse_pool_kind(*v);
  if (auto v = kv.get("backbone", "stages")) cfg.backbone.stages = parse_stages(*v);
  cfg.backbone.in_channels = kv.get_size("backbone", "in_channels", cfg.backbone.in_channels);
  cfg.attention.num_heads = kv.get_size("attention", "heads", cfg.attention.num_heads);
  cfg.attention.key_dim = kv.get_size("attention", "key_dim", cfg.attention.key_dim);
  if (auto v = kv.get("attention", "mode")) cfg.attention.mode = parse_pool_mode(*v);
  if (auto v = kv.get("attention", "concat_axis")) cfg.attention.concat_axis = parse_concat_axis(*v);
  cfg.head.hidden_width = kv.get_size("head", "hidden", cfg.head.hidden_width);
  cfg.head.dropout_rate = kv.get_double("head", "dropout", cfg.head.dropout_rate);
  cfg.head.num_classes = kv.get_size("head", "classes", cfg.head.num_classes);
  return cfg;
}

void write_train_config(KeyValueConfig& kv, const TrainConfig& cfg) {
  kv.set("train", "strategy", to_string(cfg.strategy));
  kv.set("train", "learning_rate", format_double(cfg.learning_rate));
  kv.set("train", "batch_size", std::to_string(cfg.batch_size));
  kv.set("train", "epochs", std::to_string(cfg.epochs));
  kv.set("train", "seed", std::to_string(cfg.seed));
  kv.set("train", "optimizer", cfg.optimizer.kind == OptimizerKind::adam ? "adam" : "sgd");
  kv.set("train", "beta1", format_double(cfg.optimizer.beta1));
  kv.set("train", "beta2", format_double(cfg.optimizer.beta2));
  kv.set("train", "adam_epsilon", format_double(cfg.optimizer.epsilon));
  kv.set("train", "validation_fraction", format_double(cfg.validation_fraction));
  kv.set("train", "patience", std::to_string(cfg.patience));
  if (cfg.stop_at_train_accuracy) kv.set("train", "stop_at_train_accuracy", format_double(*cfg.stop_at_train_accuracy));
  if (cfg.stop_at_val_accuracy) kv.set("train", "stop_at_val_accuracy", format_double(*cfg.stop_at_val_accuracy));
  kv.set("augment", "enabled", cfg.augment ? "true" : "false");
  kv.set("augment", "crop", std::to_string(cfg.crop_reduction));
  kv.set("augment", "erase", std::to_string(cfg.erase_size));
  kv.set("augment", "erase_fill", format_double(cfg.erase_fill));
  kv.set("mixup", "uniform_low", format_double(cfg.mixup.uniform_low));
  kv.set("mixup", "uniform_high", format_double(cfg.mixup.uniform_high));
  kv.set("mixup", "beta_alpha", format_double(cfg.mixup.beta_alpha));
  kv.set("mixup", "beta_beta", format_double(cfg.mixup.beta_beta));
  kv.set("mixup", "pairing_seed", std::to_string(cfg.mixup.pairing_seed));
  kv.set("loss", "lambda", format_double(cfg.loss.lambda));
  kv.set("loss", "epsilon", format_double(cfg.loss.epsilon));
  kv.set("init", "variance", format_double(cfg.init.variance));
  kv.set("init", "zero_bias", cfg.init.zero_bias ? "true" : "false");
}

TrainConfig read_train_config(const KeyValueConfig& kv, const TrainConfig& defaults) {
  TrainConfig cfg = defaults;
  if (auto v = kv.get("train", "strategy")) cfg.strategy = parse_strategy(*v);
  if (auto v = kv.get("train", "learning_rate"))
    cfg.learning_rate = kv.get_double("train", "learning_rate", cfg.learning_rate);
  else if (cfg.strategy != defaults.strategy)
    cfg.learning_rate = TrainConfig::default_learning_rate(cfg.strategy);
  cfg.batch_size = kv.get_size("train", "batch_size", cfg.batch_size);
  cfg.epochs = kv.get_size("train", "epochs", cfg.epochs);
  cfg.seed = kv.get_u64("train", "seed", cfg.seed);
  if (auto v = kv.get("train", "optimizer")) {
    if (*v == "adam")
      cfg.optimizer.kind = OptimizerKind::adam;
    else if (*v == "sgd")
      cfg.optimizer.kind = OptimizerKind::sgd;
    else
      throw ConfigError("unknown optimizer '" + *v + "' (adam|sgd)");
  }
  cfg.optimizer.beta1 = kv.get_double("train", "beta1", cfg.optimizer.beta1);
  cfg.optimizer.beta2 = kv.get_double("train", "beta2", cfg.optimizer.beta2);
  cfg.optimizer.epsilon = kv.get_double("train", "adam_epsilon", cfg.optimizer.epsilon);
  cfg.validation_fraction = kv.get_double("train", "validation_fraction", cfg.validation_fraction);
  cfg.patience = kv.get_size("train", "patience", cfg.patience);
  if (kv.get("train", "stop_at_train_accuracy"))
    cfg.stop_at_train_accuracy = kv.get_double("train", "stop_at_train_accuracy", 0.0);
  if (kv.get("train", "stop_at_val_accuracy"))
    cfg.stop_at_val_accuracy = kv.get_double("train", "stop_at_val_accuracy", 0.0);
  cfg.augment = kv.get_bool("augment", "enabled", cfg.augment);
  cfg.crop_reduction = kv.get_size("augment", "crop", cfg.crop_reduction);
  cfg.erase_size = kv.get_size("augment", "erase", cfg.erase_size);
  cfg.erase_fill = kv.get_double("augment", "erase_fill", cfg.erase_fill);
  cfg.mixup.uniform_low = kv.get_double("mixup", "uniform_low", cfg.mixup.uniform_low);
  cfg.mixup.uniform_high = kv.get_double("mixup", "uniform_high", cfg.mixup.uniform_high);
  cfg.mixup.beta_alpha = kv.get_double("mixup", "beta_alpha", cfg.mixup.beta_alpha);
  cfg.mixup.beta_beta = kv.get_double("mixup", "beta_beta", cfg.mixup.beta_beta);
  cfg.mixup.pairing_seed = kv.get_u64("mixup", "pairing_seed", cfg.mixup.pairing_seed);
  cfg.loss.lambda = kv.get_double("loss", "lambda", cfg.loss.lambda);
  cfg.loss.epsilon = kv.get_double("loss", "epsilon", cfg.loss.epsilon);
  cfg.init.variance = kv.get_double("init", "variance", cfg.init.variance);
  cfg.init.zero_bias = kv.get_bool("init", "zero_bias", cfg.init.zero_bias);
  return cfg;
}

}  // namespace rsisc
