// Acceptance suite: one check per criterion, one PASS/FAIL line each.
//
//   rsisc_acceptance            run every criterion
//   rsisc_acceptance 3 7        run only criteria 3 and 7

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "rsisc/augment.hpp"
#include "rsisc/checkpoint.hpp"
#include "rsisc/config.hpp"
#include "rsisc/dataset.hpp"
#include "rsisc/fusion.hpp"
#include "rsisc/gradcheck.hpp"
#include "rsisc/synthetic.hpp"
#include "rsisc/trainer.hpp"

namespace fs = std::filesystem;
using namespace rsisc;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag)
      : path_(fs::temp_directory_path() / ("rsisc_acceptance_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// The desk-scale setup the CLI would derive from configs/desk.conf.
struct DeskSetup {
  ModelConfig model;
  TrainConfig train;
};

DeskSetup desk_setup(const Dataset& raw, std::uint64_t seed) {
  const KeyValueConfig kv = KeyValueConfig::load(fs::path(RSISC_SOURCE_DIR) / "configs" / "desk.conf");
  DeskSetup s;
  s.train = read_train_config(kv);
  s.train.seed = seed;
  s.model = read_model_config(kv);
  s.model.head.num_classes = raw.num_classes();
  s.model.input_size = raw.images.front().width - s.train.crop_reduction;
  return s;
}

Dataset texture(TextureTask task, std::size_t per_class, std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.task = task;
  cfg.per_class = per_class;
  cfg.seed = seed;
  return make_texture_dataset(cfg);
}

Tensor random_distributions(std::size_t rows, std::size_t classes, std::mt19937_64& rng) {
  std::exponential_distribution<double> draw(1.0);
  Tensor t({rows, classes});
  for (std::size_t r = 0; r < rows; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) total += t.at({r, c}) = draw(rng);
    for (std::size_t c = 0; c < classes; ++c) t.at({r, c}) /= total;
  }
  return t;
}

Outcome gradient_correctness() {
  const auto start = std::chrono::steady_clock::now();
  ModelConfig cfg;
  cfg.head.dropout_rate = 0.0;
  cfg.attention.mode = PoolMode::average;
  Rng rng(20240601);
  ModelParams params = init_params(cfg, Strategy::direct, nullptr, rng, InitOptions{0.01, false});

  const std::size_t batch = 2, s = cfg.input_size;
  Tensor images({batch, s, s, 3});
  for (double& v : images.data()) v = uniform01(rng);
  Tensor targets({batch, cfg.head.num_classes});
  for (std::size_t r = 0; r < batch; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < cfg.head.num_classes; ++c) total += targets.at({r, c}) = 0.1 + uniform01(rng);
    for (std::size_t c = 0; c < cfg.head.num_classes; ++c) targets.at({r, c}) /= total;
  }
  const GradCheckReport report = check_model_gradients(cfg, params, images, targets, LossConfig{}, 100, rng, 1e-5);
  const double elapsed = seconds_since(start);
  double unfloored = 0.0;
  for (const GradProbe& p : report.probes)
    if (p.analytic != 0.0 || p.numeric != 0.0) unfloored = std::max(unfloored, relative_error(p.analytic, p.numeric, 0.0));
  return {report.probes.size() == 100 && report.max_relative_error < 1e-4 && elapsed < 60.0,
          format("%zu probes over %zu parameters, max relative error %.3e (< 1e-4; %.3e without the 1e-6 floor), "
                 "%.1f s (< 60 s)",
                 report.probes.size(), params.scalar_count(), report.max_relative_error, unfloored, elapsed)};
}

Outcome augmentation_contracts() {
  bool ok = true;
  std::string notes;
  Dataset d = texture(TextureTask::a, 9, 3);
  d.images.push_back(d.images.front());
  d.labels.push_back(2);
  d.ids.push_back("extra");
  const Dataset e = expand_rotations(d);
  for (std::size_t c = 0; c < d.num_classes(); ++c) ok &= e.class_counts()[c] == 4 * d.class_counts()[c];
  notes += ok ? "class counts x4; " : "class counts wrong; ";

  Rng rng(5);
  std::size_t identical = 0;
  for (int i = 0; i < 1000; ++i) {
    Image img(1 + uniform_index(rng, 12), 1 + uniform_index(rng, 12));
    for (double& v : img.pixels) v = uniform01(rng);
    if (rotate(rotate(rotate(rotate(img, 90), 90), 90), 90) == img) ++identical;
  }
  ok &= identical == 1000;
  notes += format("rot90^4 identity on %zu/1000; ", identical);

  LabeledBatch batch = make_batch(d, [] {
    std::vector<std::size_t> idx(32);
    for (std::size_t i = 0; i < 32; ++i) idx[i] = i;
    return idx;
  }());
  const LabeledBatch mixed = mixup_expand(batch, MixupConfig{}, rng);
  double worst = 0.0;
  for (std::size_t r = 0; r < mixed.labels.extent(0); ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < mixed.labels.extent(1); ++c) total += mixed.labels.at({r, c});
    worst = std::max(worst, std::abs(total - 1.0));
  }
  ok &= batch.size() == 32 && mixed.size() == 96 && mixed.labels.extent(0) == 96 && worst <= 1e-12;
  notes += format("mixup %zu -> %zu, worst label-sum error %.1e", batch.size(), mixed.size(), worst);
  return {ok, notes};
}

Outcome attention_structure() {
  std::mt19937_64 shapes(7);
  std::uniform_int_distribution<std::size_t> dim(1, 6);
  std::size_t width_ok = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t b = dim(shapes), w = dim(shapes), h = dim(shapes), c = dim(shapes);
    AttentionConfig cfg{1 + uniform_index(shapes, 3), 1 + uniform_index(shapes, 5),
                        trial % 2 ? PoolMode::max : PoolMode::average, ConcatAxis::channel};
    ModelParams params;
    Rng rng(trial);
    init_attention_pool(params, "pool", c, cfg, rng);
    Tensor x({b, w, h, c});
    for (double& v : x.data()) v = uniform01(rng);
    Tape tape;
    if (attention_pool(tape, tape.constant(x), params, "pool", cfg).shape() == Shape{b, 2 * c}) ++width_ok;
  }

  std::size_t isolated = 0;
  const std::size_t c = 8;
  for (const char* stream : {"width", "height"}) {
    AttentionConfig cfg = AttentionConfig::desk();
    ModelParams params;
    Rng rng(11);
    init_attention_pool(params, "pool", c, cfg, rng);
    Tensor x({3, 4, 5, c});
    for (double& v : x.data()) v = uniform01(rng);
    auto run = [&] {
      Tape tape;
      return attention_pool(tape, tape.constant(x), params, "pool", cfg).value();
    };
    const Tensor before = run();
    const std::string prefix = std::string("pool.") + stream + ".";
    for (auto& [name, p] : params)
      if (name.starts_with(prefix)) p.value.fill(0.0);
    const Tensor after = run();
    const std::size_t own = std::string(stream) == "width" ? 0 : c;
    bool other_same = true, own_changed = false;
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t k = 0; k < 2 * c; ++k) {
        const bool mine = k >= own && k < own + c;
        if (mine)
          own_changed |= after.at({b, k}) != before.at({b, k});
        else
          other_same &= after.at({b, k}) == before.at({b, k});
      }
    if (other_same && own_changed) ++isolated;
  }
  return {width_ok == 50 && isolated == 2,
          format("width 2C on %zu/50 shapes; stream isolation holds for %zu/2 streams", width_ok, isolated)};
}

Outcome fusion_oracle() {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<std::size_t> models(1, 4), classes(2, 45);
  std::size_t agree = 0, self_same = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = models(rng), c = classes(rng);
    FusionInput in;
    for (std::size_t m = 0; m < n; ++m) {
      in.model_ids.push_back(std::to_string(m));
      in.probabilities.push_back(random_distributions(1, c, rng));
    }
    std::size_t best = 0;
    double best_score = -1.0;
    for (std::size_t k = 0; k < c; ++k) {
      double score = 1.0 / static_cast<double>(n);
      for (const Tensor& p : in.probabilities) score *= std::max(p[k], kFusionFloor);
      if (score > best_score) {
        best_score = score;
        best = k;
      }
    }
    if (predict_label(prod_fuse(in))[0] == best) ++agree;

    const Tensor& single = in.probabilities.front();
    FusionInput twice{{"a", "a"}, {single, single}};
    if (predict_label(prod_fuse(twice)) == predict_label(single)) ++self_same;
  }
  return {agree == 1000 && self_same == 1000,
          format("argmax agrees with direct product on %zu/1000; self-fusion keeps argmax on %zu/1000", agree,
                 self_same)};
}

Outcome loss_sanity() {
  ModelParams none;
  const LossConfig no_l2{0.0, 1e-12};
  Tensor y({1, 2}, std::vector<double>{1.0, 0.0});
  std::mt19937_64 rng(17);
  const Tensor soft = random_distributions(8, 45, rng);
  const double self_one_hot = kl_loss_value(y, y, none, no_l2);
  const double self_soft = kl_loss_value(soft, soft, none, no_l2);
  const double half = kl_loss_value(Tensor({1, 2}, std::vector<double>{0.5, 0.5}), y, none, no_l2);
  const double err = std::abs(half - std::log(2.0));
  return {std::abs(self_one_hot) <= 1e-12 && std::abs(self_soft) <= 1e-12 && err <= 1e-9,
          format("KL(y,y) = %.1e and %.1e; KL((1,0),(0.5,0.5)) - ln 2 = %.1e", self_one_hot, self_soft, err)};
}

Outcome desk_training() {
  const auto start = std::chrono::steady_clock::now();
  const Dataset raw = texture(TextureTask::a, 20, 11);
  DeskSetup s = desk_setup(raw, 1);
  s.train.stop_at_train_accuracy = 95.0;
  const TrainResult r = train(expand_rotations(raw), s.model, s.train);
  const EpochRecord& last = r.history.epochs.back();
  const double elapsed = seconds_since(start);
  return {last.train_accuracy >= 95.0 && last.epoch <= 200 && elapsed < 600.0,
          format("%zu images, train accuracy %.2f%% at epoch %zu (val %.2f%%), %.0f s", 4 * raw.size(),
                 last.train_accuracy, last.epoch, last.val_accuracy, elapsed)};
}

Outcome transfer_trend() {
  const Dataset task_a = expand_rotations(texture(TextureTask::a, 20, 11));
  const Dataset task_b = expand_rotations(texture(TextureTask::b, 20, 12));
  std::size_t wins = 0;
  std::string notes;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    DeskSetup pre = desk_setup(task_a, seed);
    pre.train.stop_at_train_accuracy = 95.0;
    const TrainResult source = train(task_a, pre.model, pre.train);

    DeskSetup tl = desk_setup(task_b, seed);
    tl.train.strategy = Strategy::transfer;
    tl.train.learning_rate = pre.train.learning_rate / 10.0;
    tl.train.stop_at_val_accuracy = 90.0;
    const auto tl_epochs = train(task_b, tl.model, tl.train, &source.checkpoint).history.epochs_to_val_accuracy(90.0);

    std::optional<std::size_t> dt_epochs;
    if (tl_epochs) {
      // Direct only has to be followed up to the transfer epoch count.
      DeskSetup dt = desk_setup(task_b, seed);
      dt.train.stop_at_val_accuracy = 90.0;
      dt.train.epochs = *tl_epochs;
      dt_epochs = train(task_b, dt.model, dt.train).history.epochs_to_val_accuracy(90.0);
    }
    const bool win = tl_epochs && !dt_epochs;
    wins += win;
    const std::string tl_text = tl_epochs ? std::to_string(*tl_epochs) : ">" + std::to_string(tl.train.epochs);
    const std::string dt_text =
        dt_epochs ? std::to_string(*dt_epochs) : (tl_epochs ? ">" + std::to_string(*tl_epochs) : "not run");
    std::printf("  seed %llu: pretrain %zu epochs, transfer %s, direct %s -> %s\n",
                static_cast<unsigned long long>(seed), source.history.epochs.size(), tl_text.c_str(),
                dt_text.c_str(), win ? "transfer faster" : "no");
    std::fflush(stdout);
    notes += format("%s%llu:%s/%s", seed == 1 ? "" : ", ", static_cast<unsigned long long>(seed), tl_text.c_str(),
                    dt_text.c_str());
  }
  return {wins >= 4, format("transfer strictly faster to 90%% val in %zu/5 seeds (seed:TL/DT epochs %s)", wins,
                            notes.c_str())};
}

Outcome ensemble_report() {
  const Dataset raw = texture(TextureTask::a, 20, 31);
  const Split parts = split(raw, 0.8, 31);
  const Dataset train_set = expand_rotations(parts.train), test_set = expand_rotations(parts.test);

  struct Member {
    std::string pooling, network;
    Tensor probs;
    double accuracy = 0.0;
  };
  const std::vector<std::pair<std::string, std::string>> networks{{"compact", "16x3s1,32x3s2,32x3s1"},
                                                                 {"wide", "16x5s1,32x3s2,32x2s1"}};
  std::vector<Member> members;
  for (const auto& [net, stages] : networks)
    for (PoolMode mode : {PoolMode::average, PoolMode::max}) {
      DeskSetup s = desk_setup(train_set, 41);
      s.model.backbone.stages = parse_stages(stages);
      s.model.attention.mode = mode;
      s.train.epochs = 40;
      s.train.stop_at_train_accuracy = 95.0;
      TrainResult r = train(train_set, s.model, s.train);
      Member m{mode == PoolMode::average ? "Avg" : "Max", net,
               predict_dataset(test_set, r.checkpoint.params, s.model, s.train.crop_reduction)};
      m.accuracy = accuracy(predict_label(m.probs), test_set.labels);
      members.push_back(std::move(m));
    }

  auto fused_accuracy = [&](const std::vector<const Tensor*>& probs) {
    FusionInput in;
    for (const Tensor* p : probs) {
      in.model_ids.push_back(std::to_string(in.model_ids.size()));
      in.probabilities.push_back(*p);
    }
    return accuracy(predict_label(prod_fuse_log(in)), test_set.labels);
  };

  std::vector<FusionReportRow> rows;
  for (const Member& m : members) rows.push_back({m.pooling, m.network, m.accuracy});
  for (std::size_t n = 0; n < 2; ++n)
    rows.push_back({"Avg+Max", networks[n].first,
                    fused_accuracy({&members[2 * n].probs, &members[2 * n + 1].probs})});
  for (std::size_t mode = 0; mode < 2; ++mode)
    rows.push_back({members[mode].pooling, "compact+wide", fused_accuracy({&members[mode].probs, &members[2 + mode].probs})});
  rows.push_back({"Avg+Max", "compact+wide",
                  fused_accuracy({&members[0].probs, &members[1].probs, &members[2].probs, &members[3].probs})});

  std::ostringstream table;
  write_fusion_report(table, rows);
  std::printf("%s", table.str().c_str());
  std::fflush(stdout);
  const bool shaped = table.str().find("| Pooling layers |") == 0 && table.str().find("| Networks |") != std::string::npos &&
                      table.str().find("| Acc.(%) |") != std::string::npos;

  std::size_t exact = 0;
  for (const Member& m : members) {
    const double twice = fused_accuracy({&m.probs, &m.probs});
    const double four = fused_accuracy({&m.probs, &m.probs, &m.probs, &m.probs});
    const double direct = accuracy(predict_label(prod_fuse({{"a", "a"}, {m.probs, m.probs}})), test_set.labels);
    if (twice == m.accuracy && four == m.accuracy && direct == m.accuracy) ++exact;
  }
  return {shaped && exact == members.size() && rows.size() == 9,
          format("%zu-column report; identical-model ensembles match the single model exactly for %zu/4 members; "
                 "4-way ensemble %.1f%%",
                 rows.size(), exact, rows.back().accuracy)};
}

Outcome determinism() {
  const Dataset raw = texture(TextureTask::a, 8, 51);
  DeskSetup s = desk_setup(raw, 9);
  s.train.epochs = 2;
  const Dataset data = expand_rotations(raw);
  const TrainResult a = train(data, s.model, s.train), b = train(data, s.model, s.train);
  std::ostringstream ha, hb;
  a.history.write(ha);
  b.history.write(hb);
  bool ok = serialize_checkpoint(a.checkpoint) == serialize_checkpoint(b.checkpoint) && ha.str() == hb.str();
  std::string notes = ok ? "library runs byte-identical" : "library runs differ";

#ifdef RSISC_CLI_PATH
  ScratchDir dir("determinism");
  write_dataset_tree(raw, dir.path() / "data");
  const std::string config = (fs::path(RSISC_SOURCE_DIR) / "configs" / "desk.conf").string();
  for (const char* run : {"run1", "run2"}) {
    const std::string cmd = std::string("\"") + RSISC_CLI_PATH + "\" train --data \"" + (dir.path() / "data").string() +
                            "\" --config \"" + config + "\" --seed 9 --epochs 2 --out \"" +
                            (dir.path() / run).string() + "\" >/dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) return {false, notes + "; CLI train failed"};
  }
  bool same = true;
  for (const char* file : {"checkpoint.rsisc", "history.tsv"})
    same &= read_file_bytes(dir.path() / "run1" / file) == read_file_bytes(dir.path() / "run2" / file);
  ok &= same;
  notes += same ? "; CLI checkpoint.rsisc and history.tsv byte-identical" : "; CLI outputs differ";
#endif
  return {ok, notes};
}

Outcome split_protocol() {
  ScratchDir dir("split");
  Dataset tree;
  for (std::size_t c = 0; c < 45; ++c) {
    tree.class_names.push_back(format("class%02zu", c));
    for (std::size_t i = 0; i < 700; ++i) {
      Image img(1, 1);
      img.pixels = {static_cast<double>(c) / 44.0, static_cast<double>(i % 256) / 255.0, 0.0};
      tree.images.push_back(std::move(img));
      tree.labels.push_back(c);
      tree.ids.push_back(format("class%02zu/%04zu.ppm", c, i));
    }
  }
  write_dataset_tree(tree, dir.path());
  const Dataset loaded = load_dataset(dir.path());
  bool ok = loaded.size() == 45 * 700 && loaded.num_classes() == 45;
  std::string notes = format("%zu images in %zu classes", loaded.size(), loaded.num_classes());
  for (const auto& [fraction, train_n, test_n] :
       {std::tuple{0.2, std::size_t{140}, std::size_t{560}}, std::tuple{0.1, std::size_t{70}, std::size_t{630}}}) {
    const Split s = split(loaded, fraction, 77);
    const auto tr = s.train.class_counts(), te = s.test.class_counts();
    const bool exact = std::all_of(tr.begin(), tr.end(), [&](std::size_t n) { return n == train_n; }) &&
                       std::all_of(te.begin(), te.end(), [&](std::size_t n) { return n == test_n; }) &&
                       tr.size() == 45 && te.size() == 45;
    ok &= exact;
    notes += format("; %.1f -> %zu/%zu per class %s", fraction, train_n, test_n, exact ? "exact" : "WRONG");
  }
  return {ok, notes};
}

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {1, "gradient correctness", gradient_correctness},
      {2, "augmentation contracts", augmentation_contracts},
      {3, "attention-pool shape and structure", attention_structure},
      {4, "fusion oracle", fusion_oracle},
      {5, "loss sanity", loss_sanity},
      {6, "desk-scale training", desk_training},
      {7, "transfer-learning trend", transfer_trend},
      {8, "ensemble report", ensemble_report},
      {9, "determinism", determinism},
      {10, "split protocol", split_protocol},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
  int failures = 0;
  for (const Criterion& c : criteria()) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s  [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
