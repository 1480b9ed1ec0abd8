// causalwalk: generation, training, evaluation, ablations, and SCM checks
// from one binary. Every failure is a single `error: ...` line on stderr
// with a non-zero exit, so scripted runs can grep for it.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "causalwalk/scm.hpp"
#include "causalwalk/train.hpp"

namespace fs = std::filesystem;
using namespace causalwalk;

namespace {

constexpr double kFrontdoorTol = 1e-12;

[[noreturn]] void fail(const std::string& msg) {
  std::string one_line = msg;
  for (char& c : one_line)
    if (c == '\n') c = ' ';
  std::cerr << "error: " << one_line << "\n";
  std::exit(1);
}

std::string fmt(double v) {
  std::ostringstream oss;
  oss << std::setprecision(17) << v;
  return oss.str();
}

EvalMode parse_mode(const std::string& s) {
  if (s == "causal") return EvalMode::kCausal;
  if (s == "walk-only") return EvalMode::kWalkOnly;
  fail("unknown mode '" + s + "' (expected causal or walk-only)");
}

std::string mode_name(EvalMode m) {
  return m == EvalMode::kCausal ? "causal" : "walk-only";
}

// Every command echoes its effective settings next to its artifacts.
void echo_config(const fs::path& path,
                 const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ofstream out(path);
  if (!out) fail("cannot write " + path.string());
  for (const auto& [k, v] : kv) out << k << "=" << v << "\n";
}

std::vector<GeneratedExample> load_split(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open " + path.string());
  return load_jsonl(in);
}

void save_split(const fs::path& path,
                const std::vector<GeneratedExample>& examples) {
  std::ofstream out(path);
  if (!out) fail("cannot write " + path.string());
  save_jsonl(out, examples);
}

void write_train_log(const fs::path& path,
                     const std::vector<EpochStats>& history) {
  std::ofstream out(path);
  if (!out) fail("cannot write " + path.string());
  out << "epoch,loss_walk,loss_causal,loss_total,dev_accuracy\n";
  for (const auto& e : history) {
    out << e.epoch << "," << fmt(e.loss_walk) << "," << fmt(e.loss_causal)
        << "," << fmt(e.loss_total) << "," << fmt(e.dev_accuracy) << "\n";
  }
}

// Wide row per invocation: split, mode, accuracy, then precision/recall per
// class in label order. Header names come from label_name so the schema is
// stable for a given class count.
void write_metrics(const fs::path& path, const std::string& split,
                   EvalMode mode, const EvalMetrics& m) {
  std::ofstream out(path);
  if (!out) fail("cannot write " + path.string());
  out << "split,mode,accuracy";
  for (std::size_t c = 0; c < m.precision.size(); ++c)
    out << ",precision_" << label_name(static_cast<int>(c)) << ",recall_"
        << label_name(static_cast<int>(c));
  out << "\n" << split << "," << mode_name(mode) << "," << fmt(m.accuracy);
  for (std::size_t c = 0; c < m.precision.size(); ++c)
    out << "," << fmt(m.precision[c]) << "," << fmt(m.recall[c]);
  out << "\n";
}

struct HyperFlags {
  std::size_t feature_dim = 256;
  std::size_t hidden_dim = 64;
  std::size_t layers = 2;
  std::size_t beam_width = 3;
  std::size_t max_path_len = 5;
  std::size_t dict_k = 5;
  double alpha = 0.1;
  double lr = 3e-3;
  std::size_t epochs = 10;
  std::size_t batch = 4;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--feature-dim", feature_dim, "hashed feature width F");
    cmd.add_option("--hidden-dim", hidden_dim, "node representation width d");
    cmd.add_option("--layers", layers, "graph convolution layers");
    cmd.add_option("--beam-width", beam_width, "beam width w");
    cmd.add_option("--max-path-len", max_path_len, "walk steps m");
    cmd.add_option("--dict-k", dict_k, "confounder samples per class k");
    cmd.add_option("--alpha", alpha, "intervention weight");
    cmd.add_option("--lr", lr, "Adam learning rate");
    cmd.add_option("--epochs", epochs, "training epochs");
    cmd.add_option("--batch", batch, "mini-batch size");
  }

  TrainConfig to_train_config(int classes) const {
    TrainConfig cfg;
    cfg.model.featurizer.dim = feature_dim;
    cfg.model.gconv.hidden_dim = hidden_dim;
    cfg.model.gconv.layers = layers;
    cfg.model.n_classes = static_cast<std::size_t>(classes);
    cfg.model.beam_width = beam_width;
    cfg.model.max_path_len = max_path_len;
    cfg.model.dict_k = dict_k;
    cfg.model.alpha = alpha;
    cfg.adam.lr = lr;
    cfg.epochs = epochs;
    cfg.batch_size = batch;
    return cfg;
  }

  std::vector<std::pair<std::string, std::string>> echo() const {
    return {{"feature_dim", std::to_string(feature_dim)},
            {"hidden_dim", std::to_string(hidden_dim)},
            {"layers", std::to_string(layers)},
            {"beam_width", std::to_string(beam_width)},
            {"max_path_len", std::to_string(max_path_len)},
            {"dict_k", std::to_string(dict_k)},
            {"alpha", fmt(alpha)},
            {"lr", fmt(lr)},
            {"epochs", std::to_string(epochs)},
            {"batch", std::to_string(batch)}};
  }
};

int max_label(const std::vector<GeneratedExample>& examples) {
  int m = 0;
  for (const auto& ex : examples) m = std::max(m, ex.label);
  return m;
}

// ---------------------------------------------------------------- gen-data

int cmd_gen_data(const std::string& data_dir, GeneratorConfig gcfg) {
  gcfg.validate();
  auto splits = generate(gcfg);
  fs::create_directories(data_dir);
  const fs::path dir(data_dir);
  save_split(dir / "train.jsonl", splits.train);
  save_split(dir / "dev.jsonl", splits.dev);
  save_split(dir / "test_id.jsonl", splits.test_id);
  save_split(dir / "test_adversarial.jsonl", splits.test_adversarial);
  save_split(dir / "test_symmetric.jsonl", splits.test_symmetric);
  echo_config(dir / "gen_config.txt",
              {{"n_train", std::to_string(gcfg.n_train)},
               {"n_dev", std::to_string(gcfg.n_dev)},
               {"n_test", std::to_string(gcfg.n_test)},
               {"chain_length", std::to_string(gcfg.chain_length)},
               {"n_distractors", std::to_string(gcfg.n_distractors)},
               {"classes", std::to_string(gcfg.classes)},
               {"bias_strength", fmt(gcfg.bias_strength)},
               {"seed", std::to_string(gcfg.seed)}});
  std::cout << "wrote " << splits.train.size() << " train / "
            << splits.dev.size() << " dev / " << splits.test_id.size()
            << " test examples per test split to " << data_dir << "\n";
  return 0;
}

// ------------------------------------------------------------------- train

int cmd_train(const std::string& data_dir, const std::string& out_dir,
              std::string checkpoint_path, const HyperFlags& hyper,
              const std::string& mode_str, bool evidence_supervision,
              std::uint64_t seed) {
  const fs::path dir(data_dir);
  auto train_set = load_split(dir / "train.jsonl");
  if (train_set.empty()) fail("empty dataset: " + (dir / "train.jsonl").string());
  std::vector<GeneratedExample> dev_set;
  if (fs::exists(dir / "dev.jsonl")) dev_set = load_split(dir / "dev.jsonl");

  const int classes = std::max(max_label(train_set), max_label(dev_set)) + 1;
  TrainConfig cfg = hyper.to_train_config(std::max(classes, 2));
  cfg.mode = parse_mode(mode_str);
  cfg.evidence_supervision = evidence_supervision;
  cfg.seed = seed;

  auto result = train(train_set, dev_set, cfg);

  fs::create_directories(out_dir);
  const fs::path out(out_dir);
  if (checkpoint_path.empty()) checkpoint_path = (out / "checkpoint.txt").string();
  std::ofstream ck(checkpoint_path);
  if (!ck) fail("cannot write " + checkpoint_path);
  save_checkpoint(ck, cfg.model, result.params, result.dict);
  write_train_log(out / "train_log.csv", result.history);

  auto echo = hyper.echo();
  echo.emplace_back("mode", mode_str);
  echo.emplace_back("evidence_supervision", evidence_supervision ? "1" : "0");
  echo.emplace_back("seed", std::to_string(seed));
  echo.emplace_back("data_dir", data_dir);
  echo.emplace_back("checkpoint", checkpoint_path);
  echo_config(out / "train_config.txt", echo);

  const auto& last = result.history.back();
  std::cout << "trained " << cfg.epochs << " epochs; final L_total="
            << fmt(last.loss_total) << " dev_accuracy=" << fmt(last.dev_accuracy)
            << "; checkpoint " << checkpoint_path << "\n";
  return 0;
}

// -------------------------------------------------------------------- eval

int cmd_eval(const std::string& data_dir, const std::string& checkpoint_path,
             const std::string& out_dir, const std::string& split,
             const std::string& mode_str) {
  std::ifstream ck(checkpoint_path);
  if (!ck) fail("cannot open " + checkpoint_path);
  Checkpoint checkpoint = load_checkpoint(ck);

  auto dataset = load_split(fs::path(data_dir) / (split + ".jsonl"));
  if (dataset.empty()) fail("empty dataset: " + split);
  const EvalMode mode = parse_mode(mode_str);
  auto metrics =
      evaluate(dataset, checkpoint.params, checkpoint.dict, checkpoint.config, mode);

  fs::create_directories(out_dir);
  const fs::path out(out_dir);
  write_metrics(out / "metrics.csv", split, mode, metrics);
  echo_config(out / "eval_config.txt", {{"data_dir", data_dir},
                                        {"checkpoint", checkpoint_path},
                                        {"split", split},
                                        {"mode", mode_str}});
  std::cout << split << " " << mode_str << " accuracy=" << fmt(metrics.accuracy)
            << " n=" << metrics.n << "\n";
  return 0;
}

// ------------------------------------------------------------------ ablate

struct ArmSpec {
  std::string name;
  EvalMode train_mode;
  bool evidence_supervision;
  EvalMode eval_mode;
};

int cmd_ablate(const std::string& data_dir, const std::string& out_dir,
               const HyperFlags& hyper, std::size_t n_seeds) {
  const fs::path dir(data_dir);
  auto train_set = load_split(dir / "train.jsonl");
  if (train_set.empty()) fail("empty dataset: " + (dir / "train.jsonl").string());
  auto test_id = load_split(dir / "test_id.jsonl");
  auto test_adv = load_split(dir / "test_adversarial.jsonl");
  if (test_id.empty() || test_adv.empty()) fail("empty dataset: test split");

  const int classes =
      std::max(max_label(train_set), std::max(max_label(test_id), max_label(test_adv))) + 1;

  // Two ablations against the full model: drop the intervention head, or add
  // gold-evidence supervision on the transitions.
  const std::vector<ArmSpec> arms = {
      {"causal", EvalMode::kCausal, false, EvalMode::kCausal},
      {"walk-only", EvalMode::kWalkOnly, false, EvalMode::kWalkOnly},
      {"evidence-supervised", EvalMode::kCausal, true, EvalMode::kCausal},
  };

  fs::create_directories(out_dir);
  const fs::path out(out_dir);
  std::ofstream rows(out / "ablate.csv");
  if (!rows) fail("cannot write " + (out / "ablate.csv").string());
  rows << "arm,seed,accuracy_id,accuracy_adversarial,entropy_id\n";

  struct ArmStats {
    std::vector<double> acc_id, acc_adv, entropy;
  };
  std::vector<ArmStats> stats(arms.size());

  for (std::size_t a = 0; a < arms.size(); ++a) {
    for (std::size_t seed = 0; seed < n_seeds; ++seed) {
      TrainConfig cfg = hyper.to_train_config(std::max(classes, 2));
      cfg.mode = arms[a].train_mode;
      cfg.evidence_supervision = arms[a].evidence_supervision;
      cfg.seed = seed;
      auto r = train(train_set, {}, cfg);
      const double acc_id =
          evaluate(test_id, r.params, r.dict, cfg.model, arms[a].eval_mode).accuracy;
      const double acc_adv =
          evaluate(test_adv, r.params, r.dict, cfg.model, arms[a].eval_mode).accuracy;
      const double h = mean_transition_entropy(test_id, r.params, cfg.model);
      stats[a].acc_id.push_back(acc_id);
      stats[a].acc_adv.push_back(acc_adv);
      stats[a].entropy.push_back(h);
      rows << arms[a].name << "," << seed << "," << fmt(acc_id) << ","
           << fmt(acc_adv) << "," << fmt(h) << "\n";
    }
  }

  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  auto stdev = [&](const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
  };

  std::ofstream summary(out / "ablate_summary.csv");
  if (!summary) fail("cannot write " + (out / "ablate_summary.csv").string());
  summary << "arm,accuracy_id_mean,accuracy_id_stdev,accuracy_adversarial_mean,"
             "accuracy_adversarial_stdev,entropy_id_mean,entropy_id_stdev\n";
  std::printf("%-20s %18s %18s %16s\n", "arm", "test_id", "test_adversarial",
              "row entropy");
  for (std::size_t a = 0; a < arms.size(); ++a) {
    const auto& s = stats[a];
    summary << arms[a].name << "," << fmt(mean(s.acc_id)) << ","
            << fmt(stdev(s.acc_id)) << "," << fmt(mean(s.acc_adv)) << ","
            << fmt(stdev(s.acc_adv)) << "," << fmt(mean(s.entropy)) << ","
            << fmt(stdev(s.entropy)) << "\n";
    std::printf("%-20s %8.4f ± %6.4f %8.4f ± %6.4f %7.4f ± %6.4f\n",
                arms[a].name.c_str(), mean(s.acc_id), stdev(s.acc_id),
                mean(s.acc_adv), stdev(s.acc_adv), mean(s.entropy),
                stdev(s.entropy));
  }

  auto echo = hyper.echo();
  echo.emplace_back("seeds", std::to_string(n_seeds));
  echo.emplace_back("data_dir", data_dir);
  echo_config(out / "ablate_config.txt", echo);
  return 0;
}

// -------------------------------------------------------------- scm-verify

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

int cmd_scm_verify(std::size_t n, std::uint64_t seed,
                   const std::string& scm_file) {
  if (!scm_file.empty()) {
    std::ifstream in(scm_file);
    if (!in) fail("cannot open " + scm_file);
    auto m = scm::load_scm(in);
    double worst = 0;
    for (std::size_t g = 0; g < m.ng; ++g)
      worst = std::max(worst, max_abs_diff(scm::frontdoor_estimate(m, g),
                                           scm::interventional(m, g)));
    std::cout << "file " << scm_file << ": max |frontdoor - interventional| = "
              << fmt(worst) << "\n";
    return worst < kFrontdoorTol ? 0 : 1;
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> card(2, 8);
  double worst = 0;
  for (std::size_t t = 0; t < n; ++t) {
    auto m = scm::random_scm(rng, card(rng), card(rng), card(rng), card(rng));
    for (std::size_t g = 0; g < m.ng; ++g)
      worst = std::max(worst, max_abs_diff(scm::frontdoor_estimate(m, g),
                                           scm::interventional(m, g)));
  }
  std::cout << "front-door identity: max |frontdoor - interventional| = "
            << fmt(worst) << " over " << n << " random SCMs (seed " << seed
            << ")\n";

  // The gap the adjustment exists to remove, on the textbook instance.
  auto bad = scm::confounded_example();
  auto joint = scm::observational(bad);
  double gap = 0;
  for (std::size_t g = 0; g < bad.ng; ++g)
    gap = std::max(gap, max_abs_diff(scm::observational_conditional(joint, g),
                                     scm::interventional(bad, g)));
  std::cout << "confounded example: max |observational - interventional| = "
            << fmt(gap) << "\n";
  return worst < kFrontdoorTol ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"causal-walk fact verification workbench"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "write the five synthetic splits");
  std::string gen_dir;
  GeneratorConfig gcfg;
  gen->add_option("--data-dir", gen_dir, "output directory")->required();
  gen->add_option("--n-train", gcfg.n_train, "train examples");
  gen->add_option("--n-dev", gcfg.n_dev, "dev examples");
  gen->add_option("--n-test", gcfg.n_test, "examples per test split");
  gen->add_option("--chain-length", gcfg.chain_length, "gold hops per claim");
  gen->add_option("--n-distractors", gcfg.n_distractors, "distractors per example");
  gen->add_option("--classes", gcfg.classes, "2 or 3 (adds NEI)");
  gen->add_option("--bias", gcfg.bias_strength, "shortcut bias strength in [0,1]");
  gen->add_option("--seed", gcfg.seed, "generator seed");

  // train
  auto* tr = app.add_subcommand("train", "train a model and save a checkpoint");
  std::string tr_data, tr_out = "out", tr_ckpt, tr_mode = "causal";
  HyperFlags tr_hyper;
  bool tr_evsup = false;
  std::uint64_t tr_seed = 0;
  tr->add_option("--data-dir", tr_data, "directory with train.jsonl (+ dev.jsonl)")
      ->required();
  tr->add_option("--out-dir", tr_out, "artifact directory");
  tr->add_option("--checkpoint", tr_ckpt, "checkpoint path (default <out>/checkpoint.txt)");
  tr->add_option("--mode", tr_mode, "causal | walk-only");
  tr->add_flag("--evidence-supervision", tr_evsup,
               "supervise transition rows with gold evidence");
  tr->add_option("--seed", tr_seed, "training seed");
  tr_hyper.add_to(*tr);

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on one split");
  std::string ev_data, ev_ckpt, ev_out = "out", ev_split = "test_id",
              ev_mode = "causal";
  ev->add_option("--data-dir", ev_data, "directory with the split files")->required();
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint to load")->required();
  ev->add_option("--out-dir", ev_out, "artifact directory");
  ev->add_option("--split", ev_split,
                 "train | dev | test_id | test_adversarial | test_symmetric");
  ev->add_option("--mode", ev_mode, "causal | walk-only");

  // ablate
  auto* ab = app.add_subcommand(
      "ablate", "train causal / walk-only / evidence-supervised arms over shared seeds");
  std::string ab_data, ab_out = "out";
  HyperFlags ab_hyper;
  std::size_t ab_seeds = 5;
  ab->add_option("--data-dir", ab_data, "directory with the split files")->required();
  ab->add_option("--out-dir", ab_out, "artifact directory");
  ab->add_option("--seeds", ab_seeds, "seeds per arm (0..n-1)");
  ab_hyper.add_to(*ab);

  // scm-verify
  auto* sv = app.add_subcommand("scm-verify",
                                "check the front-door identity by enumeration");
  std::size_t sv_n = 200;
  std::uint64_t sv_seed = 11;
  std::string sv_file;
  sv->add_option("--n", sv_n, "random SCM instances");
  sv->add_option("--seed", sv_seed, "RNG seed for the random suite");
  sv->add_option("--scm-file", sv_file, "verify one SCM from a file instead");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::string msg = e.what();
    for (char& c : msg)
      if (c == '\n') c = ' ';
    std::cerr << "error: " << msg << "\n";
    return 1;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_dir, gcfg);
    if (tr->parsed())
      return cmd_train(tr_data, tr_out, tr_ckpt, tr_hyper, tr_mode, tr_evsup,
                       tr_seed);
    if (ev->parsed()) return cmd_eval(ev_data, ev_ckpt, ev_out, ev_split, ev_mode);
    if (ab->parsed()) return cmd_ablate(ab_data, ab_out, ab_hyper, ab_seeds);
    if (sv->parsed()) return cmd_scm_verify(sv_n, sv_seed, sv_file);
  } catch (const std::exception& e) {
    fail(e.what());
  }
  return 0;
}
