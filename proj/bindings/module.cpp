// Python surface: dataset generation, training, evaluation, prediction,
// checkpoints, and the discrete-SCM oracle. Thin wrappers only — all logic
// stays in the core library.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include "causalwalk/scm.hpp"
#include "causalwalk/train.hpp"

namespace py = pybind11;
using namespace causalwalk;

namespace {

EvalMode parse_mode(const std::string& s) {
  if (s == "causal") return EvalMode::kCausal;
  if (s == "walk-only") return EvalMode::kWalkOnly;
  throw std::invalid_argument("unknown mode '" + s +
                              "' (expected causal or walk-only)");
}

// Flat view of TrainConfig so Python callers never touch nested structs.
struct TrainOptions {
  std::size_t feature_dim = 256;
  std::size_t hidden_dim = 64;
  std::size_t layers = 2;
  std::size_t beam_width = 3;
  std::size_t max_path_len = 5;
  std::size_t dict_k = 5;
  double alpha = 0.1;
  double lr = 3e-3;
  std::size_t epochs = 10;
  std::size_t batch_size = 4;
  std::string mode = "causal";
  bool evidence_supervision = false;
  std::uint64_t seed = 0;

  TrainConfig to_config(std::size_t n_classes) const {
    TrainConfig cfg;
    cfg.model.featurizer.dim = feature_dim;
    cfg.model.gconv.hidden_dim = hidden_dim;
    cfg.model.gconv.layers = layers;
    cfg.model.n_classes = n_classes;
    cfg.model.beam_width = beam_width;
    cfg.model.max_path_len = max_path_len;
    cfg.model.dict_k = dict_k;
    cfg.model.alpha = alpha;
    cfg.adam.lr = lr;
    cfg.epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.mode = parse_mode(mode);
    cfg.evidence_supervision = evidence_supervision;
    cfg.seed = seed;
    return cfg;
  }
};

// Trained model handle: frozen config + parameters + confounder dictionary.
struct Model {
  ModelConfig config;
  WalkParams params;
  ConfounderDictionary dict;

  EvalMetrics evaluate_on(const std::vector<GeneratedExample>& dataset,
                          const std::string& mode) const {
    return evaluate(dataset, params, dict, config, parse_mode(mode));
  }

  py::dict predict(const std::string& claim,
                   const std::vector<std::string>& evidence,
                   const std::string& mode) const {
    GeneratedExample ex;
    ex.claim = claim;
    ex.evidence = evidence;
    auto graph = to_graph(ex, config.featurizer);
    auto out = forward_causal(graph, params, dict, config);
    const auto& probs = parse_mode(mode) == EvalMode::kCausal
                            ? out.l_causal.values()
                            : out.l_pred.values();
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.size(); ++c)
      if (probs[c] > probs[best]) best = c;
    py::dict r;
    r["label"] = static_cast<int>(best);
    r["label_name"] = label_name(static_cast<int>(best));
    r["probs"] = probs;
    r["top_path"] = out.per_path.front().path.nodes;
    return r;
  }

  double transition_entropy(const std::vector<GeneratedExample>& dataset) const {
    return mean_transition_entropy(dataset, params, config);
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    save_checkpoint(out, config, params, dict);
  }

  static Model load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    auto ck = load_checkpoint(in);
    return {ck.config, std::move(ck.params), std::move(ck.dict)};
  }
};

struct TrainOutcome {
  Model model;
  std::vector<EpochStats> history;
};

TrainOutcome run_training(const std::vector<GeneratedExample>& train_set,
                          const std::vector<GeneratedExample>& dev_set,
                          const TrainOptions& options) {
  int max_label = 1;
  for (const auto& ex : train_set) max_label = std::max(max_label, ex.label);
  for (const auto& ex : dev_set) max_label = std::max(max_label, ex.label);
  TrainConfig cfg = options.to_config(static_cast<std::size_t>(max_label) + 1);
  auto r = train(train_set, dev_set, cfg);
  return {{cfg.model, std::move(r.params), std::move(r.dict)},
          std::move(r.history)};
}

std::string logic_eval(const std::string& claim,
                       const std::vector<std::string>& evidence) {
  switch (template_logic_eval(claim, evidence)) {
    case LogicVerdict::kSupports:
      return "SUPPORTS";
    case LogicVerdict::kRefutes:
      return "REFUTES";
    default:
      return "UNDETERMINED";
  }
}

}  // namespace

PYBIND11_MODULE(_causalwalk, m) {
  m.doc() = "front-door-adjusted multi-hop fact verification";

  py::class_<GeneratorConfig>(m, "GeneratorConfig")
      .def(py::init<>())
      .def_readwrite("n_train", &GeneratorConfig::n_train)
      .def_readwrite("n_dev", &GeneratorConfig::n_dev)
      .def_readwrite("n_test", &GeneratorConfig::n_test)
      .def_readwrite("chain_length", &GeneratorConfig::chain_length)
      .def_readwrite("n_distractors", &GeneratorConfig::n_distractors)
      .def_readwrite("classes", &GeneratorConfig::classes)
      .def_readwrite("bias_strength", &GeneratorConfig::bias_strength)
      .def_readwrite("seed", &GeneratorConfig::seed);

  py::class_<GeneratedExample>(m, "Example")
      .def(py::init<>())
      .def_readwrite("id", &GeneratedExample::id)
      .def_readwrite("claim", &GeneratedExample::claim)
      .def_readwrite("evidence", &GeneratedExample::evidence)
      .def_readwrite("evidence_flags", &GeneratedExample::evidence_flags)
      .def_readwrite("label", &GeneratedExample::label)
      .def_readonly("has_shortcut", &GeneratedExample::has_shortcut)
      .def_readonly("shortcut_agrees", &GeneratedExample::shortcut_agrees)
      .def("__repr__", [](const GeneratedExample& e) {
        return "<Example " + e.id + " label=" + label_name(e.label) + ">";
      });

  py::class_<DatasetSplits>(m, "Splits")
      .def_readonly("train", &DatasetSplits::train)
      .def_readonly("dev", &DatasetSplits::dev)
      .def_readonly("test_id", &DatasetSplits::test_id)
      .def_readonly("test_adversarial", &DatasetSplits::test_adversarial)
      .def_readonly("test_symmetric", &DatasetSplits::test_symmetric);

  py::class_<EpochStats>(m, "EpochStats")
      .def_readonly("epoch", &EpochStats::epoch)
      .def_readonly("loss_walk", &EpochStats::loss_walk)
      .def_readonly("loss_causal", &EpochStats::loss_causal)
      .def_readonly("loss_total", &EpochStats::loss_total)
      .def_readonly("dev_accuracy", &EpochStats::dev_accuracy);

  py::class_<EvalMetrics>(m, "Metrics")
      .def_readonly("accuracy", &EvalMetrics::accuracy)
      .def_readonly("precision", &EvalMetrics::precision)
      .def_readonly("recall", &EvalMetrics::recall)
      .def_readonly("confusion", &EvalMetrics::confusion)
      .def_readonly("n", &EvalMetrics::n);

  py::class_<TrainOptions>(m, "TrainOptions")
      .def(py::init<>())
      .def_readwrite("feature_dim", &TrainOptions::feature_dim)
      .def_readwrite("hidden_dim", &TrainOptions::hidden_dim)
      .def_readwrite("layers", &TrainOptions::layers)
      .def_readwrite("beam_width", &TrainOptions::beam_width)
      .def_readwrite("max_path_len", &TrainOptions::max_path_len)
      .def_readwrite("dict_k", &TrainOptions::dict_k)
      .def_readwrite("alpha", &TrainOptions::alpha)
      .def_readwrite("lr", &TrainOptions::lr)
      .def_readwrite("epochs", &TrainOptions::epochs)
      .def_readwrite("batch_size", &TrainOptions::batch_size)
      .def_readwrite("mode", &TrainOptions::mode)
      .def_readwrite("evidence_supervision", &TrainOptions::evidence_supervision)
      .def_readwrite("seed", &TrainOptions::seed);

  py::class_<Model>(m, "Model")
      .def("evaluate", &Model::evaluate_on, py::arg("dataset"),
           py::arg("mode") = "causal")
      .def("predict", &Model::predict, py::arg("claim"), py::arg("evidence"),
           py::arg("mode") = "causal")
      .def("transition_entropy", &Model::transition_entropy, py::arg("dataset"))
      .def("save", &Model::save, py::arg("path"))
      .def_static("load", &Model::load, py::arg("path"));

  py::class_<TrainOutcome>(m, "TrainOutcome")
      .def_readonly("model", &TrainOutcome::model)
      .def_readonly("history", &TrainOutcome::history);

  m.def("generate", &generate, py::arg("config"),
        "deterministic synthetic splits for a generator config");
  m.def("train", &run_training, py::arg("train_set"),
        py::arg("dev_set") = std::vector<GeneratedExample>{},
        py::arg("options") = TrainOptions{});
  m.def("logic_eval", &logic_eval, py::arg("claim"), py::arg("evidence"),
        "exact symbolic verdict for generator-grammar text");
  m.def("label_name", &label_name, py::arg("label"));
  m.def("shortcut_sentence", &shortcut_sentence, py::arg("label"),
        py::return_value_policy::copy);

  m.def("load_jsonl", [](const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return load_jsonl(in);
  });
  m.def("save_jsonl",
        [](const std::string& path, const std::vector<GeneratedExample>& ex) {
          std::ofstream out(path);
          if (!out) throw std::runtime_error("cannot write " + path);
          save_jsonl(out, ex);
        });

  // exact discrete-SCM oracle
  auto s = m.def_submodule("scm", "front-door oracle on discrete SCMs");
  py::class_<scm::DiscreteScm>(s, "DiscreteScm")
      .def(py::init<>())
      .def_readwrite("nu", &scm::DiscreteScm::nu)
      .def_readwrite("ng", &scm::DiscreteScm::ng)
      .def_readwrite("nr", &scm::DiscreteScm::nr)
      .def_readwrite("nl", &scm::DiscreteScm::nl)
      .def_readwrite("p_u", &scm::DiscreteScm::p_u)
      .def_readwrite("p_g_given_u", &scm::DiscreteScm::p_g_given_u)
      .def_readwrite("p_r_given_g", &scm::DiscreteScm::p_r_given_g)
      .def_readwrite("p_l_given_ru", &scm::DiscreteScm::p_l_given_ru)
      .def("validate", &scm::DiscreteScm::validate);
  s.def("random_scm",
        [](std::uint64_t seed, std::size_t nu, std::size_t ng, std::size_t nr,
           std::size_t nl) {
          std::mt19937_64 rng(seed);
          return scm::random_scm(rng, nu, ng, nr, nl);
        },
        py::arg("seed"), py::arg("nu") = 2, py::arg("ng") = 2,
        py::arg("nr") = 2, py::arg("nl") = 2);
  s.def("confounded_example", &scm::confounded_example);
  s.def("interventional", &scm::interventional, py::arg("model"), py::arg("g"));
  s.def("frontdoor_estimate",
        py::overload_cast<const scm::DiscreteScm&, std::size_t>(
            &scm::frontdoor_estimate),
        py::arg("model"), py::arg("g"));
  s.def("observational_conditional", [](const scm::DiscreteScm& m, std::size_t g) {
    return scm::observational_conditional(scm::observational(m), g);
  });
  s.def("save_scm", [](const scm::DiscreteScm& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    scm::save_scm(m, out);
  });
  s.def("load_scm", [](const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return scm::load_scm(in);
  });
}
