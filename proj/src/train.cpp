#include "causalwalk/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>

namespace causalwalk {

namespace {

constexpr double kEvidenceLossWeight = 0.5;

std::vector<ClaimEvidenceGraph> build_graphs(
    const std::vector<GeneratedExample>& examples,
    const FeaturizerConfig& featurizer) {
  std::vector<ClaimEvidenceGraph> graphs;
  graphs.reserve(examples.size());
  for (const auto& ex : examples) graphs.push_back(to_graph(ex, featurizer));
  return graphs;
}

std::string param_norms(const WalkParams& params) {
  std::ostringstream oss;
  oss.precision(6);
  bool first = true;
  for (const auto& [name, t] : params.entries()) {
    double sq = 0.0;
    for (double v : t->values()) sq += v * v;
    oss << (first ? "" : ",") << name << "=" << std::sqrt(sq);
    first = false;
  }
  return oss.str();
}

[[noreturn]] void abort_non_finite(std::size_t epoch, std::size_t batch,
                                   const WalkParams& params) {
  throw std::runtime_error("train: non-finite loss at epoch " +
                           std::to_string(epoch) + " batch " +
                           std::to_string(batch) +
                           "; parameter norms: " + param_norms(params));
}

// Cross-entropy of every transition row against a uniform target over the
// gold-evidence columns. Diagonal hits (a gold column's own row) are
// structurally zero and excluded via the mask.
std::optional<ad::Tensor> evidence_loss(const ModelOutput& out,
                                        const ClaimEvidenceGraph& graph) {
  const std::size_t n1 = graph.n_nodes();
  if (n1 < 2 || graph.evidence_flags.empty()) return std::nullopt;
  std::vector<std::size_t> gold;
  for (std::size_t i = 0; i < graph.evidence_flags.size(); ++i)
    if (graph.evidence_flags[i]) gold.push_back(i + 1);
  if (gold.empty()) return std::nullopt;

  auto selected = ad::rows(ad::transpose(out.transition.p), gold);
  std::vector<double> mask(gold.size() * n1, 1.0);
  std::size_t kept = 0;
  for (std::size_t g = 0; g < gold.size(); ++g) mask[g * n1 + gold[g]] = 0.0;
  kept = gold.size() * n1 - gold.size();
  if (kept == 0) return std::nullopt;
  auto log_probs = ad::log(ad::clamp_min(selected, 1e-12));
  auto masked = ad::mul(log_probs,
                        ad::Tensor::constant({gold.size(), n1}, mask));
  return ad::scalar_mul(ad::sum(masked), -1.0 / static_cast<double>(kept));
}

std::size_t argmax_low(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

EvalMetrics evaluate_graphs(const std::vector<ClaimEvidenceGraph>& graphs,
                            const WalkParams& params,
                            const ConfounderDictionary& dict,
                            const ModelConfig& config, EvalMode mode) {
  const std::size_t n_classes = config.n_classes;
  EvalMetrics m;
  m.n = graphs.size();
  m.confusion.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
  for (const auto& g : graphs) {
    if (g.label < 0 || static_cast<std::size_t>(g.label) >= n_classes)
      throw std::invalid_argument("evaluate: label out of range");
    const auto out = forward_causal(g, params, dict, config);
    const auto& dist =
        (mode == EvalMode::kCausal ? out.l_causal : out.l_pred).values();
    m.confusion[static_cast<std::size_t>(g.label)][argmax_low(dist)] += 1;
  }
  std::size_t hits = 0;
  for (std::size_t c = 0; c < n_classes; ++c) hits += m.confusion[c][c];
  m.accuracy = static_cast<double>(hits) / static_cast<double>(m.n);
  m.precision.assign(n_classes, 0.0);
  m.recall.assign(n_classes, 0.0);
  for (std::size_t c = 0; c < n_classes; ++c) {
    std::size_t tp = m.confusion[c][c], pred = 0, gold = 0;
    for (std::size_t g = 0; g < n_classes; ++g) {
      pred += m.confusion[g][c];
      gold += m.confusion[c][g];
    }
    if (pred > 0) m.precision[c] = static_cast<double>(tp) / pred;
    if (gold > 0) m.recall[c] = static_cast<double>(tp) / gold;
  }
  return m;
}

}  // namespace

Adam::Adam(WalkParams& params, const AdamConfig& config)
    : params_(&params), cfg_(config) {
  for (const auto& [name, t] : params.entries()) {
    m_.emplace_back(t->size(), 0.0);
    v_.emplace_back(t->size(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  auto entries = params_->entries();
  for (std::size_t e = 0; e < entries.size(); ++e) {
    ad::Tensor& x = *entries[e].second;
    const std::vector<double>* g = x.has_grad() ? &x.grad() : nullptr;
    auto& vals = x.mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double gi = g ? (*g)[i] : 0.0;
      m_[e][i] = cfg_.beta1 * m_[e][i] + (1.0 - cfg_.beta1) * gi;
      v_[e][i] = cfg_.beta2 * v_[e][i] + (1.0 - cfg_.beta2) * gi * gi;
      vals[i] -=
          cfg_.lr * (m_[e][i] / bc1) / (std::sqrt(v_[e][i] / bc2) + cfg_.eps);
    }
  }
}

ClaimEvidenceGraph to_graph(const GeneratedExample& example,
                            const FeaturizerConfig& featurizer) {
  auto g = build_graph(example.claim, example.evidence, featurizer);
  g.label = example.label;
  g.evidence_flags = example.evidence_flags;
  return g;
}

TrainResult train(const std::vector<GeneratedExample>& train_set,
                  const std::vector<GeneratedExample>& dev_set,
                  const TrainConfig& config) {
  if (train_set.empty()) throw std::invalid_argument("train: empty dataset");
  config.model.validate();
  std::mt19937_64 rng(config.seed);
  WalkParams params = WalkParams::init(config.model, rng);
  const auto graphs = build_graphs(train_set, config.model.featurizer);
  ConfounderDictionary dict =
      init_confounder_dictionary(graphs, params, config.model, rng);
  return resume_training(std::move(params), std::move(dict), train_set,
                         dev_set, config);
}

TrainResult resume_training(WalkParams params, ConfounderDictionary dict,
                            const std::vector<GeneratedExample>& train_set,
                            const std::vector<GeneratedExample>& dev_set,
                            const TrainConfig& config) {
  if (train_set.empty()) throw std::invalid_argument("train: empty dataset");
  config.model.validate();
  dict.validate();
  const auto graphs = build_graphs(train_set, config.model.featurizer);
  const auto dev_graphs = build_graphs(dev_set, config.model.featurizer);
  const std::size_t batch =
      std::max<std::size_t>(1, config.batch_size);

  TrainResult res{std::move(params), std::move(dict), {}};
  Adam opt(res.params, config.adam);
  std::mt19937_64 shuffle_rng(config.seed * 0x9e3779b97f4a7c15ULL + 1);
  std::vector<std::size_t> order(graphs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double sum_walk = 0, sum_causal = 0, sum_total = 0;
    for (std::size_t start = 0, b = 0; start < order.size();
         start += batch, ++b) {
      const std::size_t stop = std::min(order.size(), start + batch);
      ad::Tape tape;
      ad::Tensor batch_loss;
      for (std::size_t k = start; k < stop; ++k) {
        const auto& g = graphs[order[k]];
        const auto out = forward_causal(g, res.params, res.dict, config.model);
        const auto losses =
            compute_losses(out, g.label, config.model.n_classes);
        if (!std::isfinite(losses.total.item()))
          abort_non_finite(epoch, b, res.params);
        sum_walk += losses.walk.item();
        sum_causal += losses.causal.item();
        sum_total += losses.total.item();
        ad::Tensor ex_loss = config.mode == EvalMode::kWalkOnly
                                 ? losses.walk
                                 : losses.total;
        if (config.evidence_supervision) {
          if (auto ev = evidence_loss(out, g))
            ex_loss = ad::add(ex_loss,
                              ad::scalar_mul(*ev, kEvidenceLossWeight));
        }
        batch_loss = batch_loss.defined() ? ad::add(batch_loss, ex_loss)
                                          : ex_loss;
      }
      batch_loss = ad::scalar_mul(batch_loss,
                                  1.0 / static_cast<double>(stop - start));
      if (!std::isfinite(batch_loss.item()))
        abort_non_finite(epoch, b, res.params);
      tape.backward(batch_loss);
      opt.step();
    }
    EpochStats st;
    st.epoch = epoch;
    st.loss_walk = sum_walk / static_cast<double>(graphs.size());
    st.loss_causal = sum_causal / static_cast<double>(graphs.size());
    st.loss_total = sum_total / static_cast<double>(graphs.size());
    st.dev_accuracy =
        dev_graphs.empty()
            ? std::numeric_limits<double>::quiet_NaN()
            : evaluate_graphs(dev_graphs, res.params, res.dict, config.model,
                              config.mode)
                  .accuracy;
    res.history.push_back(st);
  }
  return res;
}

EvalMetrics evaluate(const std::vector<GeneratedExample>& dataset,
                     const WalkParams& params,
                     const ConfounderDictionary& dict,
                     const ModelConfig& config, EvalMode mode) {
  if (dataset.empty()) throw std::invalid_argument("evaluate: empty dataset");
  config.validate();
  dict.validate();
  return evaluate_graphs(build_graphs(dataset, config.featurizer), params,
                         dict, config, mode);
}

double mean_transition_entropy(const std::vector<GeneratedExample>& dataset,
                               const WalkParams& params,
                               const ModelConfig& config) {
  config.validate();
  double total = 0.0;
  std::size_t rows = 0;
  for (const auto& ex : dataset) {
    const auto g = to_graph(ex, config.featurizer);
    const std::size_t n1 = g.n_nodes();
    if (n1 < 2) continue;
    const auto h = gconv_forward(g, params.gconv, config.gconv);
    const auto scores = edge_scores(h, params);
    std::vector<std::uint8_t> mask(n1 * n1, 1);
    for (std::size_t i = 0; i < n1; ++i) mask[i * n1 + i] = 0;
    const auto t = transition_probs(scores, mask);
    for (std::size_t i = 0; i < n1; ++i) {
      double h_row = 0.0;
      for (std::size_t j = 0; j < n1; ++j) {
        const double p = t.p.values()[i * n1 + j];
        if (p > 0.0) h_row -= p * std::log(p);
      }
      total += h_row;
      ++rows;
    }
  }
  return rows == 0 ? 0.0 : total / static_cast<double>(rows);
}

}  // namespace causalwalk
