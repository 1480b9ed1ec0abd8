#pragma once

#include <cstdint>
#include <vector>

#include "causalwalk/model.hpp"
#include "causalwalk/synth_data.hpp"

namespace causalwalk {

struct AdamConfig {
  double lr = 3e-3;  // sized for the from-scratch model
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard Adam over the registry order of WalkParams::entries().
class Adam {
 public:
  Adam(WalkParams& params, const AdamConfig& config);

  // One update from the current gradients (a missing gradient counts as
  // zero) with bias-corrected moments.
  void step();

 private:
  WalkParams* params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

enum class EvalMode { kCausal, kWalkOnly };

struct TrainConfig {
  ModelConfig model;
  AdamConfig adam;
  std::size_t epochs = 10;
  std::size_t batch_size = 4;
  // kCausal minimizes L_total; kWalkOnly is the without-intervention
  // ablation and minimizes L_walk alone (and should be evaluated on
  // l_pred). Reported losses always keep the walk/causal split.
  EvalMode mode = EvalMode::kCausal;
  // Adds 0.5 x cross-entropy pushing every transition row toward the
  // gold-evidence columns (the supervised-walk ablation). Only the
  // optimizer sees this term.
  bool evidence_supervision = false;
  std::uint64_t seed = 0;
};

struct EpochStats {
  std::size_t epoch = 0;
  double loss_walk = 0;    // epoch means over train examples
  double loss_causal = 0;
  double loss_total = 0;
  double dev_accuracy = 0;  // NaN when the dev set is empty
};

struct TrainResult {
  WalkParams params;
  ConfounderDictionary dict;
  std::vector<EpochStats> history;
};

ClaimEvidenceGraph to_graph(const GeneratedExample& example,
                            const FeaturizerConfig& featurizer);

// Draws fresh parameters from the seed, builds the frozen confounder
// dictionary from their graph representations, then optimizes L_total
// over shuffled mini-batches. Bit-deterministic in the seed.
TrainResult train(const std::vector<GeneratedExample>& train_set,
                  const std::vector<GeneratedExample>& dev_set,
                  const TrainConfig& config);

// Same loop from explicit parameters and an already-frozen dictionary
// (checkpoint fine-tuning); `train` delegates here. A non-finite loss
// aborts with epoch, batch, and parameter norms in the message.
TrainResult resume_training(WalkParams params, ConfounderDictionary dict,
                            const std::vector<GeneratedExample>& train_set,
                            const std::vector<GeneratedExample>& dev_set,
                            const TrainConfig& config);

struct EvalMetrics {
  double accuracy = 0;
  std::vector<double> precision;  // per class; 0 when undefined
  std::vector<double> recall;
  std::vector<std::vector<std::size_t>> confusion;  // [gold][predicted]
  std::size_t n = 0;
};

// Argmax of l_causal ("causal") or of l_pred ("walk-only", the ablation
// without the intervention head). Deterministic; ties break low.
EvalMetrics evaluate(const std::vector<GeneratedExample>& dataset,
                     const WalkParams& params,
                     const ConfounderDictionary& dict,
                     const ModelConfig& config, EvalMode mode);

// Mean Shannon entropy (nats) of transition rows across a dataset;
// single-node graphs contribute nothing.
double mean_transition_entropy(const std::vector<GeneratedExample>& dataset,
                               const WalkParams& params,
                               const ModelConfig& config);

}  // namespace causalwalk
