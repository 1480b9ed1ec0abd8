#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "causalwalk/graph.hpp"
#include "causalwalk/tensor.hpp"

namespace causalwalk {

struct ModelConfig {
  FeaturizerConfig featurizer;  // featurizer.dim is F
  GconvConfig gconv;            // gconv.hidden_dim is d
  std::size_t n_classes = 2;    // N
  std::size_t beam_width = 3;   // w
  std::size_t max_path_len = 5; // m: steps per sampled path
  std::size_t dict_k = 5;       // confounder samples per class
  double alpha = 0.1;           // intervention weight

  std::size_t d() const { return gconv.hidden_dim; }
  void validate() const;
};

// Every learnable tensor of the model. Stored in row-vector convention:
// activations are 1 x d rows, weights multiply on the right.
struct WalkParams {
  std::vector<ad::Tensor> gconv;  // [0]: F x d, rest d x d

  // edge scorer (3d -> d -> 1, tanh hidden): a_ij from (x_i, x_j, x_0)
  ad::Tensor edge_w1, edge_b1, edge_w2, edge_b2;
  // graph-attention scorer (2d -> d -> 1, tanh hidden)
  ad::Tensor attn_w1, attn_b1, attn_w2, attn_b2;
  // LSTM cell, input d, state d
  ad::Tensor lstm_wx_i, lstm_wh_i, lstm_b_i;
  ad::Tensor lstm_wx_f, lstm_wh_f, lstm_b_f;
  ad::Tensor lstm_wx_o, lstm_wh_o, lstm_b_o;
  ad::Tensor lstm_wx_c, lstm_wh_c, lstm_b_c;
  // intervention head: logits = x_r w_r + alpha * E[x_g] w_g
  ad::Tensor w_r, w_g;  // d x N
  // dictionary attention projections
  ad::Tensor w_q, w_k;  // d x d
  // shared classifier f_classifier: d -> N
  ad::Tensor cls_w, cls_b;

  // Stable name -> tensor registry; iteration order defines checkpoint and
  // optimizer order.
  std::vector<std::pair<std::string, ad::Tensor*>> entries();
  std::vector<std::pair<std::string, const ad::Tensor*>> entries() const;

  static WalkParams init(const ModelConfig& config, std::mt19937_64& rng);
};

struct TransitionMatrix {
  ad::Tensor p;                              // (n+1) x (n+1), rows sum to 1
  std::vector<std::uint8_t> neighbor_mask;   // row-major; false entries are 0
  std::size_t n_nodes = 0;
};

struct ReasoningPath {
  std::vector<std::size_t> nodes;  // nodes[0] == 0, no repeats
  double log_prob = 0.0;
  double prob = 1.0;
};

struct BeamSet {
  std::vector<ReasoningPath> paths;  // sorted by descending log_prob
  std::size_t width = 0;
};

struct ConfounderDictionary {
  std::size_t n_classes = 0, k = 0, d = 0;
  std::vector<double> centers;  // [class][sample][dim] row-major
  bool frozen = false;

  ad::Tensor class_centers(std::size_t label) const;  // constant k x d
  void validate() const;
};

struct PathResult {
  ReasoningPath path;
  ad::Tensor x_r;         // 1 x d
  ad::Tensor l_r;         // 1 x N, Eq-17 head
  ad::Tensor intervened;  // 1 x N, P(L|do(r))
};

struct ModelOutput {
  ad::Tensor l_causal;  // 1 x N
  ad::Tensor l_pred;    // 1 x N
  std::vector<PathResult> per_path;
  ad::Tensor beam_weights;  // 1 x |beam|, sums to 1
  // present when the graph has >= 2 nodes:
  TransitionMatrix transition;
};

// a[i,j] = MLP(x_i, x_j, x_0); returns an (n+1) x (n+1) score matrix.
ad::Tensor edge_scores(const ad::Tensor& node_reps, const WalkParams& params);

// Masked softmax of each score row over the neighbor set.
TransitionMatrix transition_probs(const ad::Tensor& scores,
                                  const std::vector<std::uint8_t>& neighbor_mask);

// Plain-value walk probability of a node sequence; log-space product.
double path_probability(const std::vector<std::size_t>& nodes,
                        const TransitionMatrix& t);
// The same quantity as a tape-connected scalar log-probability.
ad::Tensor path_log_prob(const std::vector<std::size_t>& nodes,
                         const TransitionMatrix& t);

// Stepwise beam expansion from node 0, no node revisited, target length
// min(max_len+1, n+1) nodes. Ties break toward the lexicographically
// smaller node sequence. Value-level: carries no gradient.
BeamSet beam_search_paths(const TransitionMatrix& t, std::size_t width,
                          std::size_t max_len);

// LSTM over the path's node representations, h0 = c0 = x_g; returns final h.
ad::Tensor encode_path(const std::vector<std::size_t>& nodes,
                       const ad::Tensor& node_reps, const ad::Tensor& x_g,
                       const WalkParams& params);

// Attention-weighted sum of evidence node representations (claim as query).
// Zero evidence yields the zero vector.
ad::Tensor graph_summary(const ad::Tensor& node_reps, const WalkParams& params);

// Per-class K-Means over the graph representations of the training set under
// the given (initial) parameters; the result is frozen.
ConfounderDictionary init_confounder_dictionary(
    const std::vector<ClaimEvidenceGraph>& graphs, const WalkParams& params,
    const ModelConfig& config, std::mt19937_64& rng);

// l_r = softmax(f_classifier(x_r))
ad::Tensor path_only_classify(const ad::Tensor& x_r, const WalkParams& params);

// E[x_g] = (1/N) sum_i l_r[i] z'_i with z'_i dot-product attention over the
// class-i dictionary entries (queries from x_r).
ad::Tensor expected_graph_rep(const ad::Tensor& x_r, const ad::Tensor& l_r,
                              const ConfounderDictionary& dict,
                              const WalkParams& params);

// P(L|do(r)) = softmax(x_r w_r + alpha * e_g w_g)
ad::Tensor intervene(const ad::Tensor& x_r, const ad::Tensor& e_g,
                     const WalkParams& params, double alpha);

// Full pipeline for one graph. Beam weights are the walk probabilities
// renormalized over the beam, so l_causal and l_pred are distributions.
ModelOutput forward_causal(const ClaimEvidenceGraph& graph,
                           const WalkParams& params,
                           const ConfounderDictionary& dict,
                           const ModelConfig& config);

struct Losses {
  ad::Tensor causal;  // -log l_causal[gold]
  ad::Tensor walk;    // -log l_pred[gold]
  ad::Tensor total;   // causal + walk
};

Losses compute_losses(const ModelOutput& output, int gold_label,
                      std::size_t n_classes);

// Versioned text checkpoint: `causalwalk-ckpt v1` header, config lines, the
// frozen dictionary, then each parameter as name/shape/values with 17
// significant digits. Round-trips bit-exactly.
void save_checkpoint(std::ostream& out, const ModelConfig& config,
                     const WalkParams& params, const ConfounderDictionary& dict);
struct Checkpoint {
  ModelConfig config;
  WalkParams params;
  ConfounderDictionary dict;
};
Checkpoint load_checkpoint(std::istream& in);

}  // namespace causalwalk
