#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "causalwalk/featurizer.hpp"
#include "causalwalk/tensor.hpp"

namespace causalwalk {

inline constexpr std::size_t kMaxEvidence = 20;

// Class indices are stable across the project: 2-class data uses {0,1},
// 3-class data adds NEI.
enum Label : int { kSupports = 0, kRefutes = 1, kNei = 2 };

std::string label_name(int label);
int parse_label(const std::string& name);

struct ClaimEvidenceGraph {
  std::vector<std::string> node_texts;  // [0] claim, [1..n] evidence
  ad::Tensor X;                         // (n+1) x F node features
  ad::Tensor A;                         // (n+1) x (n+1), zero diagonal
  int label = -1;                       // gold class, -1 when absent
  std::vector<std::uint8_t> evidence_flags;  // gold-chain markers, may be empty

  std::size_t n_nodes() const { return node_texts.size(); }
  std::size_t n_evidence() const { return node_texts.size() - 1; }
};

struct GconvConfig {
  std::size_t layers = 2;
  std::size_t hidden_dim = 64;  // d
  bool self_loops = true;
  enum class Normalization { kSymmetric, kRow, kNone };
  Normalization degree_normalization = Normalization::kSymmetric;

  void validate() const;  // layers >= 1, hidden_dim >= 4
};

ClaimEvidenceGraph build_graph(const std::string& claim,
                               const std::vector<std::string>& evidences,
                               const FeaturizerConfig& featurizer);

// The propagation operator N used by gconv_forward, as a plain constant:
// degree-normalized A (degrees from A alone, zero-degree rows left as-is),
// plus the identity when self_loops is set. Adding the identity after
// normalization keeps node identities distinct on fully connected graphs,
// where pre-normalized self-loops would average every row into the same
// mean vector.
ad::Tensor propagation_matrix(const ClaimEvidenceGraph& graph,
                              const GconvConfig& config);

// Stacked layers of relu(N · X · W). weights[0] maps F -> d, the rest d -> d;
// weights.size() must equal config.layers. On the tape when weights are params.
ad::Tensor gconv_forward(const ClaimEvidenceGraph& graph,
                         const std::vector<ad::Tensor>& weights,
                         const GconvConfig& config);

}  // namespace causalwalk
