#include "causalwalk/graph.hpp"

#include <cmath>
#include <stdexcept>

namespace causalwalk {

std::string label_name(int label) {
  switch (label) {
    case kSupports: return "SUPPORTS";
    case kRefutes: return "REFUTES";
    case kNei: return "NEI";
  }
  throw std::invalid_argument("label_name: unknown label " + std::to_string(label));
}

int parse_label(const std::string& name) {
  if (name == "SUPPORTS") return kSupports;
  if (name == "REFUTES") return kRefutes;
  if (name == "NEI") return kNei;
  throw std::invalid_argument("parse_label: unknown label '" + name + "'");
}

void GconvConfig::validate() const {
  if (layers < 1) throw std::invalid_argument("gconv: layers must be >= 1");
  if (hidden_dim < 4) throw std::invalid_argument("gconv: hidden_dim must be >= 4");
}

ClaimEvidenceGraph build_graph(const std::string& claim,
                               const std::vector<std::string>& evidences,
                               const FeaturizerConfig& featurizer) {
  if (evidences.size() > kMaxEvidence) {
    throw std::invalid_argument("build_graph: " + std::to_string(evidences.size()) +
                                " evidences exceeds the limit of " +
                                std::to_string(kMaxEvidence));
  }
  ClaimEvidenceGraph g;
  g.node_texts.reserve(evidences.size() + 1);
  g.node_texts.push_back(claim);
  for (const auto& e : evidences) g.node_texts.push_back(e);

  const std::size_t n1 = g.node_texts.size();
  std::vector<double> feats;
  feats.reserve(n1 * featurizer.dim);
  {
    auto row = featurize_sentence(claim, featurizer);
    feats.insert(feats.end(), row.begin(), row.end());
  }
  for (const auto& e : evidences) {
    auto row = featurize_pair(e, claim, featurizer);
    feats.insert(feats.end(), row.begin(), row.end());
  }
  g.X = ad::Tensor::constant({n1, featurizer.dim}, std::move(feats));

  std::vector<double> adj(n1 * n1, 1.0);
  for (std::size_t i = 0; i < n1; ++i) adj[i * n1 + i] = 0.0;
  g.A = ad::Tensor::constant({n1, n1}, std::move(adj));
  return g;
}

ad::Tensor propagation_matrix(const ClaimEvidenceGraph& graph,
                              const GconvConfig& config) {
  config.validate();
  const std::size_t n1 = graph.n_nodes();
  if (graph.A.shape() != ad::Shape{n1, n1}) {
    throw std::invalid_argument("gconv: adjacency shape " +
                                ad::shape_str(graph.A.shape()) + " for " +
                                std::to_string(n1) + " nodes");
  }
  const auto& a = graph.A.values();
  std::vector<double> degree(n1, 0.0);
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n1; ++j) degree[i] += a[i * n1 + j];

  std::vector<double> norm(n1 * n1, 0.0);
  for (std::size_t i = 0; i < n1; ++i) {
    const double di = degree[i] > 0.0 ? degree[i] : 1.0;
    for (std::size_t j = 0; j < n1; ++j) {
      const double aij = a[i * n1 + j];
      if (aij == 0.0) continue;
      switch (config.degree_normalization) {
        case GconvConfig::Normalization::kSymmetric: {
          const double dj = degree[j] > 0.0 ? degree[j] : 1.0;
          norm[i * n1 + j] = aij / std::sqrt(di * dj);
          break;
        }
        case GconvConfig::Normalization::kRow:
          norm[i * n1 + j] = aij / di;
          break;
        case GconvConfig::Normalization::kNone:
          norm[i * n1 + j] = aij;
          break;
      }
    }
  }
  if (config.self_loops) {
    for (std::size_t i = 0; i < n1; ++i) norm[i * n1 + i] += 1.0;
  }
  return ad::Tensor::constant({n1, n1}, std::move(norm));
}

ad::Tensor gconv_forward(const ClaimEvidenceGraph& graph,
                         const std::vector<ad::Tensor>& weights,
                         const GconvConfig& config) {
  config.validate();
  if (weights.size() != config.layers) {
    throw std::invalid_argument("gconv: " + std::to_string(weights.size()) +
                                " weight matrices for " +
                                std::to_string(config.layers) + " layers");
  }
  const ad::Tensor n = propagation_matrix(graph, config);
  ad::Tensor h = graph.X;
  for (const auto& w : weights) {
    h = ad::relu(ad::matmul(ad::matmul(n, h), w));
  }
  return h;
}

}  // namespace causalwalk
