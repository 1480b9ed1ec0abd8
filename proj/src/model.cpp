#include "causalwalk/model.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "causalwalk/kmeans.hpp"

namespace causalwalk {

using ad::Tensor;

namespace {

Tensor uniform_param(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(rows));
  std::uniform_real_distribution<double> dist(-scale, scale);
  std::vector<double> v(rows * cols);
  for (double& x : v) x = dist(rng);
  return Tensor::param({rows, cols}, std::move(v));
}

Tensor zero_param(std::size_t rows, std::size_t cols) {
  return Tensor::param({rows, cols}, std::vector<double>(rows * cols, 0.0));
}

// x (m x p) @ w (p x q) + b (1 x q) broadcast over rows via a ones column.
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tensor out = ad::matmul(x, w);
  if (x.rows() == 1) return ad::add(out, b);
  Tensor ones = Tensor::constant({x.rows(), 1}, std::vector<double>(x.rows(), 1.0));
  return ad::add(out, ad::matmul(ones, b));
}

}  // namespace

void ModelConfig::validate() const {
  featurizer.validate();
  gconv.validate();
  if (n_classes < 2) throw std::invalid_argument("model: n_classes must be >= 2");
  if (beam_width < 1) throw std::invalid_argument("model: beam_width must be >= 1");
  if (max_path_len < 1)
    throw std::invalid_argument("model: max_path_len must be >= 1");
  if (dict_k < 1) throw std::invalid_argument("model: dict_k must be >= 1");
  if (!std::isfinite(alpha)) throw std::invalid_argument("model: alpha not finite");
}

std::vector<std::pair<std::string, Tensor*>> WalkParams::entries() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (std::size_t i = 0; i < gconv.size(); ++i)
    out.emplace_back("gconv." + std::to_string(i), &gconv[i]);
  out.emplace_back("edge_w1", &edge_w1);
  out.emplace_back("edge_b1", &edge_b1);
  out.emplace_back("edge_w2", &edge_w2);
  out.emplace_back("edge_b2", &edge_b2);
  out.emplace_back("attn_w1", &attn_w1);
  out.emplace_back("attn_b1", &attn_b1);
  out.emplace_back("attn_w2", &attn_w2);
  out.emplace_back("attn_b2", &attn_b2);
  out.emplace_back("lstm_wx_i", &lstm_wx_i);
  out.emplace_back("lstm_wh_i", &lstm_wh_i);
  out.emplace_back("lstm_b_i", &lstm_b_i);
  out.emplace_back("lstm_wx_f", &lstm_wx_f);
  out.emplace_back("lstm_wh_f", &lstm_wh_f);
  out.emplace_back("lstm_b_f", &lstm_b_f);
  out.emplace_back("lstm_wx_o", &lstm_wx_o);
  out.emplace_back("lstm_wh_o", &lstm_wh_o);
  out.emplace_back("lstm_b_o", &lstm_b_o);
  out.emplace_back("lstm_wx_c", &lstm_wx_c);
  out.emplace_back("lstm_wh_c", &lstm_wh_c);
  out.emplace_back("lstm_b_c", &lstm_b_c);
  out.emplace_back("w_r", &w_r);
  out.emplace_back("w_g", &w_g);
  out.emplace_back("w_q", &w_q);
  out.emplace_back("w_k", &w_k);
  out.emplace_back("cls_w", &cls_w);
  out.emplace_back("cls_b", &cls_b);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> WalkParams::entries() const {
  auto mut = const_cast<WalkParams*>(this)->entries();
  std::vector<std::pair<std::string, const Tensor*>> out;
  out.reserve(mut.size());
  for (auto& [name, t] : mut) out.emplace_back(name, t);
  return out;
}

WalkParams WalkParams::init(const ModelConfig& config, std::mt19937_64& rng) {
  config.validate();
  const std::size_t f = config.featurizer.dim;
  const std::size_t d = config.d();
  const std::size_t n = config.n_classes;
  WalkParams p;
  p.gconv.push_back(uniform_param(rng, f, d));
  for (std::size_t l = 1; l < config.gconv.layers; ++l)
    p.gconv.push_back(uniform_param(rng, d, d));
  p.edge_w1 = uniform_param(rng, 3 * d, d);
  p.edge_b1 = zero_param(1, d);
  p.edge_w2 = uniform_param(rng, d, 1);
  p.edge_b2 = zero_param(1, 1);
  p.attn_w1 = uniform_param(rng, 2 * d, d);
  p.attn_b1 = zero_param(1, d);
  p.attn_w2 = uniform_param(rng, d, 1);
  p.attn_b2 = zero_param(1, 1);
  p.lstm_wx_i = uniform_param(rng, d, d);
  p.lstm_wh_i = uniform_param(rng, d, d);
  p.lstm_b_i = zero_param(1, d);
  p.lstm_wx_f = uniform_param(rng, d, d);
  p.lstm_wh_f = uniform_param(rng, d, d);
  p.lstm_b_f = zero_param(1, d);
  p.lstm_wx_o = uniform_param(rng, d, d);
  p.lstm_wh_o = uniform_param(rng, d, d);
  p.lstm_b_o = zero_param(1, d);
  p.lstm_wx_c = uniform_param(rng, d, d);
  p.lstm_wh_c = uniform_param(rng, d, d);
  p.lstm_b_c = zero_param(1, d);
  p.w_r = uniform_param(rng, d, n);
  p.w_g = uniform_param(rng, d, n);
  p.w_q = uniform_param(rng, d, d);
  p.w_k = uniform_param(rng, d, d);
  p.cls_w = uniform_param(rng, d, n);
  p.cls_b = zero_param(1, n);
  return p;
}

Tensor edge_scores(const Tensor& node_reps, const WalkParams& params) {
  const std::size_t n1 = node_reps.rows();
  std::vector<std::size_t> ii, jj, cc;
  ii.reserve(n1 * n1);
  jj.reserve(n1 * n1);
  cc.assign(n1 * n1, 0);
  for (std::size_t i = 0; i < n1; ++i) {
    for (std::size_t j = 0; j < n1; ++j) {
      ii.push_back(i);
      jj.push_back(j);
    }
  }
  Tensor cat = ad::concat({ad::rows(node_reps, ii), ad::rows(node_reps, jj),
                           ad::rows(node_reps, cc)},
                          1);
  Tensor hidden = ad::tanh(affine(cat, params.edge_w1, params.edge_b1));
  Tensor out = affine(hidden, params.edge_w2, params.edge_b2);  // n1^2 x 1
  return ad::reshape(out, {n1, n1});
}

TransitionMatrix transition_probs(const Tensor& scores,
                                  const std::vector<std::uint8_t>& neighbor_mask) {
  const std::size_t n1 = scores.rows();
  if (scores.cols() != n1) {
    throw std::invalid_argument("transition_probs: scores not square " +
                                ad::shape_str(scores.shape()));
  }
  if (neighbor_mask.size() != n1 * n1) {
    throw std::invalid_argument("transition_probs: mask size " +
                                std::to_string(neighbor_mask.size()) + " for " +
                                std::to_string(n1) + " nodes");
  }
  for (std::size_t i = 0; i < n1; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < n1 && !any; ++j) any = neighbor_mask[i * n1 + j];
    if (!any) {
      throw std::invalid_argument("transition_probs: node " + std::to_string(i) +
                                  " has no neighbors");
    }
  }
  TransitionMatrix t;
  t.p = ad::masked_row_softmax(scores, neighbor_mask);
  t.neighbor_mask = neighbor_mask;
  t.n_nodes = n1;
  return t;
}

namespace {

void check_step(const TransitionMatrix& t, std::size_t from, std::size_t to) {
  if (from >= t.n_nodes || to >= t.n_nodes) {
    throw std::invalid_argument("path: node index out of range");
  }
  if (!t.neighbor_mask[from * t.n_nodes + to]) {
    throw std::invalid_argument("path: step " + std::to_string(from) + "->" +
                                std::to_string(to) + " is not a neighbor edge");
  }
}

}  // namespace

double path_probability(const std::vector<std::size_t>& nodes,
                        const TransitionMatrix& t) {
  if (nodes.empty()) throw std::invalid_argument("path: empty node sequence");
  double logp = 0.0;
  for (std::size_t s = 0; s + 1 < nodes.size(); ++s) {
    check_step(t, nodes[s], nodes[s + 1]);
    logp += std::log(t.p.values()[nodes[s] * t.n_nodes + nodes[s + 1]]);
  }
  return std::exp(logp);
}

Tensor path_log_prob(const std::vector<std::size_t>& nodes,
                     const TransitionMatrix& t) {
  if (nodes.empty()) throw std::invalid_argument("path: empty node sequence");
  if (nodes.size() == 1) return Tensor::constant({1}, {0.0});
  std::vector<std::size_t> flat_idx;
  flat_idx.reserve(nodes.size() - 1);
  for (std::size_t s = 0; s + 1 < nodes.size(); ++s) {
    check_step(t, nodes[s], nodes[s + 1]);
    flat_idx.push_back(nodes[s] * t.n_nodes + nodes[s + 1]);
  }
  // clamp before log: a step probability can underflow to exactly 0 on very
  // sharp rows, and 1/0 would poison the backward pass (the composed gradient
  // is bounded for any positive p, so the floor only disarms the fp hazard).
  Tensor flat = ad::reshape(t.p, {t.n_nodes * t.n_nodes});
  return ad::sum(ad::log(ad::clamp_min(ad::rows(flat, flat_idx), 1e-12)));
}

BeamSet beam_search_paths(const TransitionMatrix& t, std::size_t width,
                          std::size_t max_len) {
  if (width < 1) throw std::invalid_argument("beam: width must be >= 1");
  if (max_len < 1) throw std::invalid_argument("beam: max_len must be >= 1");
  const std::size_t n1 = t.n_nodes;
  const std::size_t target_nodes = std::min(max_len + 1, n1);
  const auto& pv = t.p.values();

  struct Cand {
    std::vector<std::size_t> nodes;
    double logp;
  };
  std::vector<Cand> beam = {{{0}, 0.0}};
  for (std::size_t len = 1; len < target_nodes; ++len) {
    std::vector<Cand> expanded;
    for (const auto& cand : beam) {
      const std::size_t last = cand.nodes.back();
      for (std::size_t j = 0; j < n1; ++j) {
        if (!t.neighbor_mask[last * n1 + j]) continue;
        if (std::find(cand.nodes.begin(), cand.nodes.end(), j) !=
            cand.nodes.end())
          continue;  // no revisits
        Cand next = cand;
        next.nodes.push_back(j);
        next.logp += std::log(pv[last * n1 + j]);
        expanded.push_back(std::move(next));
      }
    }
    if (expanded.empty()) break;  // nothing can grow further
    std::sort(expanded.begin(), expanded.end(), [](const Cand& a, const Cand& b) {
      if (a.logp != b.logp) return a.logp > b.logp;
      return a.nodes < b.nodes;  // ties toward the smaller node sequence
    });
    if (expanded.size() > width) expanded.resize(width);
    beam = std::move(expanded);
  }

  BeamSet out;
  out.width = width;
  out.paths.reserve(beam.size());
  for (auto& cand : beam) {
    ReasoningPath p;
    p.nodes = std::move(cand.nodes);
    p.log_prob = cand.logp;
    p.prob = std::exp(cand.logp);
    out.paths.push_back(std::move(p));
  }
  return out;
}

Tensor encode_path(const std::vector<std::size_t>& nodes, const Tensor& node_reps,
                   const Tensor& x_g, const WalkParams& params) {
  if (nodes.empty()) throw std::invalid_argument("encode_path: empty path");
  Tensor h = x_g;
  Tensor c = x_g;
  for (std::size_t idx : nodes) {
    Tensor x = ad::rows(node_reps, {idx});
    Tensor gi = ad::sigmoid(ad::add(
        ad::add(ad::matmul(x, params.lstm_wx_i), ad::matmul(h, params.lstm_wh_i)),
        params.lstm_b_i));
    Tensor gf = ad::sigmoid(ad::add(
        ad::add(ad::matmul(x, params.lstm_wx_f), ad::matmul(h, params.lstm_wh_f)),
        params.lstm_b_f));
    Tensor go = ad::sigmoid(ad::add(
        ad::add(ad::matmul(x, params.lstm_wx_o), ad::matmul(h, params.lstm_wh_o)),
        params.lstm_b_o));
    Tensor gc = ad::tanh(ad::add(
        ad::add(ad::matmul(x, params.lstm_wx_c), ad::matmul(h, params.lstm_wh_c)),
        params.lstm_b_c));
    c = ad::add(ad::mul(gf, c), ad::mul(gi, gc));
    h = ad::mul(go, ad::tanh(c));
  }
  return h;
}

Tensor graph_summary(const Tensor& node_reps, const WalkParams& params) {
  const std::size_t n1 = node_reps.rows();
  const std::size_t d = node_reps.cols();
  if (n1 == 1) return Tensor::zeros({1, d});
  std::vector<std::size_t> claim_idx(n1 - 1, 0);
  std::vector<std::size_t> ev_idx(n1 - 1);
  for (std::size_t i = 1; i < n1; ++i) ev_idx[i - 1] = i;
  Tensor ev = ad::rows(node_reps, ev_idx);
  Tensor cat = ad::concat({ad::rows(node_reps, claim_idx), ev}, 1);  // n x 2d
  Tensor hidden = ad::tanh(affine(cat, params.attn_w1, params.attn_b1));
  Tensor scores = affine(hidden, params.attn_w2, params.attn_b2);  // n x 1
  Tensor alpha = ad::row_softmax(ad::transpose(scores));           // 1 x n
  return ad::matmul(alpha, ev);                                    // 1 x d
}

Tensor ConfounderDictionary::class_centers(std::size_t label) const {
  if (label >= n_classes) {
    throw std::invalid_argument("dictionary: class " + std::to_string(label) +
                                " out of range");
  }
  std::vector<double> v(centers.begin() + static_cast<std::ptrdiff_t>(label * k * d),
                        centers.begin() +
                            static_cast<std::ptrdiff_t>((label + 1) * k * d));
  return Tensor::constant({k, d}, std::move(v));
}

void ConfounderDictionary::validate() const {
  if (n_classes == 0 || k == 0 || d == 0 ||
      centers.size() != n_classes * k * d) {
    throw std::invalid_argument("dictionary: inconsistent sizes");
  }
  for (double v : centers) {
    if (!std::isfinite(v))
      throw std::invalid_argument("dictionary: non-finite center");
  }
}

ConfounderDictionary init_confounder_dictionary(
    const std::vector<ClaimEvidenceGraph>& graphs, const WalkParams& params,
    const ModelConfig& config, std::mt19937_64& rng) {
  config.validate();
  std::vector<std::vector<std::vector<double>>> by_class(config.n_classes);
  for (const auto& g : graphs) {
    if (g.label < 0 || static_cast<std::size_t>(g.label) >= config.n_classes) {
      throw std::invalid_argument(
          "dictionary init: training graph without a valid label");
    }
    Tensor h = gconv_forward(g, params.gconv, config.gconv);
    by_class[static_cast<std::size_t>(g.label)].push_back(
        graph_summary(h, params).values());
  }
  ConfounderDictionary dict;
  dict.n_classes = config.n_classes;
  dict.k = config.dict_k;
  dict.d = config.d();
  dict.centers.reserve(dict.n_classes * dict.k * dict.d);
  for (std::size_t c = 0; c < config.n_classes; ++c) {
    if (by_class[c].size() < config.dict_k) {
      throw std::invalid_argument(
          "dictionary init: class " + label_name(static_cast<int>(c)) + " has " +
          std::to_string(by_class[c].size()) + " graphs, needs >= " +
          std::to_string(config.dict_k));
    }
    auto km = kmeans(by_class[c], config.dict_k, rng);
    for (const auto& center : km.centers)
      dict.centers.insert(dict.centers.end(), center.begin(), center.end());
  }
  dict.frozen = true;
  return dict;
}

Tensor path_only_classify(const Tensor& x_r, const WalkParams& params) {
  return ad::row_softmax(affine(x_r, params.cls_w, params.cls_b));
}

Tensor expected_graph_rep(const Tensor& x_r, const Tensor& l_r,
                          const ConfounderDictionary& dict,
                          const WalkParams& params) {
  dict.validate();
  if (!dict.frozen) {
    throw std::logic_error("expected_graph_rep: dictionary is not frozen");
  }
  Tensor q = ad::matmul(x_r, params.w_q);  // 1 x d
  std::vector<Tensor> zprimes;
  zprimes.reserve(dict.n_classes);
  for (std::size_t c = 0; c < dict.n_classes; ++c) {
    Tensor z = dict.class_centers(c);                       // k x d
    Tensor keys = ad::matmul(z, params.w_k);                // k x d
    Tensor attn = ad::row_softmax(ad::matmul(q, ad::transpose(keys)));  // 1 x k
    zprimes.push_back(ad::matmul(attn, z));                 // 1 x d
  }
  Tensor dprime = ad::concat(zprimes, 0);  // N x d
  return ad::scalar_mul(ad::matmul(l_r, dprime),
                        1.0 / static_cast<double>(dict.n_classes));
}

Tensor intervene(const Tensor& x_r, const Tensor& e_g, const WalkParams& params,
                 double alpha) {
  Tensor logits = ad::add(ad::matmul(x_r, params.w_r),
                          ad::scalar_mul(ad::matmul(e_g, params.w_g), alpha));
  return ad::row_softmax(logits);
}

ModelOutput forward_causal(const ClaimEvidenceGraph& graph,
                           const WalkParams& params,
                           const ConfounderDictionary& dict,
                           const ModelConfig& config) {
  config.validate();
  Tensor h = gconv_forward(graph, params.gconv, config.gconv);
  Tensor x_g = graph_summary(h, params);
  const std::size_t n1 = graph.n_nodes();

  ModelOutput out;
  std::vector<ReasoningPath> paths;
  std::vector<Tensor> logps;
  if (n1 == 1) {
    // No transitions exist; the only reasoning path is the claim itself.
    paths.push_back({{0}, 0.0, 1.0});
    logps.push_back(Tensor::constant({1}, {0.0}));
  } else {
    std::vector<std::uint8_t> mask(n1 * n1, 0);
    const auto& a = graph.A.values();
    for (std::size_t i = 0; i < n1 * n1; ++i) mask[i] = a[i] != 0.0 ? 1 : 0;
    out.transition = transition_probs(edge_scores(h, params), mask);
    BeamSet beam = beam_search_paths(out.transition, config.beam_width,
                                     config.max_path_len);
    for (auto& p : beam.paths) {
      logps.push_back(path_log_prob(p.nodes, out.transition));
      paths.push_back(std::move(p));
    }
  }

  std::vector<Tensor> ivs, lrs;
  out.per_path.reserve(paths.size());
  for (const auto& p : paths) {
    PathResult res;
    res.path = p;
    res.x_r = encode_path(p.nodes, h, x_g, params);
    res.l_r = path_only_classify(res.x_r, params);
    Tensor e_g = expected_graph_rep(res.x_r, res.l_r, dict, params);
    res.intervened = intervene(res.x_r, e_g, params, config.alpha);
    ivs.push_back(res.intervened);
    lrs.push_back(res.l_r);
    out.per_path.push_back(std::move(res));
  }

  Tensor logits = ad::reshape(ad::concat(logps, 0), {1, paths.size()});
  out.beam_weights = ad::row_softmax(logits);  // walk probs renormalized
  out.l_causal = ad::matmul(out.beam_weights, ad::concat(ivs, 0));
  out.l_pred = ad::matmul(out.beam_weights, ad::concat(lrs, 0));
  return out;
}

Losses compute_losses(const ModelOutput& output, int gold_label,
                      std::size_t n_classes) {
  if (gold_label < 0 || static_cast<std::size_t>(gold_label) >= n_classes) {
    throw std::invalid_argument("losses: gold label " +
                                std::to_string(gold_label) + " for " +
                                std::to_string(n_classes) + " classes");
  }
  const auto idx = static_cast<std::size_t>(gold_label);
  auto pick_nll = [&](const Tensor& dist) {
    Tensor flat = ad::reshape(dist, {n_classes});
    Tensor p = ad::clamp_min(ad::rows(flat, {idx}), 1e-12);
    return ad::scalar_mul(ad::log(p), -1.0);
  };
  Losses l;
  l.causal = pick_nll(output.l_causal);
  l.walk = pick_nll(output.l_pred);
  l.total = ad::add(l.causal, l.walk);
  return l;
}

namespace {

const char* normalization_name(GconvConfig::Normalization n) {
  switch (n) {
    case GconvConfig::Normalization::kSymmetric: return "symmetric";
    case GconvConfig::Normalization::kRow: return "row";
    case GconvConfig::Normalization::kNone: return "none";
  }
  return "?";
}

GconvConfig::Normalization parse_normalization(const std::string& s) {
  if (s == "symmetric") return GconvConfig::Normalization::kSymmetric;
  if (s == "row") return GconvConfig::Normalization::kRow;
  if (s == "none") return GconvConfig::Normalization::kNone;
  throw std::runtime_error("checkpoint: unknown normalization '" + s + "'");
}

}  // namespace

void save_checkpoint(std::ostream& out, const ModelConfig& config,
                     const WalkParams& params, const ConfounderDictionary& dict) {
  config.validate();
  dict.validate();
  out.precision(17);
  out << "causalwalk-ckpt v1\n";
  out << "config feature_dim " << config.featurizer.dim << "\n";
  out << "config ngram_orders";
  for (int k : config.featurizer.ngram_orders) out << " " << k;
  out << "\n";
  out << "config hash_seed " << config.featurizer.hash_seed << "\n";
  out << "config lowercase " << (config.featurizer.lowercase ? 1 : 0) << "\n";
  out << "config layers " << config.gconv.layers << "\n";
  out << "config hidden_dim " << config.gconv.hidden_dim << "\n";
  out << "config self_loops " << (config.gconv.self_loops ? 1 : 0) << "\n";
  out << "config normalization "
      << normalization_name(config.gconv.degree_normalization) << "\n";
  out << "config n_classes " << config.n_classes << "\n";
  out << "config beam_width " << config.beam_width << "\n";
  out << "config max_path_len " << config.max_path_len << "\n";
  out << "config dict_k " << config.dict_k << "\n";
  out << "config alpha " << config.alpha << "\n";
  out << "dict " << dict.n_classes << " " << dict.k << " " << dict.d << "\n";
  for (std::size_t row = 0; row < dict.n_classes * dict.k; ++row) {
    for (std::size_t j = 0; j < dict.d; ++j) {
      if (j) out << " ";
      out << dict.centers[row * dict.d + j];
    }
    out << "\n";
  }
  for (const auto& [name, tensor] : params.entries()) {
    out << "param " << name << " " << tensor->shape().size();
    for (std::size_t dim : tensor->shape()) out << " " << dim;
    out << "\n";
    const auto& v = tensor->values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out << " ";
      out << v[i];
    }
    out << "\n";
  }
  out << "end\n";
}

Checkpoint load_checkpoint(std::istream& in) {
  auto fail = [](const std::string& what) -> void {
    throw std::runtime_error("checkpoint: " + what);
  };
  std::string word, version;
  if (!(in >> word >> version) || word != "causalwalk-ckpt" || version != "v1")
    fail("missing 'causalwalk-ckpt v1' header");

  Checkpoint ck;
  ModelConfig& cfg = ck.config;
  // config lines until the dict record
  while (in >> word) {
    if (word == "dict") break;
    if (word != "config") fail("expected 'config' or 'dict', got '" + word + "'");
    std::string key;
    if (!(in >> key)) fail("truncated config line");
    if (key == "feature_dim") {
      in >> cfg.featurizer.dim;
    } else if (key == "ngram_orders") {
      cfg.featurizer.ngram_orders.clear();
      // integers to end of line
      std::string rest;
      std::getline(in, rest);
      std::istringstream line(rest);
      int v;
      while (line >> v) cfg.featurizer.ngram_orders.push_back(v);
    } else if (key == "hash_seed") {
      in >> cfg.featurizer.hash_seed;
    } else if (key == "lowercase") {
      int v;
      in >> v;
      cfg.featurizer.lowercase = v != 0;
    } else if (key == "layers") {
      in >> cfg.gconv.layers;
    } else if (key == "hidden_dim") {
      in >> cfg.gconv.hidden_dim;
    } else if (key == "self_loops") {
      int v;
      in >> v;
      cfg.gconv.self_loops = v != 0;
    } else if (key == "normalization") {
      std::string v;
      in >> v;
      cfg.gconv.degree_normalization = parse_normalization(v);
    } else if (key == "n_classes") {
      in >> cfg.n_classes;
    } else if (key == "beam_width") {
      in >> cfg.beam_width;
    } else if (key == "max_path_len") {
      in >> cfg.max_path_len;
    } else if (key == "dict_k") {
      in >> cfg.dict_k;
    } else if (key == "alpha") {
      in >> cfg.alpha;
    } else {
      fail("unknown config key '" + key + "'");
    }
    if (!in) fail("bad value for config key '" + key + "'");
  }
  if (word != "dict") fail("missing dict record");
  cfg.validate();

  ConfounderDictionary& dict = ck.dict;
  if (!(in >> dict.n_classes >> dict.k >> dict.d)) fail("bad dict sizes");
  dict.centers.resize(dict.n_classes * dict.k * dict.d);
  for (double& v : dict.centers) {
    if (!(in >> v)) fail("truncated dictionary");
  }
  dict.frozen = true;
  dict.validate();

  std::mt19937_64 scratch_rng(0);
  ck.params = WalkParams::init(cfg, scratch_rng);
  auto entries = ck.params.entries();
  std::map<std::string, Tensor*> by_name(entries.begin(), entries.end());
  std::size_t loaded = 0;
  while (in >> word) {
    if (word == "end") break;
    if (word != "param") fail("expected 'param' or 'end', got '" + word + "'");
    std::string name;
    std::size_t rank;
    if (!(in >> name >> rank)) fail("truncated param header");
    ad::Shape shape(rank);
    for (auto& dim : shape) {
      if (!(in >> dim)) fail("truncated shape for param '" + name + "'");
    }
    auto it = by_name.find(name);
    if (it == by_name.end()) fail("unknown param '" + name + "'");
    if (it->second->shape() != shape) {
      fail("param '" + name + "' has shape " + ad::shape_str(shape) +
           ", expected " + ad::shape_str(it->second->shape()));
    }
    for (double& v : it->second->mutable_values()) {
      if (!(in >> v)) fail("truncated values for param '" + name + "'");
    }
    ++loaded;
  }
  if (word != "end") fail("missing 'end' marker");
  if (loaded != by_name.size()) {
    fail("checkpoint holds " + std::to_string(loaded) + " params, model needs " +
         std::to_string(by_name.size()));
  }
  return ck;
}

}  // namespace causalwalk
