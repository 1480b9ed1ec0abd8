#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "causalwalk/model.hpp"

using namespace causalwalk;
using ad::Shape;
using ad::Tensor;

namespace {

// Small config used everywhere: F=16, d=4, 2 classes, k=2.
ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.featurizer.dim = 16;
  cfg.gconv.layers = 2;
  cfg.gconv.hidden_dim = 4;
  cfg.n_classes = 2;
  cfg.beam_width = 3;
  cfg.max_path_len = 5;
  cfg.dict_k = 2;
  cfg.alpha = 0.1;
  return cfg;
}

std::vector<double> random_values(std::mt19937_64& rng, std::size_t n,
                                  double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

Tensor random_reps(std::mt19937_64& rng, std::size_t n1, std::size_t d) {
  return Tensor::param({n1, d}, random_values(rng, n1 * d));
}

std::vector<std::uint8_t> full_mask(std::size_t n1) {
  std::vector<std::uint8_t> m(n1 * n1, 1);
  for (std::size_t i = 0; i < n1; ++i) m[i * n1 + i] = 0;
  return m;
}

// A transition matrix with prescribed row probabilities (log scores).
TransitionMatrix fixed_transition(const std::vector<double>& probs,
                                  std::size_t n1) {
  std::vector<double> scores(n1 * n1, 0.0);
  std::vector<std::uint8_t> mask(n1 * n1, 0);
  for (std::size_t i = 0; i < n1 * n1; ++i) {
    if (probs[i] > 0.0) {
      scores[i] = std::log(probs[i]);
      mask[i] = 1;
    }
  }
  return transition_probs(Tensor::constant({n1, n1}, scores), mask);
}

// All no-revisit paths from node 0 with exactly `len` nodes.
void enumerate_paths(const TransitionMatrix& t, std::size_t len,
                     std::vector<std::size_t>& cur,
                     std::vector<std::vector<std::size_t>>& out) {
  if (cur.size() == len) {
    out.push_back(cur);
    return;
  }
  const std::size_t last = cur.back();
  for (std::size_t j = 0; j < t.n_nodes; ++j) {
    if (!t.neighbor_mask[last * t.n_nodes + j]) continue;
    if (std::find(cur.begin(), cur.end(), j) != cur.end()) continue;
    cur.push_back(j);
    enumerate_paths(t, len, cur, out);
    cur.pop_back();
  }
}

WalkParams make_params(const ModelConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return WalkParams::init(cfg, rng);
}

ConfounderDictionary make_dict(const ModelConfig& cfg, std::uint64_t seed) {
  ConfounderDictionary dict;
  dict.n_classes = cfg.n_classes;
  dict.k = cfg.dict_k;
  dict.d = cfg.d();
  std::mt19937_64 rng(seed);
  dict.centers = random_values(rng, dict.n_classes * dict.k * dict.d);
  dict.frozen = true;
  return dict;
}

ClaimEvidenceGraph demo_graph(const ModelConfig& cfg,
                              std::size_t n_evidence) {
  std::vector<std::string> ev;
  for (std::size_t i = 0; i < n_evidence; ++i)
    ev.push_back("evidence item number " + std::to_string(i) + " mentions fact");
  return build_graph("the claim under test", ev, cfg.featurizer);
}

}  // namespace

TEST_CASE("edge_scores: zero features and zero biases give a zero matrix") {
  auto cfg = tiny_config();
  auto params = make_params(cfg, 1);  // biases start at zero
  Tensor reps = Tensor::constant({3, 4}, std::vector<double>(12, 0.0));
  auto a = edge_scores(reps, params);
  CHECK(a.shape() == Shape{3, 3});
  for (double v : a.values()) CHECK(v == 0.0);
}

TEST_CASE("edge_scores: generically asymmetric") {
  auto cfg = tiny_config();
  auto params = make_params(cfg, 2);
  std::mt19937_64 rng(7);
  int unequal = 0;
  for (int t = 0; t < 100; ++t) {
    auto a = edge_scores(random_reps(rng, 3, 4), params);
    if (a.values()[0 * 3 + 1] != a.values()[1 * 3 + 0]) ++unequal;
  }
  CHECK(unequal >= 95);
}

TEST_CASE("edge_scores: 2-node hand arithmetic") {
  auto cfg = tiny_config();
  auto params = make_params(cfg, 3);
  std::mt19937_64 rng(11);
  // overwrite with small hand-audited weights
  params.edge_w1 = Tensor::param({12, 4}, random_values(rng, 48, -0.3, 0.3));
  params.edge_b1 = Tensor::param({1, 4}, {0.01, -0.02, 0.03, -0.04});
  params.edge_w2 = Tensor::param({4, 1}, {0.2, -0.1, 0.4, 0.3});
  params.edge_b2 = Tensor::param({1, 1}, {0.05});
  Tensor reps = Tensor::constant({2, 4}, random_values(rng, 8));
  auto a = edge_scores(reps, params);
  const auto& x = reps.values();
  const auto& w1 = params.edge_w1.values();
  const auto& b1 = params.edge_b1.values();
  const auto& w2 = params.edge_w2.values();
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      double cat[12];
      for (std::size_t c = 0; c < 4; ++c) {
        cat[c] = x[i * 4 + c];
        cat[4 + c] = x[j * 4 + c];
        cat[8 + c] = x[0 * 4 + c];  // claim node
      }
      double expect = 0.05;
      for (std::size_t hcol = 0; hcol < 4; ++hcol) {
        double pre = b1[hcol];
        for (std::size_t r = 0; r < 12; ++r) pre += cat[r] * w1[r * 4 + hcol];
        expect += std::tanh(pre) * w2[hcol];
      }
      CHECK(std::abs(a.values()[i * 2 + j] - expect) < 1e-12);
    }
  }
}

TEST_CASE("transition_probs: analytic rows and the independent softmax oracle") {
  {
    auto t = transition_probs(Tensor::constant({2, 2}, {0, 0, 0, 0}), full_mask(2));
    CHECK(t.p.values()[1] == 1.0);  // single neighbor
    CHECK(t.p.values()[2] == 1.0);
  }
  {
    std::vector<std::uint8_t> mask = {0, 1, 1, 1, 0, 1, 1, 1, 0};
    auto t = transition_probs(
        Tensor::constant({3, 3}, {0, std::log(2.0), 0, 0, 0, 0, 0, 0, 0}), mask);
    CHECK(t.p.values()[1] == doctest::Approx(2.0 / 3).epsilon(1e-12));
    CHECK(t.p.values()[2] == doctest::Approx(1.0 / 3).epsilon(1e-12));
  }
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    auto scores = random_values(rng, 16, -3.0, 3.0);
    auto t = transition_probs(Tensor::constant({4, 4}, scores), full_mask(4));
    for (std::size_t i = 0; i < 4; ++i) {
      double rowsum = 0.0, z = 0.0;
      for (std::size_t j = 0; j < 4; ++j)
        if (i != j) z += std::exp(scores[i * 4 + j]);
      for (std::size_t j = 0; j < 4; ++j) {
        const double got = t.p.values()[i * 4 + j];
        rowsum += got;
        const double want = i == j ? 0.0 : std::exp(scores[i * 4 + j]) / z;
        CHECK(std::abs(got - want) < 1e-12);
      }
      CHECK(std::abs(rowsum - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("transition_probs: isolated node is an error") {
  CHECK_THROWS_WITH_AS(
      transition_probs(Tensor::constant({1, 1}, {0.0}), {0}),
      "transition_probs: node 0 has no neighbors", std::invalid_argument);
}

TEST_CASE("path_probability: empty product, two steps, and enumeration oracle") {
  auto t = fixed_transition({0.0, 0.5, 0.5,
                             0.5, 0.0, 0.5,
                             0.5, 0.5, 0.0}, 3);
  CHECK(path_probability({0}, t) == 1.0);
  CHECK(path_probability({0, 1, 2}, t) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK_THROWS_AS(path_probability({0, 0}, t), std::invalid_argument);

  std::mt19937_64 rng(17);
  auto scores = random_values(rng, 25, -2.0, 2.0);
  auto rt = transition_probs(Tensor::constant({5, 5}, scores), full_mask(5));
  std::vector<std::size_t> cur = {0};
  std::vector<std::vector<std::size_t>> all;
  enumerate_paths(rt, 4, cur, all);
  CHECK(all.size() == 24);  // 4 * 3 * 2 continuations
  for (const auto& p : all) {
    double direct = 1.0;
    for (std::size_t s = 0; s + 1 < p.size(); ++s)
      direct *= rt.p.values()[p[s] * 5 + p[s + 1]];
    CHECK(std::abs(path_probability(p, rt) - direct) < 1e-12);
  }
}

TEST_CASE("path_log_prob matches the value computation and carries gradient") {
  std::mt19937_64 rng(19);
  Tensor scores = Tensor::param({4, 4}, random_values(rng, 16));
  auto t = transition_probs(scores, full_mask(4));
  const std::vector<std::size_t> path = {0, 2, 1, 3};
  CHECK(std::abs(std::exp(path_log_prob(path, t).item()) -
                 path_probability(path, t)) < 1e-15);
  auto err = ad::grad_check(
      [&](const Tensor& s) {
        auto tt = transition_probs(s, full_mask(4));
        return path_log_prob(path, tt);
      },
      scores, 1e-5);
  CHECK(err < 1e-4);
}

TEST_CASE("beam: two-node graph forces the single unit-probability path") {
  auto t = transition_probs(Tensor::constant({2, 2}, {0, 7, -3, 0}), full_mask(2));
  auto beam = beam_search_paths(t, 3, 5);
  REQUIRE(beam.paths.size() == 1);
  CHECK(beam.paths[0].nodes == std::vector<std::size_t>{0, 1});
  CHECK(beam.paths[0].prob == 1.0);
}

TEST_CASE("beam: wide beam equals exhaustive enumeration, identical order") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    auto scores = random_values(rng, 16, -2.0, 2.0);
    auto t = transition_probs(Tensor::constant({4, 4}, scores), full_mask(4));
    auto beam = beam_search_paths(t, 50, 3);

    std::vector<std::size_t> cur = {0};
    std::vector<std::vector<std::size_t>> all;
    enumerate_paths(t, 4, cur, all);  // m_max=3 on 4 nodes -> full length 4
    struct Entry {
      std::vector<std::size_t> nodes;
      double prob;
    };
    std::vector<Entry> expect;
    for (auto& p : all) expect.push_back({p, path_probability(p, t)});
    std::sort(expect.begin(), expect.end(), [](const Entry& a, const Entry& b) {
      if (a.prob != b.prob) return a.prob > b.prob;
      return a.nodes < b.nodes;
    });
    REQUIRE(beam.paths.size() == expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i) {
      CHECK(beam.paths[i].nodes == expect[i].nodes);
      CHECK(std::abs(beam.paths[i].prob - expect[i].prob) < 1e-12);
    }
    for (std::size_t i = 1; i < beam.paths.size(); ++i)
      CHECK(beam.paths[i].log_prob <= beam.paths[i - 1].log_prob);
  }
}

TEST_CASE("beam: width 1 is the greedy no-revisit walker") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    auto scores = random_values(rng, 36, -2.0, 2.0);
    auto t = transition_probs(Tensor::constant({6, 6}, scores), full_mask(6));
    auto beam = beam_search_paths(t, 1, 4);
    REQUIRE(beam.paths.size() == 1);

    // hand-rolled greedy walker: stepwise argmax over unvisited neighbors
    std::vector<std::size_t> greedy = {0};
    for (int step = 0; step < 4; ++step) {
      const std::size_t last = greedy.back();
      double best = -1.0;
      std::size_t arg = 0;
      bool found = false;
      for (std::size_t j = 0; j < 6; ++j) {
        if (!t.neighbor_mask[last * 6 + j]) continue;
        if (std::find(greedy.begin(), greedy.end(), j) != greedy.end()) continue;
        const double p = t.p.values()[last * 6 + j];
        if (p > best) {
          best = p;
          arg = j;
          found = true;
        }
      }
      if (!found) break;
      greedy.push_back(arg);
    }
    CHECK(beam.paths[0].nodes == greedy);
  }
}

TEST_CASE("encode_path: zero weights and zero start state give zero output") {
  auto cfg = tiny_config();
  WalkParams params = make_params(cfg, 31);
  for (auto& [name, t] : params.entries()) {
    if (name.rfind("lstm_", 0) == 0) {
      std::fill(t->mutable_values().begin(), t->mutable_values().end(), 0.0);
    }
  }
  std::mt19937_64 rng(31);
  Tensor reps = random_reps(rng, 4, 4);
  Tensor xg = Tensor::constant({1, 4}, {0, 0, 0, 0});
  auto xr = encode_path({0, 2, 3}, reps, xg, params);
  for (double v : xr.values()) CHECK(v == 0.0);
}

TEST_CASE("encode_path: different paths give different encodings generically") {
  auto cfg = tiny_config();
  std::mt19937_64 rng(37);
  int unequal = 0;
  for (int t = 0; t < 100; ++t) {
    auto params = make_params(cfg, 1000 + t);
    Tensor reps = random_reps(rng, 3, 4);
    Tensor xg = Tensor::constant({1, 4}, random_values(rng, 4));
    auto a = encode_path({0}, reps, xg, params);
    auto b = encode_path({0, 1}, reps, xg, params);
    if (a.values() != b.values()) ++unequal;
  }
  CHECK(unequal >= 95);
}

TEST_CASE("encode_path: gradient check") {
  auto cfg = tiny_config();
  auto params = make_params(cfg, 41);
  std::mt19937_64 rng(41);
  Tensor reps = random_reps(rng, 4, 4);
  Tensor xg = Tensor::param({1, 4}, random_values(rng, 4));
  const std::vector<std::size_t> path = {0, 3, 1};
  CHECK(ad::grad_check(
            [&](const Tensor& r) {
              return ad::sum(encode_path(path, r, xg, params));
            },
            reps, 1e-5) < 1e-4);
  CHECK(ad::grad_check(
            [&](const Tensor& g) {
              return ad::mean(encode_path(path, reps, g, params));
            },
            xg, 1e-5) < 1e-4);
  CHECK(ad::grad_check(
            [&](const Tensor&) {
              return ad::sum(encode_path(path, reps, xg, params));
            },
            params.lstm_wh_c, 1e-5) < 1e-4);
}

TEST_CASE("graph_summary: singleton, identical reps, and the direct formula") {
  auto cfg = tiny_config();
  auto params = make_params(cfg, 43);
  std::mt19937_64 rng(43);
  {
    Tensor reps = random_reps(rng, 2, 4);  // claim + one evidence
    auto xg = graph_summary(reps, params);
    for (std::size_t j = 0; j < 4; ++j)
      CHECK(xg.values()[j] == doctest::Approx(reps.values()[4 + j]).epsilon(1e-15));
  }
  {
    auto row = random_values(rng, 4);
    std::vector<double> v = random_values(rng, 4);
    for (int i = 0; i < 3; ++i) v.insert(v.end(), row.begin(), row.end());
    Tensor reps = Tensor::constant({4, 4}, v);
    auto xg = graph_summary(reps, params);
    for (std::size_t j = 0; j < 4; ++j)
      CHECK(std::abs(xg.values()[j] - row[j]) < 1e-12);
  }
  {
    Tensor reps = random_reps(rng, 4, 4);
    auto xg = graph_summary(reps, params);
    // independent evaluation
    const auto& x = reps.values();
    double scores[3];
    for (std::size_t i = 1; i <= 3; ++i) {
      double cat[8];
      for (std::size_t c = 0; c < 4; ++c) {
        cat[c] = x[c];
        cat[4 + c] = x[i * 4 + c];
      }
      double out = params.attn_b2.values()[0];
      for (std::size_t hcol = 0; hcol < 4; ++hcol) {
        double pre = params.attn_b1.values()[hcol];
        for (std::size_t r = 0; r < 8; ++r)
          pre += cat[r] * params.attn_w1.values()[r * 4 + hcol];
        out += std::tanh(pre) * params.attn_w2.values()[hcol];
      }
      scores[i - 1] = out;
    }
    double z = 0.0;
    const double mx = std::max({scores[0], scores[1], scores[2]});
    for (double s : scores) z += std::exp(s - mx);
    for (std::size_t j = 0; j < 4; ++j) {
      double want = 0.0;
      for (std::size_t i = 1; i <= 3; ++i)
        want += std::exp(scores[i - 1] - mx) / z * x[i * 4 + j];
      CHECK(std::abs(xg.values()[j] - want) < 1e-10);
    }
  }
  {
    Tensor lone = random_reps(rng, 1, 4);
    auto xg = graph_summary(lone, params);
    for (double v : xg.values()) CHECK(v == 0.0);
  }
}

TEST_CASE("dictionary init: exact-k classes, freezing, and the class-size error") {
  auto cfg = tiny_config();
  auto params = make_params(cfg, 47);
  // build graphs whose x_g values are whatever they are; with exactly k
  // distinct graphs per class the centers must equal those x_g values.
  std::vector<ClaimEvidenceGraph> graphs;
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < 2; ++i) {
      auto g = build_graph(
          "claim " + std::to_string(c) + " " + std::to_string(i),
          {"first evidence " + std::to_string(i), "second " + std::to_string(c)},
          cfg.featurizer);
      g.label = c;
      graphs.push_back(std::move(g));
    }
  }
  std::mt19937_64 rng(49);
  auto dict = init_confounder_dictionary(graphs, params, cfg, rng);
  CHECK(dict.frozen);
  CHECK(dict.n_classes == 2);
  CHECK(dict.k == 2);
  CHECK(dict.d == 4);

  for (int c = 0; c < 2; ++c) {
    std::set<std::vector<double>> want;
    for (int i = 0; i < 2; ++i) {
      const auto& g = graphs[static_cast<std::size_t>(c * 2 + i)];
      auto h = gconv_forward(g, params.gconv, cfg.gconv);
      want.insert(graph_summary(h, params).values());
    }
    std::set<std::vector<double>> got;
    auto centers = dict.class_centers(static_cast<std::size_t>(c));
    for (std::size_t s = 0; s < 2; ++s) {
      got.insert(std::vector<double>(centers.values().begin() + 4 * s,
                                     centers.values().begin() + 4 * (s + 1)));
    }
    CHECK(got == want);
  }

  // class 1 short by one graph
  graphs.pop_back();
  std::mt19937_64 rng2(49);
  CHECK_THROWS_WITH_AS(
      init_confounder_dictionary(graphs, params, cfg, rng2),
      "dictionary init: class REFUTES has 1 graphs, needs >= 2",
      std::invalid_argument);
}

TEST_CASE("path_only_classify: uniform at zero weights, analytic logits, oracle") {
  auto cfg = tiny_config();
  cfg.n_classes = 3;
  auto params = make_params(cfg, 53);
  std::fill(params.cls_w.mutable_values().begin(),
            params.cls_w.mutable_values().end(), 0.0);
  std::fill(params.cls_b.mutable_values().begin(),
            params.cls_b.mutable_values().end(), 0.0);
  std::mt19937_64 rng(53);
  Tensor xr = Tensor::constant({1, 4}, random_values(rng, 4));
  auto lr = path_only_classify(xr, params);
  for (double v : lr.values())
    CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-12));

  // hand logits [ln 2, 0, 0] via bias alone
  params.cls_b.mutable_values() = {std::log(2.0), 0.0, 0.0};
  Tensor zero = Tensor::constant({1, 4}, {0, 0, 0, 0});
  auto l2 = path_only_classify(zero, params);
  CHECK(l2.values()[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(l2.values()[1] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(l2.values()[2] == doctest::Approx(0.25).epsilon(1e-12));

  // random affine + softmax oracle
  auto params2 = make_params(cfg, 59);
  Tensor xr2 = Tensor::constant({1, 4}, random_values(rng, 4));
  auto got = path_only_classify(xr2, params2);
  double logits[3];
  for (std::size_t c = 0; c < 3; ++c) {
    logits[c] = params2.cls_b.values()[c];
    for (std::size_t r = 0; r < 4; ++r)
      logits[c] += xr2.values()[r] * params2.cls_w.values()[r * 3 + c];
  }
  const double mx = std::max({logits[0], logits[1], logits[2]});
  double z = 0.0;
  for (double l : logits) z += std::exp(l - mx);
  for (std::size_t c = 0; c < 3; ++c)
    CHECK(std::abs(got.values()[c] - std::exp(logits[c] - mx) / z) < 1e-12);
}

TEST_CASE("expected_graph_rep: one-hot classes, equal centers, direct formula") {
  auto cfg = tiny_config();
  auto params = make_params(cfg, 61);
  auto dict = make_dict(cfg, 61);
  std::mt19937_64 rng(61);
  Tensor xr = Tensor::constant({1, 4}, random_values(rng, 4));

  // independent evaluation of z'_i for each class
  auto zprime = [&](std::size_t cls) {
    std::vector<double> q(4, 0.0);
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t r = 0; r < 4; ++r)
        q[j] += xr.values()[r] * params.w_q.values()[r * 4 + j];
    double scores[2];
    for (std::size_t s = 0; s < 2; ++s) {
      std::vector<double> key(4, 0.0);
      for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t r = 0; r < 4; ++r)
          key[j] += dict.centers[(cls * 2 + s) * 4 + r] *
                    params.w_k.values()[r * 4 + j];
      scores[s] = 0.0;
      for (std::size_t j = 0; j < 4; ++j) scores[s] += q[j] * key[j];
    }
    const double mx = std::max(scores[0], scores[1]);
    const double z = std::exp(scores[0] - mx) + std::exp(scores[1] - mx);
    std::vector<double> zp(4, 0.0);
    for (std::size_t s = 0; s < 2; ++s) {
      const double w = std::exp(scores[s] - mx) / z;
      for (std::size_t j = 0; j < 4; ++j)
        zp[j] += w * dict.centers[(cls * 2 + s) * 4 + j];
    }
    return zp;
  };

  // one-hot l_r on class 1 -> E = z'_1 / N
  auto e1 = expected_graph_rep(xr, Tensor::constant({1, 2}, {0.0, 1.0}), dict,
                               params);
  const auto z1 = zprime(1);
  for (std::size_t j = 0; j < 4; ++j)
    CHECK(std::abs(e1.values()[j] - z1[j] / 2.0) < 1e-10);

  // all centers equal -> E = z / N regardless of weights
  ConfounderDictionary flat = dict;
  const auto zrow = random_values(rng, 4);
  for (std::size_t row = 0; row < 4; ++row)
    std::copy(zrow.begin(), zrow.end(), flat.centers.begin() + 4 * row);
  auto ef = expected_graph_rep(
      xr, Tensor::constant({1, 2}, {0.3, 0.7}), flat, params);
  for (std::size_t j = 0; j < 4; ++j)
    CHECK(std::abs(ef.values()[j] - zrow[j] / 2.0) < 1e-12);

  // generic l_r -> (1/N) sum_i l_r[i] z'_i
  auto eg = expected_graph_rep(
      xr, Tensor::constant({1, 2}, {0.4, 0.6}), dict, params);
  const auto z0 = zprime(0);
  for (std::size_t j = 0; j < 4; ++j) {
    const double want = 0.5 * (0.4 * z0[j] + 0.6 * z1[j]);
    CHECK(std::abs(eg.values()[j] - want) < 1e-10);
  }

  ConfounderDictionary thawed = dict;
  thawed.frozen = false;
  CHECK_THROWS_AS(expected_graph_rep(xr, Tensor::constant({1, 2}, {1.0, 0.0}),
                                     thawed, params),
                  std::logic_error);
}

TEST_CASE("intervene: alpha 0 and W_g 0 reduce exactly; closed form matches") {
  auto cfg = tiny_config();
  auto params = make_params(cfg, 67);
  std::mt19937_64 rng(67);
  Tensor xr = Tensor::constant({1, 4}, random_values(rng, 4));
  Tensor eg = Tensor::constant({1, 4}, random_values(rng, 4));

  auto head_only = ad::row_softmax(ad::matmul(xr, params.w_r));
  CHECK(intervene(xr, eg, params, 0.0).values() == head_only.values());

  auto params_zero_g = make_params(cfg, 67);
  std::fill(params_zero_g.w_g.mutable_values().begin(),
            params_zero_g.w_g.mutable_values().end(), 0.0);
  CHECK(intervene(xr, eg, params_zero_g, 0.37).values() == head_only.values());

  const double alpha = 0.1;
  auto got = intervene(xr, eg, params, alpha);
  double logits[2];
  for (std::size_t c = 0; c < 2; ++c) {
    double a = 0.0, b = 0.0;
    for (std::size_t r = 0; r < 4; ++r) {
      a += xr.values()[r] * params.w_r.values()[r * 2 + c];
      b += eg.values()[r] * params.w_g.values()[r * 2 + c];
    }
    logits[c] = a + alpha * b;
  }
  const double mx = std::max(logits[0], logits[1]);
  const double z = std::exp(logits[0] - mx) + std::exp(logits[1] - mx);
  for (std::size_t c = 0; c < 2; ++c)
    CHECK(std::abs(got.values()[c] - std::exp(logits[c] - mx) / z) < 1e-12);
}

TEST_CASE("forward_causal: singleton beam on a 2-node graph") {
  auto cfg = tiny_config();
  auto params = make_params(cfg, 71);
  auto dict = make_dict(cfg, 71);
  auto g = demo_graph(cfg, 1);
  auto out = forward_causal(g, params, dict, cfg);
  REQUIRE(out.per_path.size() == 1);
  CHECK(out.per_path[0].path.nodes == std::vector<std::size_t>{0, 1});
  CHECK(out.beam_weights.values() == std::vector<double>{1.0});
  CHECK(out.l_causal.values() == out.per_path[0].intervened.values());
  CHECK(out.l_pred.values() == out.per_path[0].l_r.values());
}

TEST_CASE("forward_causal: alpha 0 with classifier tied to W_r collapses heads") {
  auto cfg = tiny_config();
  cfg.alpha = 0.0;
  auto params = make_params(cfg, 73);
  params.cls_w = params.w_r;  // shared storage: classifier == intervention head
  std::fill(params.cls_b.mutable_values().begin(),
            params.cls_b.mutable_values().end(), 0.0);
  auto dict = make_dict(cfg, 73);
  auto g = demo_graph(cfg, 1);  // singleton beam
  auto out = forward_causal(g, params, dict, cfg);
  for (std::size_t c = 0; c < 2; ++c)
    CHECK(out.l_causal.values()[c] ==
          doctest::Approx(out.l_pred.values()[c]).epsilon(1e-15));
}

TEST_CASE("forward_causal: compositional oracle on a 5-node graph") {
  auto cfg = tiny_config();
  auto params = make_params(cfg, 79);
  auto dict = make_dict(cfg, 79);
  auto g = demo_graph(cfg, 4);
  auto out = forward_causal(g, params, dict, cfg);
  REQUIRE(out.per_path.size() == 3);

  // hand-compose from the individually tested sub-operations
  auto h = gconv_forward(g, params.gconv, cfg.gconv);
  auto xg = graph_summary(h, params);
  auto scores = edge_scores(h, params);
  std::vector<std::uint8_t> mask(25, 1);
  for (std::size_t i = 0; i < 5; ++i) mask[i * 5 + i] = 0;
  auto t = transition_probs(scores, mask);
  auto beam = beam_search_paths(t, 3, 5);
  REQUIRE(beam.paths.size() == 3);

  double wsum = 0.0;
  for (const auto& p : beam.paths) wsum += p.prob;
  std::vector<double> causal(2, 0.0), pred(2, 0.0);
  for (std::size_t i = 0; i < beam.paths.size(); ++i) {
    CHECK(beam.paths[i].nodes == out.per_path[i].path.nodes);
    auto xr = encode_path(beam.paths[i].nodes, h, xg, params);
    auto lr = path_only_classify(xr, params);
    auto eg = expected_graph_rep(xr, lr, dict, params);
    auto iv = intervene(xr, eg, params, cfg.alpha);
    const double w = beam.paths[i].prob / wsum;
    for (std::size_t c = 0; c < 2; ++c) {
      causal[c] += w * iv.values()[c];
      pred[c] += w * lr.values()[c];
    }
  }
  for (std::size_t c = 0; c < 2; ++c) {
    CHECK(std::abs(out.l_causal.values()[c] - causal[c]) < 1e-10);
    CHECK(std::abs(out.l_pred.values()[c] - pred[c]) < 1e-10);
  }

  // distribution invariants
  double bw = 0.0;
  for (double v : out.beam_weights.values()) bw += v;
  CHECK(std::abs(bw - 1.0) < 1e-12);
  double cs = 0.0, ps = 0.0;
  for (double v : out.l_causal.values()) cs += v;
  for (double v : out.l_pred.values()) ps += v;
  CHECK(std::abs(cs - 1.0) < 1e-6);
  CHECK(std::abs(ps - 1.0) < 1e-6);
}

TEST_CASE("forward_causal: claim-only graph walks the trivial path") {
  auto cfg = tiny_config();
  auto params = make_params(cfg, 83);
  auto dict = make_dict(cfg, 83);
  auto g = demo_graph(cfg, 0);
  auto out = forward_causal(g, params, dict, cfg);
  REQUIRE(out.per_path.size() == 1);
  CHECK(out.per_path[0].path.nodes == std::vector<std::size_t>{0});
  CHECK(out.beam_weights.values() == std::vector<double>{1.0});
  double cs = 0.0;
  for (double v : out.l_causal.values()) cs += v;
  CHECK(std::abs(cs - 1.0) < 1e-6);
}

TEST_CASE("compute_losses: analytic values and exact total") {
  ModelOutput out;
  out.l_causal = Tensor::constant({1, 3}, {1.0, 0.0, 0.0});
  out.l_pred = Tensor::constant({1, 3}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  auto l = compute_losses(out, 0, 3);
  CHECK(l.causal.item() == 0.0);
  CHECK(l.walk.item() == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(l.total.item() == l.causal.item() + l.walk.item());

  // clamp keeps a zero-probability gold finite
  out.l_causal = Tensor::constant({1, 3}, {0.0, 1.0, 0.0});
  auto l2 = compute_losses(out, 0, 3);
  CHECK(l2.causal.item() == doctest::Approx(-std::log(1e-12)).epsilon(1e-12));
  CHECK_THROWS_AS(compute_losses(out, 3, 3), std::invalid_argument);
  CHECK_THROWS_AS(compute_losses(out, -1, 3), std::invalid_argument);
}

TEST_CASE("full-model gradient check on a random 4-node instance") {
  auto cfg = tiny_config();
  auto params = make_params(cfg, 89);
  auto dict = make_dict(cfg, 89);
  auto g = demo_graph(cfg, 3);
  g.label = 1;

  auto loss_fn = [&](const Tensor&) {
    return compute_losses(forward_causal(g, params, dict, cfg), g.label,
                          cfg.n_classes)
        .total;
  };
  for (auto& [name, tensor] : params.entries()) {
    const double err = ad::grad_check(loss_fn, *tensor, 1e-4);
    INFO("parameter block ", name);
    CHECK(err < 1e-3);
  }
}

TEST_CASE("forward_causal is deterministic") {
  auto cfg = tiny_config();
  auto params = make_params(cfg, 97);
  auto dict = make_dict(cfg, 97);
  auto g = demo_graph(cfg, 4);
  auto a = forward_causal(g, params, dict, cfg);
  auto b = forward_causal(g, params, dict, cfg);
  CHECK(a.l_causal.values() == b.l_causal.values());
  CHECK(a.l_pred.values() == b.l_pred.values());
}

TEST_CASE("checkpoint: save/load round-trips bit-exactly") {
  auto cfg = tiny_config();
  cfg.alpha = 0.1237591873465;
  auto params = make_params(cfg, 101);
  auto dict = make_dict(cfg, 101);
  std::stringstream buf;
  save_checkpoint(buf, cfg, params, dict);
  auto ck = load_checkpoint(buf);

  CHECK(ck.config.featurizer.dim == cfg.featurizer.dim);
  CHECK(ck.config.featurizer.ngram_orders == cfg.featurizer.ngram_orders);
  CHECK(ck.config.featurizer.hash_seed == cfg.featurizer.hash_seed);
  CHECK(ck.config.gconv.layers == cfg.gconv.layers);
  CHECK(ck.config.gconv.hidden_dim == cfg.gconv.hidden_dim);
  CHECK(ck.config.n_classes == cfg.n_classes);
  CHECK(ck.config.beam_width == cfg.beam_width);
  CHECK(ck.config.max_path_len == cfg.max_path_len);
  CHECK(ck.config.dict_k == cfg.dict_k);
  CHECK(ck.config.alpha == cfg.alpha);  // bit-exact through text
  CHECK(ck.dict.centers == dict.centers);
  CHECK(ck.dict.frozen);

  auto a = params.entries();
  auto b = ck.params.entries();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    CHECK(a[i].second->shape() == b[i].second->shape());
    CHECK(a[i].second->values() == b[i].second->values());
  }

  // a second save of the loaded model is byte-identical
  std::stringstream buf2;
  save_checkpoint(buf2, ck.config, ck.params, ck.dict);
  std::stringstream buf3;
  save_checkpoint(buf3, cfg, params, dict);
  CHECK(buf2.str() == buf3.str());
}

TEST_CASE("checkpoint: loader rejects malformed input") {
  std::stringstream bad1("nonsense");
  CHECK_THROWS_AS(load_checkpoint(bad1), std::runtime_error);

  auto cfg = tiny_config();
  auto params = make_params(cfg, 103);
  auto dict = make_dict(cfg, 103);
  std::stringstream buf;
  save_checkpoint(buf, cfg, params, dict);
  std::string text = buf.str();
  std::stringstream bad2(text.substr(0, text.size() * 2 / 3));
  CHECK_THROWS_AS(load_checkpoint(bad2), std::runtime_error);

  std::string renamed = text;
  const auto pos = renamed.find("param w_r");
  renamed.replace(pos, 9, "param w_x");
  std::stringstream bad3(renamed);
  CHECK_THROWS_AS(load_checkpoint(bad3), std::runtime_error);
}
