#pragma once

#include <cstddef>
#include <iosfwd>
#include <random>
#include <vector>

namespace causalwalk::scm {

// Discrete SCM with the fixed shape U -> G, G -> R, (R,U) -> L. R is a pure
// mediator: it never reads U, which is what licenses the front-door formula.
struct DiscreteScm {
  std::size_t nu = 2, ng = 2, nr = 2, nl = 2;  // cardinalities, each in [2,8]
  std::vector<double> p_u;           // [u]
  std::vector<double> p_g_given_u;   // [u][g], row-major over u
  std::vector<double> p_r_given_g;   // [g][r]
  std::vector<double> p_l_given_ru;  // [r][u][l], row index r*nu + u

  void validate() const;  // cards in range, table shapes, rows sum to 1 +- 1e-12
};

// Exact joint over (G, R, L), U summed out.
struct Joint {
  std::size_t ng = 0, nr = 0, nl = 0;
  std::vector<double> p;  // [g][r][l]

  double at(std::size_t g, std::size_t r, std::size_t l) const {
    return p[(g * nr + r) * nl + l];
  }
  double marginal_g(std::size_t g) const;
  double marginal_gr(std::size_t g, std::size_t r) const;
};

Joint observational(const DiscreteScm& m);

// P(L | G=g) read off the observational joint.
std::vector<double> observational_conditional(const Joint& joint, std::size_t g);

// P(L | do(G=g)) by graph surgery: cut U -> G, enumerate the truncated
// factorization exactly.
std::vector<double> interventional(const DiscreteScm& m, std::size_t g);

// P(L | do(G=g)) via the front-door formula, computed from the observational
// joint alone: sum_r P(r|g) sum_g' P(l|r,g') P(g'). Terms whose conditioning
// event has probability 0 are dropped with weight 0.
std::vector<double> frontdoor_estimate(const DiscreteScm& m, std::size_t g);
std::vector<double> frontdoor_estimate(const Joint& joint, std::size_t g);

// Random SCM with the given cardinalities; every conditional row is drawn
// from a symmetric Dirichlet(1), so tables have full support almost surely.
DiscreteScm random_scm(std::mt19937_64& rng, std::size_t nu, std::size_t ng,
                       std::size_t nr, std::size_t nl);

// Maximally confounded instance: G copies U, L reads only U. Observational
// P(L|g) is one-hot while P(L|do(g)) is uniform — the bias the method removes.
DiscreteScm confounded_example();

// Text format (see README): "scm v1" header, `cards nu ng nr nl`, then the
// tables in declaration order, one distribution row per line.
void save_scm(const DiscreteScm& m, std::ostream& out);
DiscreteScm load_scm(std::istream& in);

}  // namespace causalwalk::scm
