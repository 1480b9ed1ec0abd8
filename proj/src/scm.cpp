#include "causalwalk/scm.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace causalwalk::scm {

namespace {

void check_card(const char* name, std::size_t card) {
  if (card < 2 || card > 8) {
    throw std::invalid_argument("scm: |" + std::string(name) + "| = " +
                                std::to_string(card) + " outside [2,8]");
  }
}

void check_rows(const char* name, const std::vector<double>& table,
                std::size_t rows, std::size_t cols) {
  if (table.size() != rows * cols) {
    throw std::invalid_argument("scm: table " + std::string(name) + " has " +
                                std::to_string(table.size()) + " entries, want " +
                                std::to_string(rows * cols));
  }
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double v = table[i * cols + j];
      if (!(v >= 0.0)) {
        throw std::invalid_argument("scm: negative entry in " + std::string(name));
      }
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-12) {
      throw std::invalid_argument("scm: row " + std::to_string(i) + " of " +
                                  name + " sums to " + std::to_string(s));
    }
  }
}

std::vector<double> dirichlet1_row(std::mt19937_64& rng, std::size_t n) {
  std::exponential_distribution<double> expo(1.0);
  std::vector<double> row(n);
  double s = 0.0;
  for (double& v : row) {
    v = expo(rng);
    s += v;
  }
  for (double& v : row) v /= s;
  return row;
}

}  // namespace

void DiscreteScm::validate() const {
  check_card("U", nu);
  check_card("G", ng);
  check_card("R", nr);
  check_card("L", nl);
  check_rows("P_U", p_u, 1, nu);
  check_rows("P_G_given_U", p_g_given_u, nu, ng);
  check_rows("P_R_given_G", p_r_given_g, ng, nr);
  check_rows("P_L_given_RU", p_l_given_ru, nr * nu, nl);
}

double Joint::marginal_g(std::size_t g) const {
  double s = 0.0;
  for (std::size_t r = 0; r < nr; ++r)
    for (std::size_t l = 0; l < nl; ++l) s += at(g, r, l);
  return s;
}

double Joint::marginal_gr(std::size_t g, std::size_t r) const {
  double s = 0.0;
  for (std::size_t l = 0; l < nl; ++l) s += at(g, r, l);
  return s;
}

Joint observational(const DiscreteScm& m) {
  m.validate();
  Joint j;
  j.ng = m.ng;
  j.nr = m.nr;
  j.nl = m.nl;
  j.p.assign(m.ng * m.nr * m.nl, 0.0);
  for (std::size_t u = 0; u < m.nu; ++u) {
    for (std::size_t g = 0; g < m.ng; ++g) {
      const double pug = m.p_u[u] * m.p_g_given_u[u * m.ng + g];
      for (std::size_t r = 0; r < m.nr; ++r) {
        const double pugr = pug * m.p_r_given_g[g * m.nr + r];
        for (std::size_t l = 0; l < m.nl; ++l) {
          j.p[(g * m.nr + r) * m.nl + l] +=
              pugr * m.p_l_given_ru[(r * m.nu + u) * m.nl + l];
        }
      }
    }
  }
  return j;
}

std::vector<double> observational_conditional(const Joint& joint, std::size_t g) {
  if (g >= joint.ng) throw std::invalid_argument("scm: g out of range");
  const double pg = joint.marginal_g(g);
  std::vector<double> out(joint.nl, 0.0);
  if (pg == 0.0) return out;
  for (std::size_t l = 0; l < joint.nl; ++l) {
    double s = 0.0;
    for (std::size_t r = 0; r < joint.nr; ++r) s += joint.at(g, r, l);
    out[l] = s / pg;
  }
  return out;
}

std::vector<double> interventional(const DiscreteScm& m, std::size_t g) {
  m.validate();
  if (g >= m.ng) throw std::invalid_argument("scm: g out of range");
  std::vector<double> out(m.nl, 0.0);
  for (std::size_t u = 0; u < m.nu; ++u) {
    for (std::size_t r = 0; r < m.nr; ++r) {
      const double w = m.p_u[u] * m.p_r_given_g[g * m.nr + r];
      for (std::size_t l = 0; l < m.nl; ++l)
        out[l] += w * m.p_l_given_ru[(r * m.nu + u) * m.nl + l];
    }
  }
  return out;
}

std::vector<double> frontdoor_estimate(const Joint& joint, std::size_t g) {
  if (g >= joint.ng) throw std::invalid_argument("scm: g out of range");
  std::vector<double> out(joint.nl, 0.0);
  const double pg = joint.marginal_g(g);
  if (pg == 0.0) return out;
  for (std::size_t r = 0; r < joint.nr; ++r) {
    const double p_r_given_g = joint.marginal_gr(g, r) / pg;
    if (p_r_given_g == 0.0) continue;
    for (std::size_t g2 = 0; g2 < joint.ng; ++g2) {
      const double pg2 = joint.marginal_g(g2);
      const double pg2r = joint.marginal_gr(g2, r);
      if (pg2r == 0.0) continue;  // P(l|r,g2) undefined; term carries weight 0
      for (std::size_t l = 0; l < joint.nl; ++l) {
        out[l] += p_r_given_g * (joint.at(g2, r, l) / pg2r) * pg2;
      }
    }
  }
  return out;
}

std::vector<double> frontdoor_estimate(const DiscreteScm& m, std::size_t g) {
  return frontdoor_estimate(observational(m), g);
}

DiscreteScm random_scm(std::mt19937_64& rng, std::size_t nu, std::size_t ng,
                       std::size_t nr, std::size_t nl) {
  DiscreteScm m;
  m.nu = nu;
  m.ng = ng;
  m.nr = nr;
  m.nl = nl;
  m.p_u = dirichlet1_row(rng, nu);
  auto fill = [&](std::vector<double>& table, std::size_t rows, std::size_t cols) {
    table.clear();
    table.reserve(rows * cols);
    for (std::size_t i = 0; i < rows; ++i) {
      auto row = dirichlet1_row(rng, cols);
      table.insert(table.end(), row.begin(), row.end());
    }
  };
  fill(m.p_g_given_u, nu, ng);
  fill(m.p_r_given_g, ng, nr);
  fill(m.p_l_given_ru, nr * nu, nl);
  m.validate();
  return m;
}

DiscreteScm confounded_example() {
  DiscreteScm m;
  m.nu = m.ng = m.nr = m.nl = 2;
  m.p_u = {0.5, 0.5};
  m.p_g_given_u = {1, 0,   // G copies U
                   0, 1};
  m.p_r_given_g = {0.5, 0.5,  // R carries no signal; G has no real effect on L
                   0.5, 0.5};
  m.p_l_given_ru = {1, 0,   // r=0,u=0: L reads U alone
                    0, 1,   // r=0,u=1
                    1, 0,   // r=1,u=0
                    0, 1};  // r=1,u=1
  m.validate();
  return m;
}

void save_scm(const DiscreteScm& m, std::ostream& out) {
  m.validate();
  out << "scm v1\n";
  out << "cards " << m.nu << " " << m.ng << " " << m.nr << " " << m.nl << "\n";
  auto dump = [&](const char* name, const std::vector<double>& table,
                  std::size_t rows, std::size_t cols) {
    out << name << "\n";
    out.precision(17);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) {
        if (j) out << " ";
        out << table[i * cols + j];
      }
      out << "\n";
    }
  };
  dump("p_u", m.p_u, 1, m.nu);
  dump("p_g_given_u", m.p_g_given_u, m.nu, m.ng);
  dump("p_r_given_g", m.p_r_given_g, m.ng, m.nr);
  dump("p_l_given_ru", m.p_l_given_ru, m.nr * m.nu, m.nl);
}

DiscreteScm load_scm(std::istream& in) {
  auto fail = [](const std::string& what) -> void {
    throw std::runtime_error("scm file: " + what);
  };
  std::string word, version;
  if (!(in >> word >> version) || word != "scm" || version != "v1")
    fail("missing 'scm v1' header");
  DiscreteScm m;
  if (!(in >> word) || word != "cards") fail("expected 'cards'");
  if (!(in >> m.nu >> m.ng >> m.nr >> m.nl)) fail("bad cardinalities");
  auto read_table = [&](const char* name, std::vector<double>& table,
                        std::size_t count) {
    if (!(in >> word) || word != name)
      fail("expected table '" + std::string(name) + "'");
    table.resize(count);
    for (double& v : table) {
      if (!(in >> v)) fail("truncated table '" + std::string(name) + "'");
    }
  };
  read_table("p_u", m.p_u, m.nu);
  read_table("p_g_given_u", m.p_g_given_u, m.nu * m.ng);
  read_table("p_r_given_g", m.p_r_given_g, m.ng * m.nr);
  read_table("p_l_given_ru", m.p_l_given_ru, m.nr * m.nu * m.nl);
  m.validate();
  return m;
}

}  // namespace causalwalk::scm
