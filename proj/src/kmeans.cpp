#include "causalwalk/kmeans.hpp"

#include <limits>
#include <stdexcept>

namespace causalwalk {

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

KMeansResult kmeans(const std::vector<std::vector<double>>& points,
                    std::size_t k, std::mt19937_64& rng,
                    std::size_t max_iters, double rel_tol) {
  if (k == 0) throw std::invalid_argument("kmeans: k must be >= 1");
  if (points.size() < k) {
    throw std::invalid_argument("kmeans: " + std::to_string(points.size()) +
                                " points for k=" + std::to_string(k));
  }
  const std::size_t dim = points[0].size();
  for (const auto& p : points) {
    if (p.size() != dim)
      throw std::invalid_argument("kmeans: inconsistent point dimensions");
  }

  KMeansResult res;
  // k-means++ seeding
  std::uniform_int_distribution<std::size_t> uniform_pt(0, points.size() - 1);
  res.centers.push_back(points[uniform_pt(rng)]);
  std::vector<double> d2(points.size());
  while (res.centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : res.centers) best = std::min(best, sq_dist(points[i], c));
      d2[i] = best;
      total += best;
    }
    if (total == 0.0) {
      res.centers.push_back(points[uniform_pt(rng)]);
      continue;
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double target = unit(rng) * total;
    std::size_t pick = points.size() - 1;
    for (std::size_t i = 0; i < points.size(); ++i) {
      target -= d2[i];
      if (target <= 0.0) {
        pick = i;
        break;
      }
    }
    res.centers.push_back(points[pick]);
  }

  res.assignment.assign(points.size(), 0);
  double prev_obj = std::numeric_limits<double>::infinity();
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    // assignment step
    res.objective = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t c = 0; c < k; ++c) {
        const double d = sq_dist(points[i], res.centers[c]);
        if (d < best) {
          best = d;
          arg = c;
        }
      }
      res.assignment[i] = arg;
      res.objective += best;
    }
    res.objective_history.push_back(res.objective);

    // update step
    std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto c = res.assignment[i];
      ++counts[c];
      for (std::size_t j = 0; j < dim; ++j) sums[c][j] += points[i][j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // reseed at the point farthest from its assigned center
        double worst = -1.0;
        std::size_t pick = 0;
        for (std::size_t i = 0; i < points.size(); ++i) {
          const double d = sq_dist(points[i], res.centers[res.assignment[i]]);
          if (d > worst) {
            worst = d;
            pick = i;
          }
        }
        res.centers[c] = points[pick];
        continue;
      }
      for (std::size_t j = 0; j < dim; ++j)
        res.centers[c][j] = sums[c][j] / static_cast<double>(counts[c]);
    }

    if (iter > 0 && prev_obj - res.objective <= rel_tol * prev_obj) break;
    prev_obj = res.objective;
  }

  // final assignment against the last center update
  res.objective = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t c = 0; c < k; ++c) {
      const double d = sq_dist(points[i], res.centers[c]);
      if (d < best) {
        best = d;
        arg = c;
      }
    }
    res.assignment[i] = arg;
    res.objective += best;
  }
  res.objective_history.push_back(res.objective);
  return res;
}

}  // namespace causalwalk
