#pragma once

#include <cstddef>
#include <random>
#include <vector>

namespace causalwalk {

struct KMeansResult {
  std::vector<std::vector<double>> centers;  // k centers
  std::vector<std::size_t> assignment;       // per point, nearest center
  double objective = 0.0;                    // sum of squared distances
  std::vector<double> objective_history;     // objective after each Lloyd step
};

// Lloyd's algorithm with k-means++ seeding. Stops after max_iters or when the
// relative objective improvement drops below rel_tol. Ties in assignment go to
// the lowest center index; an emptied cluster is reseeded at the point
// farthest from its center. Deterministic given the RNG state.
KMeansResult kmeans(const std::vector<std::vector<double>>& points,
                    std::size_t k, std::mt19937_64& rng,
                    std::size_t max_iters = 100, double rel_tol = 1e-6);

}  // namespace causalwalk
