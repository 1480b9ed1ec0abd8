#include "causalwalk/featurizer.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>

namespace causalwalk {

namespace {

constexpr char kGramSep = '\x1f';   // joins tokens inside one n-gram
constexpr char kCrossSep = '\x1e';  // separates the two sides of a cross pair

void add_signed(std::vector<double>& vec, std::uint64_t h) {
  const double sign = (h >> 63) ? -1.0 : 1.0;
  vec[h % vec.size()] += sign;
}

bool l2_normalize(std::vector<double>& vec) {
  double sq = 0.0;
  for (double v : vec) sq += v * v;
  if (sq == 0.0) return false;
  const double inv = 1.0 / std::sqrt(sq);
  for (double& v : vec) v *= inv;
  return true;
}

}  // namespace

namespace hashing {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = 14695981039346656037ULL ^ seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace hashing

void FeaturizerConfig::validate() const {
  if (dim < 8) throw std::invalid_argument("featurizer: dim must be >= 8");
  if (ngram_orders.empty())
    throw std::invalid_argument("featurizer: ngram_orders must be non-empty");
  for (int k : ngram_orders) {
    if (k < 1)
      throw std::invalid_argument("featurizer: ngram orders must be >= 1");
  }
}

std::vector<std::string> tokenize(std::string_view text, bool lowercase) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!current.empty()) {
        tokens.push_back(std::move(current));
        current.clear();
      }
    } else {
      current.push_back(lowercase
                            ? static_cast<char>(std::tolower(
                                  static_cast<unsigned char>(ch)))
                            : ch);
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<double> featurize_sentence(std::string_view text,
                                       const FeaturizerConfig& config) {
  config.validate();
  std::vector<double> vec(config.dim, 0.0);
  const auto tokens = tokenize(text, config.lowercase);
  for (int order : config.ngram_orders) {
    const std::size_t k = static_cast<std::size_t>(order);
    if (tokens.size() < k) continue;
    for (std::size_t i = 0; i + k <= tokens.size(); ++i) {
      std::string gram = tokens[i];
      for (std::size_t j = 1; j < k; ++j) {
        gram.push_back(kGramSep);
        gram += tokens[i + j];
      }
      add_signed(vec, hashing::fnv1a64(gram, config.hash_seed));
    }
  }
  l2_normalize(vec);
  return vec;
}

std::vector<double> featurize_cross(std::string_view evidence,
                                    std::string_view claim,
                                    const FeaturizerConfig& config) {
  config.validate();
  std::vector<double> vec(config.dim, 0.0);
  const auto left = tokenize(evidence, config.lowercase);
  const auto right = tokenize(claim, config.lowercase);
  for (const auto& a : left) {
    for (const auto& b : right) {
      std::string key = a;
      key.push_back(kCrossSep);
      key += b;
      add_signed(vec, hashing::fnv1a64(key, config.hash_seed));
    }
  }
  l2_normalize(vec);
  return vec;
}

std::vector<double> featurize_pair(std::string_view evidence,
                                   std::string_view claim,
                                   const FeaturizerConfig& config) {
  auto vec = featurize_sentence(evidence, config);
  const auto claim_vec = featurize_sentence(claim, config);
  const auto cross = featurize_cross(evidence, claim, config);
  for (std::size_t i = 0; i < vec.size(); ++i) vec[i] += claim_vec[i] + cross[i];
  l2_normalize(vec);
  return vec;
}

}  // namespace causalwalk
