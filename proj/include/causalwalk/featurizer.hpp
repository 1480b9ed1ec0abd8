#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace causalwalk {

struct FeaturizerConfig {
  std::size_t dim = 256;
  std::vector<int> ngram_orders = {1, 2};
  std::uint64_t hash_seed = 0x5eedULL;
  bool lowercase = true;

  void validate() const;  // dim >= 8, ngram_orders non-empty and all >= 1
};

// Signed feature hashing. Tokens are whitespace-split (lowercased per config);
// each n-gram of an order in ngram_orders is FNV-1a hashed with the seed folded
// into the offset basis; the hash picks a bin (h mod dim) and a sign (top bit),
// contributing +/-1. Non-zero results are L2-normalized.
std::vector<double> featurize_sentence(std::string_view text,
                                       const FeaturizerConfig& config);

// Ordered cross features: one signed-hash contribution per (evidence token,
// claim token) pair, L2-normalized when non-zero. Asymmetric by construction.
std::vector<double> featurize_cross(std::string_view evidence,
                                    std::string_view claim,
                                    const FeaturizerConfig& config);

// Pair encoding: normalize(sentence(evidence) + sentence(claim) + cross).
// The sentence-sum part is symmetric; the cross part keeps the pair ordered.
std::vector<double> featurize_pair(std::string_view evidence,
                                   std::string_view claim,
                                   const FeaturizerConfig& config);

namespace hashing {
// FNV-1a over bytes with the seed XORed into the offset basis. Exposed so
// tests can verify coordinates against an independent reimplementation.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed);
}  // namespace hashing

std::vector<std::string> tokenize(std::string_view text, bool lowercase);

}  // namespace causalwalk
