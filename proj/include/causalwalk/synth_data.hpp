#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "causalwalk/graph.hpp"

namespace causalwalk {

// Template-based generator for multi-hop verification data with a
// controllable shortcut bias.
//
// Every claim asserts that support flowed along a named entity route,
// e.g. "support flowed from Vedrak through Molsa to Tarniel". Each hop
// of the route is attested by one evidence sentence that either
// transmits ("X channeled support to Y") or blocks ("X froze all
// transfers to Y"). A verdict requires the full route: SUPPORTS when
// every hop transmits, REFUTES when the attested route contains a
// blocked hop, UNDETERMINED while any hop is unattested (or attested
// both ways). Dropping any single hop therefore makes every example
// undecidable from the rest of its chain, which is what keeps the task
// multi-hop.
//
// The bias knob: with probability bias_strength a train example gains a
// fixed fact-checker sentence matching its label. With the remaining
// probability a fair coin decides between no such sentence and one with
// uniformly random polarity, so at bias_strength 0 the sentence appears
// often but carries no label information. test_adversarial injects the
// sentence at the same rate with deliberately wrong polarity.

struct GeneratorConfig {
  std::size_t n_train = 500;
  std::size_t n_dev = 100;
  std::size_t n_test = 200;
  std::size_t chain_length = 3;  // gold hops per claim
  std::size_t n_distractors = 8;
  int classes = 2;  // 2 = SUPPORTS/REFUTES, 3 adds NEI
  double bias_strength = 0.0;
  std::uint64_t seed = 0;

  // chain_length >= 2, classes in {2,3}, bias_strength in [0,1], and both
  // the standard pool (chain + distractors + shortcut) and the symmetric
  // pool (two chains + distractors) must fit in kMaxEvidence.
  void validate() const;
};

struct GeneratedExample {
  std::string id;
  std::string claim;
  std::vector<std::string> evidence;
  std::vector<std::uint8_t> evidence_flags;  // 1 on gold-chain sentences
  int label = kSupports;
  bool has_shortcut = false;
  bool shortcut_agrees = false;
};

struct DatasetSplits {
  std::vector<GeneratedExample> train;
  std::vector<GeneratedExample> dev;
  std::vector<GeneratedExample> test_id;           // mirrors train's bias
  std::vector<GeneratedExample> test_adversarial;  // bias polarity flipped
  std::vector<GeneratedExample> test_symmetric;    // label pairs, shared pool
};

enum class LogicVerdict { kSupports, kRefutes, kUndetermined };

// UNDETERMINED maps onto the NEI class.
inline int verdict_label(LogicVerdict v) {
  switch (v) {
    case LogicVerdict::kSupports:
      return kSupports;
    case LogicVerdict::kRefutes:
      return kRefutes;
    default:
      return kNei;
  }
}

// Deterministic in config.seed. Entity route tuples are unique across all
// five splits, so no test claim reuses a train chain.
DatasetSplits generate(const GeneratorConfig& config);

// Exact symbolic verdict for generator-grammar text. Shortcut sentences
// are recognized and ignored; anything outside the grammar is an error.
LogicVerdict template_logic_eval(const std::string& claim,
                                 const std::vector<std::string>& evidence);

// Entity route as written in the claim (chain_length + 1 names).
std::vector<std::string> parse_claim_route(const std::string& claim);

// The fixed label-revealing sentence injected by the bias mechanism.
const std::string& shortcut_sentence(int label);

// One JSON object per line: {id, claim, evidence, evidence_labels, label}.
void save_jsonl(std::ostream& out,
                const std::vector<GeneratedExample>& examples);
std::vector<GeneratedExample> load_jsonl(std::istream& in);

}  // namespace causalwalk
