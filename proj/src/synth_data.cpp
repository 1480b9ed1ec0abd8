#include "causalwalk/synth_data.hpp"

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <json.hpp>

namespace causalwalk {

namespace {

constexpr std::size_t kExtraEntities = 4;
constexpr std::size_t kVocabSize = 64;
constexpr int kSampleCap = 1000;

const std::vector<std::string>& positive_middles() {
  static const std::vector<std::string> v = {
      "channeled support to",
      "passed the funds to",
      "relayed the endorsement to",
      "renewed its backing of",
  };
  return v;
}

const std::vector<std::string>& negative_middles() {
  static const std::vector<std::string> v = {
      "blocked the transfer to",
      "froze all transfers to",
      "severed the channel to",
      "withdrew all backing from",
  };
  return v;
}

const std::vector<std::string>& neutral_middles() {
  static const std::vector<std::string> v = {
      "attended a summit with",
      "was photographed beside",
      "shares an office tower with",
      "hired the same auditors as",
  };
  return v;
}

std::size_t draw_index(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

double draw_unit(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream iss(s);
  std::vector<std::string> out;
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> make_entity_vocab(std::mt19937_64& rng,
                                           std::size_t n) {
  static const std::vector<std::string> onsets = {
      "b", "d",  "f",  "g",  "k",  "l",  "m",  "n",  "p", "r",
      "s", "t",  "v",  "z",  "br", "dr", "gr", "kr", "tr"};
  static const std::vector<std::string> vowels = {"a", "e", "i", "o", "u"};
  static const std::vector<std::string> codas = {"",  "n",  "r", "s",
                                                 "l", "th", "x"};
  std::set<std::string> seen;
  std::vector<std::string> out;
  while (out.size() < n) {
    std::string w = onsets[draw_index(rng, onsets.size())] +
                    vowels[draw_index(rng, vowels.size())] +
                    onsets[draw_index(rng, onsets.size())] +
                    vowels[draw_index(rng, vowels.size())] +
                    codas[draw_index(rng, codas.size())];
    w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
    if (seen.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

std::string make_relation(const std::string& head, const std::string& middle,
                          const std::string& tail) {
  return head + " " + middle + " " + tail;
}

std::string make_claim(const std::vector<std::string>& route) {
  std::string c = "support flowed from " + route.front();
  for (std::size_t i = 1; i + 1 < route.size(); ++i) c += " through " + route[i];
  return c + " to " + route.back();
}

// Distinct entities forming an unused route tuple; marks the tuple used.
std::vector<std::string> draw_route(
    const std::vector<std::string>& vocab,
    std::set<std::vector<std::string>>& used_tuples, std::mt19937_64& rng,
    std::size_t len, const std::set<std::string>& forbidden) {
  for (int attempt = 0; attempt < kSampleCap; ++attempt) {
    std::vector<std::string> route;
    std::set<std::string> chosen = forbidden;
    while (route.size() < len) {
      const std::string& name = vocab[draw_index(rng, vocab.size())];
      if (chosen.insert(name).second) route.push_back(name);
    }
    if (used_tuples.insert(route).second) return route;
  }
  throw std::runtime_error("generate: exhausted unique entity tuples");
}

std::vector<std::string> draw_extras(const std::vector<std::string>& vocab,
                                     const std::set<std::string>& forbidden,
                                     std::mt19937_64& rng, std::size_t n) {
  std::vector<std::string> extras;
  std::set<std::string> chosen = forbidden;
  while (extras.size() < n) {
    const std::string& name = vocab[draw_index(rng, vocab.size())];
    if (chosen.insert(name).second) extras.push_back(name);
  }
  return extras;
}

int other_class(std::mt19937_64& rng, int label, int classes) {
  int c = static_cast<int>(draw_index(rng, static_cast<std::size_t>(classes - 1)));
  return c >= label ? c + 1 : c;
}

using Pair = std::pair<std::string, std::string>;

// n distractor sentences over `pool`, never reusing an ordered pair. All
// distractors use neutral verbs: transmit/block language appears only on the
// gold chain, so distractors mislead by naming claim entities in plausible
// relations without ever touching the transmission verdict.
void add_distractors(std::vector<std::string>& evidence,
                     std::vector<std::uint8_t>& flags,
                     const std::vector<std::string>& pool,
                     std::set<Pair>& used_pairs, std::mt19937_64& rng,
                     std::size_t n) {
  for (std::size_t d = 0; d < n; ++d) {
    Pair pr;
    bool found = false;
    for (int attempt = 0; attempt < kSampleCap; ++attempt) {
      const std::string& a = pool[draw_index(rng, pool.size())];
      const std::string& b = pool[draw_index(rng, pool.size())];
      if (a == b) continue;
      pr = {a, b};
      if (used_pairs.count(pr)) continue;
      found = true;
      break;
    }
    if (!found)
      throw std::runtime_error("generate: exhausted unique entity pairs");
    used_pairs.insert(pr);
    const auto& table = neutral_middles();
    evidence.push_back(
        make_relation(pr.first, table[draw_index(rng, table.size())], pr.second));
    flags.push_back(0);
  }
}

void shuffle_together(std::vector<std::string>& evidence,
                      std::vector<std::vector<std::uint8_t>*> flag_sets,
                      std::mt19937_64& rng) {
  std::vector<std::size_t> perm(evidence.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::string> ev(evidence.size());
  for (std::size_t i = 0; i < perm.size(); ++i) ev[i] = std::move(evidence[perm[i]]);
  evidence = std::move(ev);
  for (auto* flags : flag_sets) {
    std::vector<std::uint8_t> f(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) f[i] = (*flags)[perm[i]];
    *flags = std::move(f);
  }
}

std::string make_id(const char* split, std::size_t index) {
  std::ostringstream oss;
  oss << split << "-" << std::setw(6) << std::setfill('0') << index;
  return oss.str();
}

GeneratedExample build_example(const GeneratorConfig& cfg,
                               const std::vector<std::string>& vocab,
                               std::set<std::vector<std::string>>& used_tuples,
                               std::mt19937_64& rng, std::string id,
                               bool adversarial) {
  GeneratedExample ex;
  ex.id = std::move(id);
  ex.label = static_cast<int>(draw_index(rng, static_cast<std::size_t>(cfg.classes)));
  const std::size_t m = cfg.chain_length;

  const auto route = draw_route(vocab, used_tuples, rng, m + 1, {});
  const std::set<std::string> route_set(route.begin(), route.end());
  const auto extras_v = draw_extras(vocab, route_set, rng, kExtraEntities);
  ex.claim = make_claim(route);

  std::vector<int> signs(m, 1);
  std::size_t dropped = m;  // m == keep every hop
  if (ex.label == kRefutes) signs[draw_index(rng, m)] = -1;
  if (ex.label == kNei) dropped = draw_index(rng, m);

  std::set<Pair> used_pairs;
  for (std::size_t i = 0; i < m; ++i) used_pairs.insert({route[i], route[i + 1]});

  for (std::size_t i = 0; i < m; ++i) {
    if (i == dropped) continue;
    const auto& table = signs[i] > 0 ? positive_middles() : negative_middles();
    ex.evidence.push_back(make_relation(
        route[i], table[draw_index(rng, table.size())], route[i + 1]));
    ex.evidence_flags.push_back(1);
  }

  std::vector<std::string> pool = route;
  pool.insert(pool.end(), extras_v.begin(), extras_v.end());
  add_distractors(ex.evidence, ex.evidence_flags, pool, used_pairs, rng,
                  cfg.n_distractors);

  int sc = -1;
  if (draw_unit(rng) < cfg.bias_strength) {
    sc = adversarial ? other_class(rng, ex.label, cfg.classes) : ex.label;
  } else if (draw_unit(rng) < 0.5) {
    sc = static_cast<int>(draw_index(rng, static_cast<std::size_t>(cfg.classes)));
  }
  if (sc >= 0) {
    ex.evidence.push_back(shortcut_sentence(sc));
    ex.evidence_flags.push_back(0);
    ex.has_shortcut = true;
    ex.shortcut_agrees = sc == ex.label;
  }

  shuffle_together(ex.evidence, {&ex.evidence_flags}, rng);
  return ex;
}

std::pair<GeneratedExample, GeneratedExample> build_symmetric_pair(
    const GeneratorConfig& cfg, const std::vector<std::string>& vocab,
    std::set<std::vector<std::string>>& used_tuples, std::mt19937_64& rng,
    std::string id_a, std::string id_b) {
  const std::size_t m = cfg.chain_length;
  const auto route_a = draw_route(vocab, used_tuples, rng, m + 1, {});
  const std::set<std::string> set_a(route_a.begin(), route_a.end());
  const auto route_b = draw_route(vocab, used_tuples, rng, m + 1, set_a);
  std::set<std::string> both = set_a;
  both.insert(route_b.begin(), route_b.end());
  const auto extras_v = draw_extras(vocab, both, rng, kExtraEntities);

  std::vector<int> signs_b(m, 1);
  signs_b[draw_index(rng, m)] = -1;

  std::vector<std::string> evidence;
  std::vector<std::uint8_t> flags_a, flags_b;
  std::set<Pair> used_pairs;
  for (std::size_t i = 0; i < m; ++i) {
    used_pairs.insert({route_a[i], route_a[i + 1]});
    used_pairs.insert({route_b[i], route_b[i + 1]});
  }
  for (std::size_t i = 0; i < m; ++i) {
    const auto& table = positive_middles();
    evidence.push_back(make_relation(route_a[i],
                                     table[draw_index(rng, table.size())],
                                     route_a[i + 1]));
    flags_a.push_back(1);
    flags_b.push_back(0);
  }
  for (std::size_t i = 0; i < m; ++i) {
    const auto& table = signs_b[i] > 0 ? positive_middles() : negative_middles();
    evidence.push_back(make_relation(route_b[i],
                                     table[draw_index(rng, table.size())],
                                     route_b[i + 1]));
    flags_a.push_back(0);
    flags_b.push_back(1);
  }

  std::vector<std::string> pool = route_a;
  pool.insert(pool.end(), route_b.begin(), route_b.end());
  pool.insert(pool.end(), extras_v.begin(), extras_v.end());
  std::vector<std::uint8_t> flags_none(flags_a.begin(), flags_a.end());
  const std::size_t before = evidence.size();
  add_distractors(evidence, flags_none, pool, used_pairs, rng,
                  cfg.n_distractors);
  for (std::size_t i = before; i < evidence.size(); ++i) {
    flags_a.push_back(0);
    flags_b.push_back(0);
  }

  shuffle_together(evidence, {&flags_a, &flags_b}, rng);

  GeneratedExample ex_a;
  ex_a.id = std::move(id_a);
  ex_a.claim = make_claim(route_a);
  ex_a.evidence = evidence;
  ex_a.evidence_flags = std::move(flags_a);
  ex_a.label = kSupports;

  GeneratedExample ex_b;
  ex_b.id = std::move(id_b);
  ex_b.claim = make_claim(route_b);
  ex_b.evidence = std::move(evidence);
  ex_b.evidence_flags = std::move(flags_b);
  ex_b.label = kRefutes;
  return {std::move(ex_a), std::move(ex_b)};
}

struct ParsedRelation {
  std::string head;
  std::string tail;
  int polarity;  // +1 transmit, -1 block, 0 neutral
};

std::optional<ParsedRelation> try_parse_relation(const std::string& sentence) {
  const auto toks = split_ws(sentence);
  if (toks.size() < 3) return std::nullopt;
  std::string middle = toks[1];
  for (std::size_t i = 2; i + 1 < toks.size(); ++i) middle += " " + toks[i];
  const auto in = [&](const std::vector<std::string>& table) {
    return std::find(table.begin(), table.end(), middle) != table.end();
  };
  int polarity;
  if (in(positive_middles())) {
    polarity = 1;
  } else if (in(negative_middles())) {
    polarity = -1;
  } else if (in(neutral_middles())) {
    polarity = 0;
  } else {
    return std::nullopt;
  }
  return ParsedRelation{toks.front(), toks.back(), polarity};
}

bool is_shortcut(const std::string& sentence) {
  for (int c = 0; c < 3; ++c)
    if (sentence == shortcut_sentence(c)) return true;
  return false;
}

}  // namespace

void GeneratorConfig::validate() const {
  if (chain_length < 2)
    throw std::invalid_argument("generator config: chain_length must be >= 2");
  if (classes != 2 && classes != 3)
    throw std::invalid_argument("generator config: classes must be 2 or 3");
  if (!(bias_strength >= 0.0 && bias_strength <= 1.0))
    throw std::invalid_argument(
        "generator config: bias_strength must lie in [0, 1]");
  if (chain_length + n_distractors + 1 > kMaxEvidence)
    throw std::invalid_argument(
        "generator config: chain + distractors + shortcut exceeds the "
        "evidence limit of " +
        std::to_string(kMaxEvidence));
  if (2 * chain_length + n_distractors > kMaxEvidence)
    throw std::invalid_argument(
        "generator config: symmetric pairs need 2*chain_length + "
        "n_distractors <= " +
        std::to_string(kMaxEvidence));
}

const std::string& shortcut_sentence(int label) {
  static const std::vector<std::string> v = {
      "fact checkers have verified this claim as accurate",
      "fact checkers have flagged this claim as fabricated",
      "fact checkers marked this claim as unverifiable",
  };
  return v.at(static_cast<std::size_t>(label));
}

DatasetSplits generate(const GeneratorConfig& config) {
  config.validate();
  std::mt19937_64 vocab_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  const auto vocab = make_entity_vocab(vocab_rng, kVocabSize);
  std::set<std::vector<std::string>> used_tuples;
  DatasetSplits out;

  const auto run_split = [&](std::vector<GeneratedExample>& dst,
                             const char* name, std::size_t n,
                             std::uint64_t salt, bool adversarial) {
    std::mt19937_64 rng(config.seed + salt * 0x9e3779b97f4a7c15ULL);
    for (std::size_t i = 0; i < n; ++i)
      dst.push_back(build_example(config, vocab, used_tuples, rng,
                                  make_id(name, i), adversarial));
  };
  run_split(out.train, "train", config.n_train, 1, false);
  run_split(out.dev, "dev", config.n_dev, 2, false);
  run_split(out.test_id, "test_id", config.n_test, 3, false);
  run_split(out.test_adversarial, "test_adversarial", config.n_test, 4, true);

  std::mt19937_64 rng(config.seed + 5 * 0x9e3779b97f4a7c15ULL);
  for (std::size_t p = 0; p < config.n_test / 2; ++p) {
    auto pair = build_symmetric_pair(config, vocab, used_tuples, rng,
                                     make_id("test_symmetric", 2 * p),
                                     make_id("test_symmetric", 2 * p + 1));
    out.test_symmetric.push_back(std::move(pair.first));
    out.test_symmetric.push_back(std::move(pair.second));
  }
  return out;
}

std::vector<std::string> parse_claim_route(const std::string& claim) {
  const auto bad = [&]() {
    return std::invalid_argument(
        "parse_claim_route: claim does not match the template grammar: \"" +
        claim + "\"");
  };
  const auto t = split_ws(claim);
  if (t.size() < 7 || t[0] != "support" || t[1] != "flowed" || t[2] != "from")
    throw bad();
  std::vector<std::string> route = {t[3]};
  std::size_t i = 4;
  while (i + 1 < t.size() && t[i] == "through") {
    route.push_back(t[i + 1]);
    i += 2;
  }
  if (route.size() < 2 || i + 2 != t.size() || t[i] != "to") throw bad();
  route.push_back(t[i + 1]);
  return route;
}

LogicVerdict template_logic_eval(const std::string& claim,
                                 const std::vector<std::string>& evidence) {
  const auto route = parse_claim_route(claim);
  std::map<Pair, std::set<int>> attested;
  for (const auto& sentence : evidence) {
    if (is_shortcut(sentence)) continue;
    const auto rel = try_parse_relation(sentence);
    if (!rel)
      throw std::invalid_argument(
          "template_logic_eval: unparseable sentence: \"" + sentence + "\"");
    if (rel->polarity != 0) attested[{rel->head, rel->tail}].insert(rel->polarity);
  }
  bool blocked = false;
  for (std::size_t i = 0; i + 1 < route.size(); ++i) {
    const auto it = attested.find({route[i], route[i + 1]});
    // an unattested or contradicted hop leaves the route unverifiable
    if (it == attested.end() || it->second.size() != 1)
      return LogicVerdict::kUndetermined;
    if (*it->second.begin() < 0) blocked = true;
  }
  return blocked ? LogicVerdict::kRefutes : LogicVerdict::kSupports;
}

void save_jsonl(std::ostream& out,
                const std::vector<GeneratedExample>& examples) {
  for (const auto& ex : examples) {
    nlohmann::json j;
    j["id"] = ex.id;
    j["claim"] = ex.claim;
    j["evidence"] = ex.evidence;
    j["evidence_labels"] = std::vector<int>(ex.evidence_flags.begin(),
                                            ex.evidence_flags.end());
    j["label"] = label_name(ex.label);
    out << j.dump() << "\n";
  }
}

std::vector<GeneratedExample> load_jsonl(std::istream& in) {
  std::vector<GeneratedExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fail = [&](const std::string& what) {
      return std::runtime_error("load_jsonl: line " + std::to_string(lineno) +
                                ": " + what);
    };
    try {
      const auto j = nlohmann::json::parse(line);
      GeneratedExample ex;
      ex.id = j.at("id").get<std::string>();
      ex.claim = j.at("claim").get<std::string>();
      ex.evidence = j.at("evidence").get<std::vector<std::string>>();
      const auto labels = j.at("evidence_labels").get<std::vector<int>>();
      if (labels.size() != ex.evidence.size())
        throw fail("evidence_labels does not match evidence");
      for (int v : labels) {
        if (v != 0 && v != 1) throw fail("evidence_labels must be 0/1");
        ex.evidence_flags.push_back(static_cast<std::uint8_t>(v));
      }
      ex.label = parse_label(j.at("label").get<std::string>());
      out.push_back(std::move(ex));
    } catch (const nlohmann::json::exception& e) {
      throw fail(e.what());
    } catch (const std::invalid_argument& e) {
      throw fail(e.what());
    }
  }
  return out;
}

}  // namespace causalwalk
