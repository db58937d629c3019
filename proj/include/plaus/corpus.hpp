#pragma once

#include <algorithm>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "plaus/common.hpp"

namespace plaus {

enum class Scale { MNLI3, JOCI5, COPA2 };

inline std::string scale_name(Scale s) {
  switch (s) {
    case Scale::MNLI3: return "MNLI3";
    case Scale::JOCI5: return "JOCI5";
    case Scale::COPA2: return "COPA2";
  }
  return "?";
}

inline std::optional<Scale> scale_from_name(const std::string& s) {
  if (s == "MNLI3") return Scale::MNLI3;
  if (s == "JOCI5") return Scale::JOCI5;
  if (s == "COPA2") return Scale::COPA2;
  return std::nullopt;
}

// Ordinal plausibility label; larger value = more plausible within one scale.
struct PlausibilityLevel {
  int value = 0;
  Scale scale = Scale::MNLI3;

  bool valid() const {
    switch (scale) {
      case Scale::MNLI3: return value >= 0 && value <= 2;
      case Scale::JOCI5: return value >= 1 && value <= 5;
      case Scale::COPA2: return value == 0 || value == 1;
    }
    return false;
  }

  friend bool operator==(const PlausibilityLevel&, const PlausibilityLevel&) = default;
};

struct LabeledPair {
  std::string premise_id;
  std::string premise;
  std::string hypothesis;
  PlausibilityLevel level;

  friend bool operator==(const LabeledPair&, const LabeledPair&) = default;
};

enum class CopaQuestion { CAUSE, EFFECT };
enum class CopaAnswer { ALT1, ALT2 };

struct CopaItem {
  std::string item_id;
  std::string given;
  std::string alt1;
  std::string alt2;
  CopaQuestion question = CopaQuestion::CAUSE;
  CopaAnswer correct = CopaAnswer::ALT1;
};

enum class SynthMode { SEPARABLE, ADVERSARIAL_NEUTRAL };

struct SynthSpec {
  std::size_t n_premises = 0;
  std::vector<PlausibilityLevel> levels_per_premise;
  std::size_t vocab_size = 0;
  std::size_t tokens_per_text = 0;
  SynthMode mode = SynthMode::SEPARABLE;

  void validate() const {
    if (n_premises == 0) throw ValidationError("synth: n_premises must be positive");
    if (levels_per_premise.empty()) throw ValidationError("synth: levels_per_premise empty");
    if (tokens_per_text == 0) throw ValidationError("synth: tokens_per_text must be positive");
    Scale scale = levels_per_premise.front().scale;
    std::vector<int> values;
    for (const auto& lv : levels_per_premise) {
      if (lv.scale != scale) throw ValidationError("synth: mixed scales in levels_per_premise");
      if (!lv.valid()) throw ValidationError("synth: level out of scale range");
      values.push_back(lv.value);
    }
    std::sort(values.begin(), values.end());
    if (std::adjacent_find(values.begin(), values.end()) != values.end())
      throw ValidationError("synth: duplicate levels in levels_per_premise");
    if (vocab_size < 3 * levels_per_premise.size())
      throw ValidationError("synth: vocab_size must be >= 3 x number of distinct levels");
    if (mode == SynthMode::ADVERSARIAL_NEUTRAL && levels_per_premise.size() != 3)
      throw ValidationError("synth: ADVERSARIAL_NEUTRAL requires exactly 3 levels");
  }
};

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

namespace detail {

// Tracks premise_id -> (premise text, scale) consistency while parsing.
class PremiseRegistry {
 public:
  void check(const LabeledPair& p, std::size_t line_no) {
    auto [it, inserted] = seen_.try_emplace(p.premise_id, p.premise, p.level.scale);
    if (inserted) return;
    if (it->second.first != p.premise)
      throw ValidationError("line " + std::to_string(line_no) + ": premise_id '" + p.premise_id +
                            "' has conflicting premise text");
    if (it->second.second != p.level.scale)
      throw ValidationError("line " + std::to_string(line_no) + ": premise_id '" + p.premise_id +
                            "' has conflicting scale");
  }

 private:
  std::map<std::string, std::pair<std::string, Scale>> seen_;
};

inline nlohmann::json parse_json_line(const std::string& line, std::size_t line_no) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded())
    throw ParseError("line " + std::to_string(line_no) + ": malformed JSON");
  if (!j.is_object())
    throw ParseError("line " + std::to_string(line_no) + ": expected a JSON object");
  return j;
}

inline std::string require_string(const nlohmann::json& j, const char* key, std::size_t line_no) {
  if (!j.contains(key) || !j[key].is_string())
    throw ParseError("line " + std::to_string(line_no) + ": missing string field '" + key + "'");
  return j[key].get<std::string>();
}

inline long require_int(const nlohmann::json& j, const char* key, std::size_t line_no) {
  if (!j.contains(key) || !j[key].is_number_integer())
    throw ParseError("line " + std::to_string(line_no) + ": missing integer field '" + key + "'");
  return j[key].get<long>();
}

}  // namespace detail

// Parses the newline-delimited NLI pair schema:
//   {"premise_id", "premise", "hypothesis", "label", "scale"}
inline std::vector<LabeledPair> parse_nli_records(std::istream& in) {
  std::vector<LabeledPair> out;
  detail::PremiseRegistry registry;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j = detail::parse_json_line(line, line_no);
    LabeledPair p;
    p.premise_id = detail::require_string(j, "premise_id", line_no);
    p.premise = trim(detail::require_string(j, "premise", line_no));
    p.hypothesis = trim(detail::require_string(j, "hypothesis", line_no));
    long label = detail::require_int(j, "label", line_no);
    std::string scale_str = detail::require_string(j, "scale", line_no);
    auto scale = scale_from_name(scale_str);
    if (!scale)
      throw ValidationError("line " + std::to_string(line_no) + ": unknown scale '" + scale_str + "'");
    p.level = PlausibilityLevel{static_cast<int>(label), *scale};
    if (!p.level.valid())
      throw ValidationError("line " + std::to_string(line_no) + ": label " + std::to_string(label) +
                            " out of range for scale " + scale_str);
    if (p.premise.empty())
      throw ValidationError("line " + std::to_string(line_no) + ": empty premise");
    if (p.hypothesis.empty())
      throw ValidationError("line " + std::to_string(line_no) + ": empty hypothesis");
    registry.check(p, line_no);
    out.push_back(std::move(p));
  }
  return out;
}

inline std::string serialize_nli_records(const std::vector<LabeledPair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    nlohmann::json j{{"premise_id", p.premise_id},
                     {"premise", p.premise},
                     {"hypothesis", p.hypothesis},
                     {"label", p.level.value},
                     {"scale", scale_name(p.level.scale)}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

// Parses the COPA schema:
//   {"item_id", "premise", "choice1", "choice2", "question", "label"}
inline std::vector<CopaItem> parse_copa_records(std::istream& in) {
  std::vector<CopaItem> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j = detail::parse_json_line(line, line_no);
    CopaItem item;
    item.item_id = detail::require_string(j, "item_id", line_no);
    item.given = trim(detail::require_string(j, "premise", line_no));
    item.alt1 = trim(detail::require_string(j, "choice1", line_no));
    item.alt2 = trim(detail::require_string(j, "choice2", line_no));
    std::string question = detail::require_string(j, "question", line_no);
    if (question == "cause")
      item.question = CopaQuestion::CAUSE;
    else if (question == "effect")
      item.question = CopaQuestion::EFFECT;
    else
      throw ValidationError("line " + std::to_string(line_no) + ": unknown question '" + question + "'");
    long label = detail::require_int(j, "label", line_no);
    if (label != 1 && label != 2)
      throw ValidationError("line " + std::to_string(line_no) + ": label must be 1 or 2");
    item.correct = label == 1 ? CopaAnswer::ALT1 : CopaAnswer::ALT2;
    if (item.given.empty() || item.alt1.empty() || item.alt2.empty())
      throw ValidationError("line " + std::to_string(line_no) + ": empty text field");
    if (item.alt1 == item.alt2)
      throw ValidationError("line " + std::to_string(line_no) + ": identical choices");
    out.push_back(std::move(item));
  }
  return out;
}

inline std::string serialize_copa_records(const std::vector<CopaItem>& items) {
  std::string out;
  for (const auto& it : items) {
    nlohmann::json j{{"item_id", it.item_id},
                     {"premise", it.given},
                     {"choice1", it.alt1},
                     {"choice2", it.alt2},
                     {"question", it.question == CopaQuestion::CAUSE ? "cause" : "effect"},
                     {"label", it.correct == CopaAnswer::ALT1 ? 1 : 2}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

namespace detail {

inline std::string make_text(Rng& rng, std::size_t pool_lo, std::size_t pool_hi,
                             std::size_t n_tokens) {
  std::string text;
  for (std::size_t i = 0; i < n_tokens; ++i) {
    if (i > 0) text += ' ';
    text += 'w';
    text += std::to_string(pool_lo + rng.below(pool_hi - pool_lo));
  }
  return text;
}

}  // namespace detail

// Deterministic synthetic corpus generator. The token universe w0..w{V-1}
// is partitioned into one slice for premise text plus one reserved slice
// per level. In SEPARABLE mode each hypothesis draws only from its level's
// slice. In ADVERSARIAL_NEUTRAL mode the middle level instead reuses a
// small pool of hypothesis sentences shared across all premises, so the
// middle hypothesis text alone carries no premise-specific signal.
inline std::vector<LabeledPair> generate_synthetic_corpus(const SynthSpec& spec,
                                                          std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);

  std::vector<PlausibilityLevel> levels = spec.levels_per_premise;
  std::sort(levels.begin(), levels.end(),
            [](const auto& a, const auto& b) { return a.value > b.value; });

  const std::size_t n_slices = levels.size() + 1;  // premise slice + one per level
  const std::size_t slice = spec.vocab_size / n_slices;
  auto slice_range = [&](std::size_t idx) {
    return std::pair<std::size_t, std::size_t>{idx * slice, (idx + 1) * slice};
  };

  // Shared middle-hypothesis pool, fixed before premise sampling so pool
  // contents depend only on (spec, seed).
  std::vector<std::string> mid_pool;
  std::size_t mid_index = levels.size() / 2;
  if (spec.mode == SynthMode::ADVERSARIAL_NEUTRAL) {
    std::size_t pool_size = std::max<std::size_t>(4, spec.n_premises / 50);
    auto [lo, hi] = slice_range(1 + mid_index);
    for (std::size_t i = 0; i < pool_size; ++i)
      mid_pool.push_back(detail::make_text(rng, lo, hi, spec.tokens_per_text));
  }

  std::vector<LabeledPair> out;
  out.reserve(spec.n_premises * levels.size());
  for (std::size_t pi = 0; pi < spec.n_premises; ++pi) {
    auto [plo, phi] = slice_range(0);
    std::string premise = detail::make_text(rng, plo, phi, spec.tokens_per_text);
    std::string premise_id = "sp" + std::to_string(pi);
    for (std::size_t li = 0; li < levels.size(); ++li) {
      LabeledPair p;
      p.premise_id = premise_id;
      p.premise = premise;
      p.level = levels[li];
      if (spec.mode == SynthMode::ADVERSARIAL_NEUTRAL && li == mid_index) {
        p.hypothesis = mid_pool[rng.below(mid_pool.size())];
      } else {
        auto [lo, hi] = slice_range(1 + li);
        p.hypothesis = detail::make_text(rng, lo, hi, spec.tokens_per_text);
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

// Reserved token-id range for a level of a SEPARABLE corpus; exposed so
// tests can build lexical-overlap oracles against the generator.
inline std::pair<std::size_t, std::size_t> synthetic_level_slice(const SynthSpec& spec,
                                                                 PlausibilityLevel level) {
  spec.validate();
  std::vector<PlausibilityLevel> levels = spec.levels_per_premise;
  std::sort(levels.begin(), levels.end(),
            [](const auto& a, const auto& b) { return a.value > b.value; });
  const std::size_t slice = spec.vocab_size / (levels.size() + 1);
  for (std::size_t li = 0; li < levels.size(); ++li)
    if (levels[li].value == level.value) return {(1 + li) * slice, (2 + li) * slice};
  throw ValidationError("level not in spec");
}

}  // namespace plaus
