#pragma once

#include <algorithm>
#include <functional>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "plaus/common.hpp"
#include "plaus/corpus.hpp"

namespace plaus {

enum class Orientation { SHARED_IS_PREMISE, SHARED_IS_HYPOTHESIS };

enum class Provenance { MNLI1, MNLI2_TRAIN, MNLI2_DEV, JOCI1, JOCI2, COPA, SYNTHETIC };

inline std::string provenance_name(Provenance p) {
  switch (p) {
    case Provenance::MNLI1: return "MNLI1";
    case Provenance::MNLI2_TRAIN: return "MNLI2_TRAIN";
    case Provenance::MNLI2_DEV: return "MNLI2_DEV";
    case Provenance::JOCI1: return "JOCI1";
    case Provenance::JOCI2: return "JOCI2";
    case Provenance::COPA: return "COPA";
    case Provenance::SYNTHETIC: return "SYNTHETIC";
  }
  return "?";
}

// One ranked comparison: `preferred` should outscore `dispreferred` in the
// context of `shared`. Orientation says which scoring slot `shared` fills.
struct Triplet {
  std::string premise_id;
  std::string shared;
  std::string preferred;
  std::string dispreferred;
  Orientation orientation = Orientation::SHARED_IS_PREMISE;
  int level_hi = 0;
  int level_lo = 0;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

struct TripletDataset {
  std::vector<Triplet> triplets;
  Scale scale = Scale::MNLI3;
  Provenance provenance = Provenance::SYNTHETIC;
};

using LevelPairPredicate = std::function<bool(int hi, int lo)>;

namespace detail {

struct PremiseGroupRaw {
  std::string premise_id;
  std::string premise;
  // (hypothesis, level) in input order, deduplicated.
  std::vector<std::pair<std::string, int>> hyps;
};

// Groups pairs by premise_id, ordered by premise_id; hypotheses keep input
// order with exact (text, level) duplicates dropped.
inline std::vector<PremiseGroupRaw> group_by_premise(const std::vector<LabeledPair>& pairs) {
  std::map<std::string, PremiseGroupRaw> groups;
  std::map<std::string, std::set<std::pair<std::string, int>>> seen;
  for (const auto& p : pairs) {
    auto& g = groups[p.premise_id];
    if (g.premise_id.empty()) {
      g.premise_id = p.premise_id;
      g.premise = p.premise;
    } else if (g.premise != p.premise) {
      throw ValidationError("premise_id '" + p.premise_id + "' has conflicting premise text");
    }
    if (seen[p.premise_id].insert({p.hypothesis, p.level.value}).second)
      g.hyps.emplace_back(p.hypothesis, p.level.value);
  }
  std::vector<PremiseGroupRaw> out;
  out.reserve(groups.size());
  for (auto& [_, g] : groups) out.push_back(std::move(g));
  return out;
}

inline void require_scale(const std::vector<LabeledPair>& pairs, Scale scale, const char* op) {
  for (const auto& p : pairs)
    if (p.level.scale != scale)
      throw ValidationError(std::string(op) + ": expected scale " + scale_name(scale) +
                            ", got " + scale_name(p.level.scale));
}

}  // namespace detail

// Emits one triplet per ordered hypothesis pair (h, h') within a premise
// where level(h) > level(h') and the predicate admits the level pair.
// Output order: premise_id, then input order of h, then input order of h'.
inline TripletDataset build_triplets(const std::vector<LabeledPair>& pairs,
                                     const LevelPairPredicate& predicate,
                                     Orientation orientation = Orientation::SHARED_IS_PREMISE,
                                     Provenance provenance = Provenance::SYNTHETIC) {
  TripletDataset out;
  out.provenance = provenance;
  if (!pairs.empty()) out.scale = pairs.front().level.scale;
  for (const auto& g : detail::group_by_premise(pairs)) {
    for (const auto& [h, lh] : g.hyps) {
      for (const auto& [h2, lh2] : g.hyps) {
        if (lh > lh2 && predicate(lh, lh2) && h != h2)
          out.triplets.push_back(
              {g.premise_id, g.premise, h, h2, orientation, lh, lh2});
      }
    }
  }
  return out;
}

// MNLI-1: all strictly ordered pairs (2/1, 2/0, 1/0).
inline TripletDataset recast_mnli1(const std::vector<LabeledPair>& pairs) {
  detail::require_scale(pairs, Scale::MNLI3, "recast_mnli1");
  auto ds = build_triplets(pairs, [](int, int) { return true; },
                           Orientation::SHARED_IS_PREMISE, Provenance::MNLI1);
  ds.scale = Scale::MNLI3;
  return ds;
}

struct Mnli2Split {
  TripletDataset train;
  TripletDataset dev;
  std::size_t skipped_premises = 0;  // premises missing a level class
};

// MNLI-2: only the 2/1 and 1/0 comparisons are kept. Per eligible premise a
// seeded fair coin sends the 2/1 triplet to one split and the 1/0 triplet to
// the other, so the neutral hypothesis changes role between splits.
inline Mnli2Split recast_mnli2_split(const std::vector<LabeledPair>& pairs, std::uint64_t seed) {
  detail::require_scale(pairs, Scale::MNLI3, "recast_mnli2_split");
  Mnli2Split out;
  out.train.scale = out.dev.scale = Scale::MNLI3;
  out.train.provenance = Provenance::MNLI2_TRAIN;
  out.dev.provenance = Provenance::MNLI2_DEV;
  Rng rng(seed);
  for (const auto& g : detail::group_by_premise(pairs)) {
    // First hypothesis at each level, in input order.
    const std::string* by_level[3] = {nullptr, nullptr, nullptr};
    for (const auto& [h, lv] : g.hyps)
      if (by_level[lv] == nullptr) by_level[lv] = &h;
    if (!by_level[0] || !by_level[1] || !by_level[2]) {
      ++out.skipped_premises;
      continue;
    }
    Triplet hi_mid{g.premise_id, g.premise, *by_level[2], *by_level[1],
                   Orientation::SHARED_IS_PREMISE, 2, 1};
    Triplet mid_lo{g.premise_id, g.premise, *by_level[1], *by_level[0],
                   Orientation::SHARED_IS_PREMISE, 1, 0};
    if (rng.coin()) {
      out.train.triplets.push_back(std::move(hi_mid));
      out.dev.triplets.push_back(std::move(mid_lo));
    } else {
      out.train.triplets.push_back(std::move(mid_lo));
      out.dev.triplets.push_back(std::move(hi_mid));
    }
  }
  return out;
}

enum class JociVariant { JOCI1, JOCI2 };

// JOCI-1: y > y' >= 3. JOCI-2: (y, y') in {(5,4), (4,3)}.
inline TripletDataset recast_joci(const std::vector<LabeledPair>& pairs, JociVariant variant) {
  detail::require_scale(pairs, Scale::JOCI5, "recast_joci");
  LevelPairPredicate pred;
  if (variant == JociVariant::JOCI1)
    pred = [](int hi, int lo) { return hi > lo && lo >= 3; };
  else
    pred = [](int hi, int lo) { return (hi == 5 && lo == 4) || (hi == 4 && lo == 3); };
  auto ds = build_triplets(pairs, pred, Orientation::SHARED_IS_PREMISE,
                           variant == JociVariant::JOCI1 ? Provenance::JOCI1 : Provenance::JOCI2);
  ds.scale = Scale::JOCI5;
  return ds;
}

// COPA: one triplet per item. EFFECT questions score the alternatives in
// the hypothesis slot; CAUSE questions score them in the premise slot.
inline TripletDataset recast_copa(const std::vector<CopaItem>& items) {
  TripletDataset out;
  out.scale = Scale::COPA2;
  out.provenance = Provenance::COPA;
  for (const auto& it : items) {
    Triplet t;
    t.premise_id = it.item_id;
    t.shared = it.given;
    t.preferred = it.correct == CopaAnswer::ALT1 ? it.alt1 : it.alt2;
    t.dispreferred = it.correct == CopaAnswer::ALT1 ? it.alt2 : it.alt1;
    t.orientation = it.question == CopaQuestion::EFFECT ? Orientation::SHARED_IS_PREMISE
                                                        : Orientation::SHARED_IS_HYPOTHESIS;
    t.level_hi = 1;
    t.level_lo = 0;
    out.triplets.push_back(std::move(t));
  }
  return out;
}

inline std::string serialize_triplets(const TripletDataset& ds) {
  std::string out;
  for (const auto& t : ds.triplets) {
    nlohmann::json j{{"premise_id", t.premise_id},
                     {"shared", t.shared},
                     {"preferred", t.preferred},
                     {"dispreferred", t.dispreferred},
                     {"orientation", t.orientation == Orientation::SHARED_IS_PREMISE ? "SP" : "SH"},
                     {"level_hi", t.level_hi},
                     {"level_lo", t.level_lo},
                     {"provenance", provenance_name(ds.provenance)}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

inline TripletDataset parse_triplets(std::istream& in) {
  TripletDataset out;
  std::string line;
  std::size_t line_no = 0;
  bool saw_any = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j = detail::parse_json_line(line, line_no);
    Triplet t;
    t.premise_id = detail::require_string(j, "premise_id", line_no);
    t.shared = detail::require_string(j, "shared", line_no);
    t.preferred = detail::require_string(j, "preferred", line_no);
    t.dispreferred = detail::require_string(j, "dispreferred", line_no);
    std::string orient = detail::require_string(j, "orientation", line_no);
    if (orient == "SP")
      t.orientation = Orientation::SHARED_IS_PREMISE;
    else if (orient == "SH")
      t.orientation = Orientation::SHARED_IS_HYPOTHESIS;
    else
      throw ValidationError("line " + std::to_string(line_no) + ": unknown orientation '" + orient + "'");
    t.level_hi = static_cast<int>(detail::require_int(j, "level_hi", line_no));
    t.level_lo = static_cast<int>(detail::require_int(j, "level_lo", line_no));
    if (t.level_hi <= t.level_lo)
      throw ValidationError("line " + std::to_string(line_no) + ": level_hi must exceed level_lo");
    if (t.preferred == t.dispreferred)
      throw ValidationError("line " + std::to_string(line_no) + ": preferred equals dispreferred");
    std::string prov = detail::require_string(j, "provenance", line_no);
    if (!saw_any) {
      saw_any = true;
      if (prov == "MNLI1") out.provenance = Provenance::MNLI1;
      else if (prov == "MNLI2_TRAIN") out.provenance = Provenance::MNLI2_TRAIN;
      else if (prov == "MNLI2_DEV") out.provenance = Provenance::MNLI2_DEV;
      else if (prov == "JOCI1") out.provenance = Provenance::JOCI1;
      else if (prov == "JOCI2") out.provenance = Provenance::JOCI2;
      else if (prov == "COPA") out.provenance = Provenance::COPA;
      else out.provenance = Provenance::SYNTHETIC;
    }
    out.triplets.push_back(std::move(t));
  }
  // Scale is recoverable from provenance and levels.
  switch (out.provenance) {
    case Provenance::JOCI1:
    case Provenance::JOCI2: out.scale = Scale::JOCI5; break;
    case Provenance::COPA: out.scale = Scale::COPA2; break;
    default: {
      bool joci_like = false;
      for (const auto& t : out.triplets)
        if (t.level_hi > 2) joci_like = true;
      out.scale = joci_like ? Scale::JOCI5 : Scale::MNLI3;
      break;
    }
  }
  return out;
}

// Two-column statistics table in the style of a dataset summary.
inline std::string dataset_stats_table(const std::vector<TripletDataset>& datasets) {
  std::string out = "dataset\ttriplets\n";
  for (const auto& ds : datasets)
    out += provenance_name(ds.provenance) + "\t" + std::to_string(ds.triplets.size()) + "\n";
  return out;
}

}  // namespace plaus
