#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "plaus/common.hpp"
#include "plaus/encoder.hpp"
#include "plaus/objectives.hpp"
#include "plaus/recast.hpp"

namespace plaus {

// A tokenized triplet ready for scoring; preferred/dispreferred already
// respect the triplet's orientation.
struct TokenizedTriplet {
  PairTokens preferred;
  PairTokens dispreferred;
  std::string id;
  int level_hi = 0;
  int level_lo = 0;
};

inline TokenizedTriplet tokenize_triplet(const Triplet& t, const Vocab& vocab) {
  TokenizedTriplet out;
  if (t.orientation == Orientation::SHARED_IS_PREMISE) {
    out.preferred = tokenize_pair(t.shared, t.preferred, vocab);
    out.dispreferred = tokenize_pair(t.shared, t.dispreferred, vocab);
  } else {
    out.preferred = tokenize_pair(t.preferred, t.shared, vocab);
    out.dispreferred = tokenize_pair(t.dispreferred, t.shared, vocab);
  }
  out.id = t.premise_id;
  out.level_hi = t.level_hi;
  out.level_lo = t.level_lo;
  return out;
}

inline std::vector<TokenizedTriplet> tokenize_dataset(const TripletDataset& ds,
                                                      const Vocab& vocab) {
  std::vector<TokenizedTriplet> out;
  out.reserve(ds.triplets.size());
  for (const auto& t : ds.triplets) out.push_back(tokenize_triplet(t, vocab));
  return out;
}

struct PairwiseAccuracy {
  double accuracy = 0.0;
  std::size_t n_triplets = 0;
  std::size_t tie_count = 0;
};

// A triplet counts as correct only when the preferred side scores strictly
// higher; exact ties are incorrect and reported separately.
inline PairwiseAccuracy pairwise_accuracy(const EncoderParams& params,
                                          const std::vector<TokenizedTriplet>& triplets) {
  if (triplets.empty()) throw ValidationError("pairwise_accuracy: empty dataset");
  PairwiseAccuracy out;
  out.n_triplets = triplets.size();
  std::size_t correct = 0;
  for (const auto& t : triplets) {
    double sp = forward_pair(t.preferred, params);
    double sd = forward_pair(t.dispreferred, params);
    if (sp > sd)
      ++correct;
    else if (sp == sd)
      ++out.tie_count;
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(out.n_triplets);
  return out;
}

inline PairwiseAccuracy pairwise_accuracy(const EncoderParams& params, const Vocab& vocab,
                                          const TripletDataset& ds) {
  return pairwise_accuracy(params, tokenize_dataset(ds, vocab));
}

// Softmax normalization of each set's raw scores (the per-premise analysis
// view of the scores).
inline std::vector<std::vector<double>> normalize_per_premise(
    const std::vector<CandidateSet>& sets) {
  std::vector<std::vector<double>> out;
  out.reserve(sets.size());
  for (const auto& s : sets) out.push_back(softmax(s.scores));
  return out;
}

struct LevelHistogram {
  int level = 0;
  std::vector<std::size_t> counts;  // equal-width bins over [0, 1]
  double middle_mass = 0.0;         // fraction of scores strictly in (0.1, 0.9)
  std::size_t total = 0;
};

struct EvalReport {
  double pairwise_accuracy = 0.0;
  std::size_t n_triplets = 0;
  std::size_t tie_count = 0;
  std::size_t bins = 0;
  std::vector<LevelHistogram> histograms;  // one per gold level, ascending

  const LevelHistogram* level_histogram(int level) const {
    for (const auto& h : histograms)
      if (h.level == level) return &h;
    return nullptr;
  }
};

// One premise with labeled candidate hypotheses, the input unit of the
// distribution report.
struct PremiseGroup {
  std::string premise_id;
  std::string premise;
  std::vector<std::string> hypotheses;
  std::vector<PlausibilityLevel> levels;
};

inline std::vector<PremiseGroup> group_pairs(const std::vector<LabeledPair>& pairs) {
  std::map<std::string, PremiseGroup> groups;
  for (const auto& p : pairs) {
    auto& g = groups[p.premise_id];
    if (g.premise_id.empty()) {
      g.premise_id = p.premise_id;
      g.premise = p.premise;
    } else if (g.premise != p.premise) {
      throw ValidationError("group_pairs: conflicting premise text for '" + p.premise_id + "'");
    }
    g.hypotheses.push_back(p.hypothesis);
    g.levels.push_back(p.level);
  }
  std::vector<PremiseGroup> out;
  out.reserve(groups.size());
  for (auto& [_, g] : groups) out.push_back(std::move(g));
  return out;
}

inline std::size_t histogram_bin(double value, std::size_t bins) {
  // [k/bins, (k+1)/bins) per bin; 1.0 folds into the top bin.
  auto k = static_cast<std::size_t>(std::floor(value * static_cast<double>(bins)));
  return std::min(k, bins - 1);
}

// Scores every candidate, normalizes per premise, and buckets the
// normalized scores by gold level. Pairwise accuracy is computed over all
// within-premise pairs with strictly ordered gold levels.
inline EvalReport distribution_report(const EncoderParams& params, const Vocab& vocab,
                                      const std::vector<PremiseGroup>& sets, std::size_t bins) {
  if (bins < 2) throw ValidationError("distribution_report: bins must be >= 2");
  EvalReport report;
  report.bins = bins;
  std::map<int, LevelHistogram> by_level;
  std::size_t correct = 0;
  for (const auto& g : sets) {
    if (g.hypotheses.empty()) continue;
    std::vector<double> scores(g.hypotheses.size());
    for (std::size_t i = 0; i < g.hypotheses.size(); ++i)
      scores[i] = forward_pair(tokenize_pair(g.premise, g.hypotheses[i], vocab), params);
    std::vector<double> norm = softmax(scores);
    for (std::size_t i = 0; i < norm.size(); ++i) {
      auto& h = by_level[g.levels[i].value];
      h.level = g.levels[i].value;
      if (h.counts.empty()) h.counts.assign(bins, 0);
      ++h.counts[histogram_bin(norm[i], bins)];
      ++h.total;
      if (norm[i] > 0.1 && norm[i] < 0.9) h.middle_mass += 1.0;
    }
    for (std::size_t i = 0; i < scores.size(); ++i) {
      for (std::size_t j = 0; j < scores.size(); ++j) {
        if (g.levels[i].value <= g.levels[j].value) continue;
        ++report.n_triplets;
        if (scores[i] > scores[j])
          ++correct;
        else if (scores[i] == scores[j])
          ++report.tie_count;
      }
    }
  }
  for (auto& [_, h] : by_level) {
    if (h.total > 0) h.middle_mass /= static_cast<double>(h.total);
    report.histograms.push_back(std::move(h));
  }
  if (report.n_triplets > 0)
    report.pairwise_accuracy = static_cast<double>(correct) / static_cast<double>(report.n_triplets);
  return report;
}

inline std::string histogram_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "gold_level,bin_lo,bin_hi,count\n";
  const double w = 1.0 / static_cast<double>(report.bins);
  for (const auto& h : report.histograms)
    for (std::size_t k = 0; k < h.counts.size(); ++k)
      out << h.level << ',' << static_cast<double>(k) * w << ','
          << static_cast<double>(k + 1) * w << ',' << h.counts[k] << '\n';
  return out.str();
}

inline std::string summary_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "metric,value\n";
  out << "pairwise_accuracy," << report.pairwise_accuracy << '\n';
  out << "n_triplets," << report.n_triplets << '\n';
  out << "tie_count," << report.tie_count << '\n';
  for (const auto& h : report.histograms)
    out << "middle_mass_level_" << h.level << ',' << h.middle_mass << '\n';
  return out.str();
}

// Grouped-bar rendering of the per-level histograms; plain geometry, no
// external renderer.
inline std::string histogram_svg(const EvalReport& report) {
  const double width = 900, height = 420, margin = 50;
  const char* palette[] = {"#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee"};
  std::size_t max_count = 1;
  for (const auto& h : report.histograms)
    for (std::size_t c : h.counts) max_count = std::max(max_count, c);
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const double plot_w = width - 2 * margin, plot_h = height - 2 * margin;
  const std::size_t series = std::max<std::size_t>(1, report.histograms.size());
  const double group_w = plot_w / static_cast<double>(report.bins);
  const double bar_w = group_w / static_cast<double>(series + 1);
  for (std::size_t s = 0; s < report.histograms.size(); ++s) {
    const auto& h = report.histograms[s];
    const char* color = palette[s % 5];
    for (std::size_t k = 0; k < h.counts.size(); ++k) {
      double bh = plot_h * static_cast<double>(h.counts[k]) / static_cast<double>(max_count);
      double x = margin + group_w * static_cast<double>(k) + bar_w * static_cast<double>(s);
      double y = margin + plot_h - bh;
      out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << bar_w << "\" height=\"" << bh
          << "\" fill=\"" << color << "\"><title>level " << h.level << " bin " << k << ": "
          << h.counts[k] << "</title></rect>\n";
    }
    out << "<text x=\"" << margin + 90 * static_cast<double>(s) << "\" y=\"" << margin - 12
        << "\" fill=\"" << color << "\" font-size=\"14\">level " << h.level << "</text>\n";
  }
  out << "<line x1=\"" << margin << "\" y1=\"" << margin + plot_h << "\" x2=\"" << width - margin
      << "\" y2=\"" << margin + plot_h << "\" stroke=\"black\"/>\n";
  out << "</svg>\n";
  return out.str();
}

}  // namespace plaus
