#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "plaus/common.hpp"
#include "plaus/corpus.hpp"

namespace plaus {

enum class ObjectiveKind { LOG, MARGIN };

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::MARGIN;
  double xi = 0.2;  // MARGIN only

  void validate() const {
    if (kind == ObjectiveKind::MARGIN && !(xi > 0))
      throw ValidationError("objective: margin xi must be positive");
  }
};

// One premise with its scored candidate hypotheses; the unit of the softmax
// normalization and of per-premise analysis.
struct CandidateSet {
  std::string premise_id;
  std::vector<std::string> candidates;
  std::vector<double> scores;
  std::size_t correct_index = 0;
  std::vector<PlausibilityLevel> gold_levels;
};

// Stabilized softmax over raw scores.
inline std::vector<double> softmax(const std::vector<double>& scores) {
  if (scores.empty()) throw ValidationError("softmax: empty score list");
  double m = scores[0];
  for (double s : scores) {
    if (!std::isfinite(s)) throw NumericError("softmax: non-finite score");
    m = std::max(m, s);
  }
  std::vector<double> p(scores.size());
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp(scores[i] - m);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

struct LogLossResult {
  double loss = 0.0;
  std::vector<double> dloss_dscores;
};

// Cross-entropy of the softmax over a candidate set:
// loss = -ln p_correct, d loss / d F_i = p_i - [i == correct].
inline LogLossResult softmax_log_loss(const std::vector<double>& scores,
                                      std::size_t correct_index) {
  if (correct_index >= scores.size())
    throw ValidationError("softmax_log_loss: correct_index out of range");
  LogLossResult out;
  out.dloss_dscores = softmax(scores);
  out.loss = -std::log(out.dloss_dscores[correct_index]);
  for (std::size_t i = 0; i < scores.size(); ++i)
    out.dloss_dscores[i] -= (i == correct_index) ? 1.0 : 0.0;
  if (!std::isfinite(out.loss)) throw NumericError("softmax_log_loss: non-finite loss");
  return out;
}

inline LogLossResult softmax_log_loss(const CandidateSet& set) {
  return softmax_log_loss(set.scores, set.correct_index);
}

struct MarginLossResult {
  double loss = 0.0;
  double dpref = 0.0;
  double ddisp = 0.0;
};

// Hinge on the score gap: loss = max(0, xi - pref + disp). The derivative
// at the exact kink is taken as 0.
inline MarginLossResult margin_pair_loss(double score_pref, double score_disp, double xi) {
  if (!(xi > 0)) throw ValidationError("margin_pair_loss: xi must be positive");
  if (!std::isfinite(score_pref) || !std::isfinite(score_disp))
    throw NumericError("margin_pair_loss: non-finite score");
  MarginLossResult out;
  // Gap first, so a common shift of both scores cancels exactly.
  double raw = xi - (score_pref - score_disp);
  if (raw > 0) {
    out.loss = raw;
    out.dpref = -1.0;
    out.ddisp = 1.0;
  }
  return out;
}

// Mean of per-unit margin losses.
inline double batch_margin_objective(const std::vector<std::pair<double, double>>& score_pairs,
                                     double xi) {
  if (score_pairs.empty()) throw ValidationError("batch_objective: empty batch");
  double sum = 0.0;
  for (const auto& [pref, disp] : score_pairs) sum += margin_pair_loss(pref, disp, xi).loss;
  return sum / static_cast<double>(score_pairs.size());
}

// Mean of per-set log losses.
inline double batch_log_objective(const std::vector<CandidateSet>& sets) {
  if (sets.empty()) throw ValidationError("batch_objective: empty batch");
  double sum = 0.0;
  for (const auto& s : sets) sum += softmax_log_loss(s).loss;
  return sum / static_cast<double>(sets.size());
}

}  // namespace plaus
