#pragma once

#include <cmath>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "plaus/common.hpp"
#include "plaus/encoder.hpp"
#include "plaus/objectives.hpp"

namespace plaus {

// Gradients shaped like EncoderParams. The embedding gradient is dense but
// only rows listed in touched_rows carry non-zero values.
struct Gradients {
  Matrix embeddings;
  Matrix w1;
  std::vector<double> b1;
  std::vector<double> w2;
  double b2 = 0.0;
  std::set<int> touched_rows;

  static Gradients zeros_like(const EncoderParams& p) {
    Gradients g;
    g.embeddings = Matrix(p.embeddings.rows, p.embeddings.cols);
    g.w1 = Matrix(p.w1.rows, p.w1.cols);
    g.b1.assign(p.b1.size(), 0.0);
    g.w2.assign(p.w2.size(), 0.0);
    return g;
  }
};

// Accumulates d(weight * score(tokens)) into grads, reusing the cached
// forward intermediates.
inline void backward_pair(const PairTokens& tokens, const ForwardCache& cache, double dscore,
                          const EncoderParams& params, Gradients& grads) {
  const std::size_t d = params.d;
  const std::size_t d_h = params.d_h;

  // Output layer.
  grads.b2 += dscore;
  std::vector<double> dpre(d_h);  // gradient at the tanh pre-activation
  for (std::size_t j = 0; j < d_h; ++j) {
    double h = cache.hidden[j];
    grads.w2[j] += dscore * h;
    dpre[j] = dscore * params.w2[j] * (1.0 - h * h);
  }

  // Dense layer.
  std::vector<double> dfeature(3 * d, 0.0);
  for (std::size_t j = 0; j < d_h; ++j) {
    grads.b1[j] += dpre[j];
    for (std::size_t i = 0; i < 3 * d; ++i) {
      grads.w1.at(i, j) += cache.feature[i] * dpre[j];
      dfeature[i] += params.w1.at(i, j) * dpre[j];
    }
  }

  // Mean pooling back to embedding rows.
  auto unpool = [&](std::size_t b, std::size_t e, std::size_t offset) {
    if (e <= b) return;
    const double inv = 1.0 / static_cast<double>(e - b);
    for (std::size_t i = b; i < e; ++i) {
      int id = tokens.ids[i];
      grads.touched_rows.insert(id);
      double* row = &grads.embeddings.data[static_cast<std::size_t>(id) * d];
      for (std::size_t k = 0; k < d; ++k) row[k] += dfeature[offset + k] * inv;
    }
  };
  unpool(0, tokens.ids.size(), 0);
  unpool(tokens.premise_begin, tokens.premise_end, d);
  unpool(tokens.hypothesis_begin, tokens.hypothesis_end, 2 * d);
}

// One margin training unit: a tokenized (preferred, dispreferred) pair.
struct MarginUnit {
  PairTokens preferred;
  PairTokens dispreferred;
  std::string id;
};

// One log-loss training unit: a tokenized candidate set.
struct LogUnit {
  std::vector<PairTokens> candidates;
  std::size_t correct_index = 0;
  std::string id;
};

struct Batch {
  std::vector<LogUnit> log_units;
  std::vector<MarginUnit> margin_units;

  std::size_t size() const { return log_units.size() + margin_units.size(); }
};

struct LossAndGradients {
  double loss = 0.0;
  Gradients grads;
};

// Mean loss over the batch plus its exact gradient through the full forward
// computation. Units are processed left to right for bitwise determinism.
inline LossAndGradients loss_and_gradients(const Batch& batch, const EncoderParams& params,
                                           const ObjectiveSpec& spec) {
  spec.validate();
  if (batch.size() == 0) throw ValidationError("loss_and_gradients: empty batch");
  if (!batch.log_units.empty() && !batch.margin_units.empty())
    throw ValidationError("loss_and_gradients: mixed unit kinds");
  if (spec.kind == ObjectiveKind::LOG && !batch.margin_units.empty())
    throw ValidationError("loss_and_gradients: LOG objective given margin units");
  if (spec.kind == ObjectiveKind::MARGIN && !batch.log_units.empty())
    throw ValidationError("loss_and_gradients: MARGIN objective given log units");

  LossAndGradients out;
  out.grads = Gradients::zeros_like(params);
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  if (spec.kind == ObjectiveKind::MARGIN) {
    for (const auto& unit : batch.margin_units) {
      ForwardCache cp, cd;
      forward_pair(unit.preferred, params, &cp);
      forward_pair(unit.dispreferred, params, &cd);
      // The output bias shifts both scores equally and cancels from the
      // hinge gap; computing the loss from the pre-bias scores makes that
      // cancellation exact.
      auto r = margin_pair_loss(cp.dot, cd.dot, spec.xi);
      out.loss += r.loss * inv_n;
      if (r.dpref != 0.0) backward_pair(unit.preferred, cp, r.dpref * inv_n, params, out.grads);
      if (r.ddisp != 0.0) backward_pair(unit.dispreferred, cd, r.ddisp * inv_n, params, out.grads);
      if (!std::isfinite(out.loss))
        throw NumericError("loss_and_gradients: non-finite loss at unit '" + unit.id + "'");
    }
  } else {
    for (const auto& unit : batch.log_units) {
      std::vector<ForwardCache> caches(unit.candidates.size());
      std::vector<double> scores(unit.candidates.size());
      for (std::size_t i = 0; i < unit.candidates.size(); ++i) {
        // Softmax is shift-invariant, so the pre-bias score gives the same
        // loss while keeping it exactly independent of the output bias.
        forward_pair(unit.candidates[i], params, &caches[i]);
        scores[i] = caches[i].dot;
      }
      auto r = softmax_log_loss(scores, unit.correct_index);
      out.loss += r.loss * inv_n;
      for (std::size_t i = 0; i < unit.candidates.size(); ++i)
        if (r.dloss_dscores[i] != 0.0)
          backward_pair(unit.candidates[i], caches[i], r.dloss_dscores[i] * inv_n, params,
                        out.grads);
      if (!std::isfinite(out.loss))
        throw NumericError("loss_and_gradients: non-finite loss at unit '" + unit.id + "'");
    }
  }
  return out;
}

// Parameter draw for gradient checking. Entries are uniform in
// [-0.5, 0.5]: large enough that activations leave the linear regime and
// gradients sit well above the central-difference noise floor, which the
// training-scale init (0.05) does not guarantee.
inline EncoderParams gradcheck_params(std::size_t vocab_size, std::size_t d, std::size_t d_h,
                                      std::uint64_t seed) {
  EncoderParams p = init_params(vocab_size, d, d_h, seed);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
  for (double& v : p.embeddings.data) v = rng.next_real(-0.5, 0.5);
  for (double& v : p.w1.data) v = rng.next_real(-0.5, 0.5);
  for (double& v : p.b1) v = rng.next_real(-0.5, 0.5);
  for (double& v : p.w2) v = rng.next_real(-0.5, 0.5);
  p.b2 = rng.next_real(-0.5, 0.5);
  return p;
}

// Central-difference verification of analytic gradients. Checks every W1 /
// b1 / w2 / b2 coordinate and the embedding rows touched by the batch, and
// returns the maximum relative error
//   |fd - g| / max(1e-8, |fd| + |g|).
inline double finite_difference_check(const std::function<double(const EncoderParams&)>& loss_fn,
                                      const EncoderParams& params, const Gradients& grads,
                                      double eps) {
  if (!(eps > 0)) throw ValidationError("finite_difference_check: eps must be positive");
  EncoderParams work = params;
  double max_rel = 0.0;
  auto probe = [&](double* coord, double analytic) {
    const double saved = *coord;
    *coord = saved + eps;
    double up = loss_fn(work);
    *coord = saved - eps;
    double down = loss_fn(work);
    *coord = saved;
    double fd = (up - down) / (2.0 * eps);
    double rel = std::abs(fd - analytic) / std::max(1e-8, std::abs(fd) + std::abs(analytic));
    max_rel = std::max(max_rel, rel);
  };
  for (int row : grads.touched_rows)
    for (std::size_t k = 0; k < work.embeddings.cols; ++k)
      probe(&work.embeddings.at(static_cast<std::size_t>(row), k),
            grads.embeddings.at(static_cast<std::size_t>(row), k));
  for (std::size_t i = 0; i < work.w1.data.size(); ++i) probe(&work.w1.data[i], grads.w1.data[i]);
  for (std::size_t j = 0; j < work.b1.size(); ++j) probe(&work.b1[j], grads.b1[j]);
  for (std::size_t j = 0; j < work.w2.size(); ++j) probe(&work.w2[j], grads.w2[j]);
  probe(&work.b2, grads.b2);
  return max_rel;
}

}  // namespace plaus
