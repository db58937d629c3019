#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "plaus/autodiff.hpp"
#include "plaus/common.hpp"
#include "plaus/encoder.hpp"
#include "plaus/evaluation.hpp"
#include "plaus/objectives.hpp"
#include "plaus/recast.hpp"

namespace plaus {

struct TrainConfig {
  ObjectiveSpec objective;
  double learning_rate = 1e-3;
  std::size_t max_epochs = 50;
  std::size_t batch_size = 32;
  std::size_t patience = 5;    // consecutive non-improving evaluations before stop
  std::size_t eval_every = 50; // optimizer steps between dev evaluations
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const {
    objective.validate();
    if (!(learning_rate > 0)) throw ValidationError("config: learning_rate must be positive");
    if (max_epochs < 1) throw ValidationError("config: max_epochs must be >= 1");
    if (batch_size < 1) throw ValidationError("config: batch_size must be >= 1");
    if (eval_every < 1) throw ValidationError("config: eval_every must be >= 1");
    if (!(beta1 > 0 && beta1 < 1 && beta2 > 0 && beta2 < 1))
      throw ValidationError("config: betas must lie in (0, 1)");
    if (!(adam_eps > 0)) throw ValidationError("config: adam epsilon must be positive");
  }
};

struct AdamState {
  Matrix m_embeddings, v_embeddings;
  Matrix m_w1, v_w1;
  std::vector<double> m_b1, v_b1;
  std::vector<double> m_w2, v_w2;
  double m_b2 = 0.0, v_b2 = 0.0;
  std::size_t t = 0;

  static AdamState zeros_like(const EncoderParams& p) {
    AdamState s;
    s.m_embeddings = Matrix(p.embeddings.rows, p.embeddings.cols);
    s.v_embeddings = Matrix(p.embeddings.rows, p.embeddings.cols);
    s.m_w1 = Matrix(p.w1.rows, p.w1.cols);
    s.v_w1 = Matrix(p.w1.rows, p.w1.cols);
    s.m_b1.assign(p.b1.size(), 0.0);
    s.v_b1.assign(p.b1.size(), 0.0);
    s.m_w2.assign(p.w2.size(), 0.0);
    s.v_w2.assign(p.w2.size(), 0.0);
    return s;
  }
};

namespace detail {

inline void adam_update_coord(double& theta, double g, double& m, double& v, double lr,
                              double bc1, double bc2, const TrainConfig& cfg) {
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
  double m_hat = m / bc1;
  double v_hat = v / bc2;
  theta -= lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
  if (!std::isfinite(theta)) throw NumericError("adam_step: non-finite parameter update");
}

}  // namespace detail

// One bias-corrected Adam update. Embedding rows never touched by any
// gradient keep exactly-zero moments; only touched rows are visited.
inline void adam_step(EncoderParams& params, const Gradients& grads, AdamState& state,
                      const TrainConfig& cfg) {
  cfg.validate();
  if (!params.embeddings.same_shape(grads.embeddings) || !params.w1.same_shape(grads.w1))
    throw ValidationError("adam_step: shape mismatch");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  const double lr = cfg.learning_rate;
  const std::size_t d = params.embeddings.cols;
  for (int row : grads.touched_rows) {
    auto r = static_cast<std::size_t>(row);
    for (std::size_t k = 0; k < d; ++k)
      detail::adam_update_coord(params.embeddings.at(r, k), grads.embeddings.at(r, k),
                                state.m_embeddings.at(r, k), state.v_embeddings.at(r, k), lr, bc1,
                                bc2, cfg);
  }
  for (std::size_t i = 0; i < params.w1.data.size(); ++i)
    detail::adam_update_coord(params.w1.data[i], grads.w1.data[i], state.m_w1.data[i],
                              state.v_w1.data[i], lr, bc1, bc2, cfg);
  for (std::size_t j = 0; j < params.b1.size(); ++j)
    detail::adam_update_coord(params.b1[j], grads.b1[j], state.m_b1[j], state.v_b1[j], lr, bc1,
                              bc2, cfg);
  for (std::size_t j = 0; j < params.w2.size(); ++j)
    detail::adam_update_coord(params.w2[j], grads.w2[j], state.m_w2[j], state.v_w2[j], lr, bc1,
                              bc2, cfg);
  detail::adam_update_coord(params.b2, grads.b2, state.m_b2, state.v_b2, lr, bc1, bc2, cfg);
}

enum class StopReason { MAX_EPOCHS, EARLY_STOP };

struct EvalRecord {
  std::size_t step = 0;
  double train_loss = 0.0;
  double dev_accuracy = 0.0;
  bool is_best = false;
};

struct TrainHistory {
  std::vector<EvalRecord> records;
  std::size_t best_step = 0;
  double best_accuracy = 0.0;
  StopReason stop_reason = StopReason::MAX_EPOCHS;
};

inline std::string history_csv(const TrainHistory& h) {
  std::ostringstream out;
  out << "step,train_loss,dev_accuracy,is_best\n";
  for (const auto& r : h.records)
    out << r.step << ',' << r.train_loss << ',' << r.dev_accuracy << ',' << (r.is_best ? 1 : 0)
        << '\n';
  return out.str();
}

struct TrainResult {
  EncoderParams params;
  TrainHistory history;
};

namespace detail {

inline Batch make_batch(const std::vector<TokenizedTriplet>& triplets,
                        const std::vector<std::size_t>& order, std::size_t begin, std::size_t end,
                        ObjectiveKind kind) {
  Batch batch;
  for (std::size_t i = begin; i < end; ++i) {
    const auto& t = triplets[order[i]];
    if (kind == ObjectiveKind::MARGIN) {
      batch.margin_units.push_back({t.preferred, t.dispreferred, t.id});
    } else {
      // Triplet data carries exactly two candidates; the preferred one is gold.
      LogUnit u;
      u.candidates = {t.preferred, t.dispreferred};
      u.correct_index = 0;
      u.id = t.id;
      batch.log_units.push_back(std::move(u));
    }
  }
  return batch;
}

}  // namespace detail

// Minibatch Adam training with periodic dev evaluation and early stopping
// on dev pairwise accuracy. Keeps the parameters of the best evaluation
// (strict improvement; ties keep the earlier step).
inline TrainResult train(const TripletDataset& train_set, const TripletDataset& dev_set,
                         const Vocab& vocab, const TrainConfig& cfg, EncoderParams init) {
  cfg.validate();
  if (train_set.triplets.empty() || dev_set.triplets.empty())
    throw ValidationError("train: empty dataset");

  std::vector<TokenizedTriplet> train_toks = tokenize_dataset(train_set, vocab);
  std::vector<TokenizedTriplet> dev_toks = tokenize_dataset(dev_set, vocab);

  EncoderParams params = std::move(init);
  AdamState state = AdamState::zeros_like(params);
  Rng rng(cfg.seed);

  TrainResult result;
  result.history.best_accuracy = -1.0;
  EncoderParams best = params;

  std::size_t step = 0;
  std::size_t bad_evals = 0;
  double loss_sum = 0.0;
  std::size_t loss_batches = 0;
  bool stopped = false;

  auto evaluate = [&]() {
    auto acc = pairwise_accuracy(params, dev_toks);
    EvalRecord rec;
    rec.step = step;
    rec.train_loss = loss_batches > 0 ? loss_sum / static_cast<double>(loss_batches) : 0.0;
    rec.dev_accuracy = acc.accuracy;
    loss_sum = 0.0;
    loss_batches = 0;
    if (acc.accuracy > result.history.best_accuracy) {
      result.history.best_accuracy = acc.accuracy;
      result.history.best_step = step;
      rec.is_best = true;
      best = params;
      bad_evals = 0;
    } else {
      ++bad_evals;
    }
    result.history.records.push_back(rec);
    return bad_evals >= cfg.patience;
  };

  std::vector<std::size_t> order(train_toks.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs && !stopped; ++epoch) {
    rng.shuffle(order);
    for (std::size_t b = 0; b < order.size() && !stopped; b += cfg.batch_size) {
      std::size_t e = std::min(order.size(), b + cfg.batch_size);
      Batch batch = detail::make_batch(train_toks, order, b, e, cfg.objective.kind);
      auto lg = loss_and_gradients(batch, params, cfg.objective);
      adam_step(params, lg.grads, state, cfg);
      ++step;
      loss_sum += lg.loss;
      ++loss_batches;
      if (step % cfg.eval_every == 0 && evaluate()) {
        result.history.stop_reason = StopReason::EARLY_STOP;
        stopped = true;
      }
    }
  }
  // Final evaluation unless the last step already ran one.
  if (!stopped && step % cfg.eval_every != 0) evaluate();

  result.params = std::move(best);
  return result;
}

inline TrainResult train(const TripletDataset& train_set, const TripletDataset& dev_set,
                         const Vocab& vocab, const TrainConfig& cfg, std::size_t d,
                         std::size_t d_h) {
  return train(train_set, dev_set, vocab, cfg, init_params(vocab.size(), d, d_h, cfg.seed));
}

// Seeded shuffle then contiguous slices: k disjoint folds covering the
// dataset with sizes differing by at most one.
inline std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t k,
                                                        std::uint64_t seed) {
  if (k < 2) throw ValidationError("make_folds: k must be >= 2");
  if (n < k) throw ValidationError("make_folds: need at least k elements");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> folds(k);
  const std::size_t base = n / k, extra = n % k;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    std::size_t len = base + (f < extra ? 1 : 0);
    folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                    order.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return folds;
}

struct CrossvalCell {
  double xi = 0.0;
  std::size_t fold = 0;
  double accuracy = 0.0;
};

struct CrossvalResult {
  double best_xi = 0.0;
  std::vector<CrossvalCell> table;
  std::vector<double> mean_accuracy;  // parallel to the grid
};

// k-fold grid search over the margin hyperparameter; ties resolve to the
// smallest grid value.
inline CrossvalResult crossval_margin(const TripletDataset& dataset, std::size_t k,
                                      const std::vector<double>& xi_grid,
                                      const TrainConfig& base_cfg, const Vocab& vocab,
                                      std::size_t d, std::size_t d_h) {
  if (xi_grid.empty()) throw ValidationError("crossval_margin: empty grid");
  auto folds = make_folds(dataset.triplets.size(), k, base_cfg.seed);
  CrossvalResult out;
  double best_mean = -1.0;
  for (double xi : xi_grid) {
    TrainConfig cfg = base_cfg;
    cfg.objective.kind = ObjectiveKind::MARGIN;
    cfg.objective.xi = xi;
    double mean = 0.0;
    for (std::size_t f = 0; f < k; ++f) {
      TripletDataset tr, dv;
      tr.scale = dv.scale = dataset.scale;
      tr.provenance = dv.provenance = dataset.provenance;
      for (std::size_t g = 0; g < k; ++g)
        for (std::size_t idx : folds[g])
          (g == f ? dv : tr).triplets.push_back(dataset.triplets[idx]);
      auto res = train(tr, dv, vocab, cfg, d, d_h);
      double acc = res.history.best_accuracy;
      out.table.push_back({xi, f, acc});
      mean += acc;
    }
    mean /= static_cast<double>(k);
    out.mean_accuracy.push_back(mean);
    if (mean > best_mean || (mean == best_mean && xi < out.best_xi)) {
      best_mean = mean;
      out.best_xi = xi;
    }
  }
  return out;
}

}  // namespace plaus
