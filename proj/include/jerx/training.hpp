#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <iostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "jerx/config.hpp"
#include "jerx/corpus.hpp"
#include "jerx/eval.hpp"
#include "jerx/model.hpp"

namespace jerx {

// RE-loss weight: linear from 0 to 1 over the batches of the first epoch,
// then 1. With entity pretraining ablated it is always 1.
inline double lambda_schedule(std::size_t epoch, std::size_t batch, std::size_t batches_per_epoch,
                              bool no_pretraining = false) {
  require(batches_per_epoch >= 1, ErrorKind::kInvalidArgument, "batches_per_epoch must be at least 1");
  if (no_pretraining || epoch >= 1) return 1.0;
  const double denom = static_cast<double>(std::max<std::size_t>(batches_per_epoch - 1, 1));
  return std::min(1.0, static_cast<double>(batch) / denom);
}

template <typename T>
T joint_loss(T ner_loss, T re_loss, T lambda) {
  return ner_loss + lambda * re_loss;
}

// ---------------------------------------------------------------------------
// Optimiser
// ---------------------------------------------------------------------------

template <typename T>
T global_norm(const ModelParams<T>& grad) {
  T sum = 0;
  grad.visit([&](const char*, const Matrix<T>& m, bool) { sum += m.squaredNorm(); });
  return std::sqrt(sum);
}

// Rescales `grad` so its global norm is at most `max_norm`; returns the
// norm before rescaling.
template <typename T>
T clip_grad_norm(ModelParams<T>& grad, T max_norm) {
  const T norm = global_norm(grad);
  if (norm > max_norm && norm > T(0)) {
    const T scale = max_norm / norm;
    grad.visit([&](const char*, Matrix<T>& m, bool) { m *= scale; });
  }
  return norm;
}

// Adam with decoupled weight decay; decay skips biases and the entity-label
// embedding table (tensors visited with decay = false).
template <typename T>
class AdamW {
 public:
  AdamW() = default;
  AdamW(const ModelParams<T>& params, double lr, double beta1, double beta2, double eps, double weight_decay)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay),
        first_(params.zeros_like()), second_(params.zeros_like()) {}

  void step(ModelParams<T>& params, const ModelParams<T>& grad) {
    ++t_;
    const T lr = static_cast<T>(lr_);
    const T b1 = static_cast<T>(beta1_);
    const T b2 = static_cast<T>(beta2_);
    const T c1 = static_cast<T>(1.0 - std::pow(beta1_, static_cast<double>(t_)));
    const T c2 = static_cast<T>(1.0 - std::pow(beta2_, static_cast<double>(t_)));
    const T eps = static_cast<T>(eps_);
    const T decay = static_cast<T>(1.0 - lr_ * weight_decay_);

    std::vector<Matrix<T>*> p_list, m_list, v_list;
    std::vector<const Matrix<T>*> g_list;
    std::vector<bool> decays;
    params.visit([&](const char*, Matrix<T>& m, bool d) {
      p_list.push_back(&m);
      decays.push_back(d);
    });
    first_.visit([&](const char*, Matrix<T>& m, bool) { m_list.push_back(&m); });
    second_.visit([&](const char*, Matrix<T>& m, bool) { v_list.push_back(&m); });
    grad.visit([&](const char*, const Matrix<T>& m, bool) { g_list.push_back(&m); });

    for (std::size_t i = 0; i < p_list.size(); ++i) {
      auto& p = *p_list[i];
      auto& m = *m_list[i];
      auto& v = *v_list[i];
      const auto& g = *g_list[i];
      if (decays[i] && weight_decay_ != 0.0) p *= decay;
      m = b1 * m + (T(1) - b1) * g;
      v = b2 * v + (T(1) - b2) * g.cwiseProduct(g);
      p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    }
  }

  std::size_t steps() const { return t_; }

 private:
  double lr_ = 0, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8, weight_decay_ = 0;
  std::size_t t_ = 0;
  ModelParams<T> first_;
  ModelParams<T> second_;
};

// ---------------------------------------------------------------------------
// Training state and steps
// ---------------------------------------------------------------------------

template <typename T>
struct TrainState {
  JointModel<T> model;
  AdamW<T> optimizer;
  std::size_t epoch = 0;
  std::size_t batch = 0;  // within the current epoch
  Rng rng;                // dropout and shuffling

  TrainState(JointModel<T> m, const Config& config)
      : model(std::move(m)),
        optimizer(model.params(), config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_epsilon,
                  config.weight_decay),
        rng(config.seed ^ 0x9e3779b97f4a7c15ULL) {}

  double lambda(std::size_t batches_per_epoch, const Config& config) const {
    return lambda_schedule(epoch, batch, batches_per_epoch, config.ablations.no_pretraining);
  }
};

struct StepMetrics {
  double ner_loss = 0;
  double re_loss = 0;
  double lambda = 0;
  double grad_norm = 0;  // before clipping
  double clipped_norm = 0;
  std::size_t candidates = 0;
};

template <typename T>
JointModel<T> make_model(const Config& config, std::span<const AnnotatedSentence> corpus,
                         const FileBackedEncoder* file = nullptr) {
  config.validate();
  LabelVocab labels = LabelVocab::from_corpus(corpus);
  TokenVocab tokens = config.encoder == EncoderKind::kToy ? TokenVocab::from_corpus(corpus) : TokenVocab();
  JointModel<T> model(config.shape(file ? file->hidden_size() : 0), std::move(labels), std::move(tokens));
  model.set_file_encoder(file);
  Rng rng(config.seed);
  model.params().init(rng);
  return model;
}

// One optimiser step on `batch`: summed losses, joint backward, global norm
// clipping, AdamW update, counters advanced.
template <typename T>
StepMetrics train_step(std::span<const AnnotatedSentence> batch, TrainState<T>& state, const Config& config,
                       std::size_t batches_per_epoch) {
  StepMetrics metrics;
  metrics.lambda = state.lambda(batches_per_epoch, config);
  const T lambda = static_cast<T>(metrics.lambda);
  const CandidateMode mode = config.gold_re_mode ? CandidateMode::kGold : CandidateMode::kPredicted;

  ModelParams<T> grad = state.model.params().zeros_like();
  T ner_total = 0, re_total = 0;
  for (const auto& sentence : batch) {
    const auto loss = state.model.forward_backward(sentence, lambda, mode, &grad, config.dropout, &state.rng);
    ner_total += loss.ner;
    re_total += loss.re;
    metrics.candidates += loss.candidates;
  }
  metrics.ner_loss = static_cast<double>(ner_total);
  metrics.re_loss = static_cast<double>(re_total);
  const double total = static_cast<double>(joint_loss(ner_total, re_total, lambda));
  if (!std::isfinite(total)) {
    std::ostringstream msg;
    msg << "loss is not finite at epoch " << state.epoch << " batch " << state.batch << " (L_ner=" << metrics.ner_loss
        << ", L_re=" << metrics.re_loss << ", lambda=" << metrics.lambda << ")";
    fail(ErrorKind::kNonFiniteLoss, msg.str());
  }

  metrics.grad_norm = static_cast<double>(clip_grad_norm(grad, static_cast<T>(config.grad_clip)));
  metrics.clipped_norm = static_cast<double>(global_norm(grad));
  if (!std::isfinite(metrics.grad_norm)) fail(ErrorKind::kNonFiniteLoss, "gradient norm is not finite");
  state.optimizer.step(state.model.params(), grad);

  if (++state.batch >= batches_per_epoch) {
    state.batch = 0;
    ++state.epoch;
  }
  return metrics;
}

// ---------------------------------------------------------------------------
// Full training run
// ---------------------------------------------------------------------------

struct EpochLog {
  std::size_t epoch = 0;
  double lambda_mean = 0;
  double ner_loss = 0;  // per training sentence
  double re_loss = 0;   // per training sentence
  double val_entity_f1 = 0;
  double val_relation_f1 = 0;
  double val_overall = 0;
};

inline std::string metrics_csv_header() {
  return "epoch,lambda_mean,loss_ner,loss_re,val_entity_f1,val_relation_f1,val_overall\n";
}

inline std::string metrics_csv_row(const EpochLog& row) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.2f\n", row.epoch, row.lambda_mean, row.ner_loss,
                row.re_loss, row.val_entity_f1, row.val_relation_f1, row.val_overall);
  return buf;
}

inline std::string metrics_csv(std::span<const EpochLog> log) {
  std::string out = metrics_csv_header();
  for (const auto& row : log) out += metrics_csv_row(row);
  return out;
}

template <typename T>
struct TrainResult {
  JointModel<T> model;  // best-by-validation parameters
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;  // 0 when no epoch ran
  double best_val_overall = -1;
};

// Trains for config.epochs epochs, shuffling per epoch and evaluating on
// `val` after each; keeps the parameters with the best validation overall
// score (earliest on ties). Without a validation set the last epoch wins.
template <typename T>
TrainResult<T> train(JointModel<T> model, std::span<const AnnotatedSentence> train_set,
                     std::span<const AnnotatedSentence> val_set, const Config& config, std::ostream* progress = nullptr) {
  require(!train_set.empty(), ErrorKind::kEmptyInput, "training corpus is empty");
  config.validate();
  TrainResult<T> result{model, {}, 0, -1};
  TrainState<T> state(std::move(model), config);
  const std::size_t n = train_set.size();
  const std::size_t batches_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const CandidateMode mode = config.gold_re_mode ? CandidateMode::kGold : CandidateMode::kPredicted;

  std::vector<std::size_t> order(n);
  for (std::size_t e = 0; e < config.epochs; ++e) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    state.rng.shuffle(std::span<std::size_t>(order));
    EpochLog row;
    row.epoch = e + 1;
    double lambda_sum = 0;
    std::vector<AnnotatedSentence> batch;
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      batch.clear();
      for (std::size_t i = b * config.batch_size; i < std::min(n, (b + 1) * config.batch_size); ++i) {
        batch.push_back(train_set[order[i]]);
      }
      const StepMetrics m = train_step<T>(batch, state, config, batches_per_epoch);
      lambda_sum += m.lambda;
      row.ner_loss += m.ner_loss;
      row.re_loss += m.re_loss;
    }
    row.lambda_mean = lambda_sum / static_cast<double>(batches_per_epoch);
    row.ner_loss /= static_cast<double>(n);
    row.re_loss /= static_cast<double>(n);

    bool improved = val_set.empty();
    if (!val_set.empty()) {
      const EvaluationResult val = evaluate(state.model, val_set, mode);
      row.val_entity_f1 = val.entity.f1;
      row.val_relation_f1 = val.relation.f1;
      row.val_overall = val.overall();
      improved = row.val_overall > result.best_val_overall;
    }
    if (improved) {
      result.model = state.model;
      result.best_epoch = row.epoch;
      result.best_val_overall = row.val_overall;
    }
    result.log.push_back(row);
    if (progress) *progress << metrics_csv_row(row) << std::flush;
  }
  return result;
}

}  // namespace jerx
