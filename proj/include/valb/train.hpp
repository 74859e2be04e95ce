#pragma once

// Mini-batch training with Adam, per-epoch validation and best-checkpoint
// selection; fine-tuning reuses the same loop.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "valb/corpus.hpp"
#include "valb/errors.hpp"
#include "valb/eval.hpp"
#include "valb/model.hpp"
#include "valb/network.hpp"
#include "valb/tagger.hpp"
#include "valb/util.hpp"

namespace valb {

enum class SelectionMetric { VariableAwareAccuracy, GeneralAccuracy };

inline std::string_view to_string(SelectionMetric m) {
  return m == SelectionMetric::VariableAwareAccuracy ? "variable_aware_accuracy"
                                                     : "general_accuracy";
}

inline std::optional<SelectionMetric> parse_selection_metric(std::string_view s) {
  if (s == "variable_aware_accuracy") return SelectionMetric::VariableAwareAccuracy;
  if (s == "general_accuracy") return SelectionMetric::GeneralAccuracy;
  return std::nullopt;
}

struct TrainConfig {
  int epochs = 30;
  int batch_size = 8;
  double learning_rate = 1e-3;
  double gradient_clip_norm = 5.0;  // <= 0 disables clipping
  std::uint64_t seed = 42;
  Mode mode = Mode::Multiclass;
  bool freeze_word_embeddings = false;
  SelectionMetric selection_metric = SelectionMetric::VariableAwareAccuracy;

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be > 0");
  }
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0;  // mean per-log loss over the epoch
  double val_general_accuracy = 0;
  double val_variable_aware_accuracy = 0;
  double val_metric = 0;  // the selection metric
};

template <class S>
struct Checkpoint {
  TaggerModel<S> model;
  int epoch = 0;
  double val_metric = 0;
};

template <class S>
struct TrainResult {
  Checkpoint<S> best;
  std::vector<EpochRecord> history;
  bool loss_flagged = false;  // see loss_trend_violation()
};

/// True if, past epoch 5, the mean training loss at some epoch exceeds the
/// loss five epochs earlier by more than 5% (plus 1e-3 absolute slack).
inline bool loss_trend_violation(std::span<const EpochRecord> history) {
  for (std::size_t e = 10; e <= history.size(); ++e) {
    const double now = history[e - 1].train_loss;
    const double before = history[e - 6].train_loss;
    if (now > before * 1.05 + 1e-3) return true;
  }
  return false;
}

namespace detail {

template <class S>
std::vector<std::span<S>> flat_views(TaggerModel<S>& model, Parameters<S>& p) {
  std::vector<std::span<S>> views;
  Parameters<S>::visit(p, model.hp.use_char, model.hp.char_kernel,
                       [&](std::string_view, auto& t, const auto&) {
                         views.emplace_back(t.data(), static_cast<std::size_t>(t.size()));
                       });
  return views;
}

template <class S>
class Adam {
 public:
  Adam(const Parameters<S>& like, double lr) : m_(like.zeros_like()), v_(like.zeros_like()), lr_(lr) {}

  void step(TaggerModel<S>& model, Parameters<S>& grad) {
    ++t_;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(b1, t_), c2 = 1.0 - std::pow(b2, t_);
    auto params = flat_views(model, model.params);
    auto grads = flat_views(model, grad);
    auto ms = flat_views(model, m_);
    auto vs = flat_views(model, v_);
    for (std::size_t k = 0; k < params.size(); ++k) {
      for (std::size_t i = 0; i < params[k].size(); ++i) {
        const double g = grads[k][i];
        const double m = b1 * ms[k][i] + (1 - b1) * g;
        const double v = b2 * vs[k][i] + (1 - b2) * g * g;
        ms[k][i] = static_cast<S>(m);
        vs[k][i] = static_cast<S>(v);
        params[k][i] -= static_cast<S>(lr_ * (m / c1) / (std::sqrt(v / c2) + eps));
      }
    }
  }

 private:
  Parameters<S> m_, v_;
  double lr_;
  int t_ = 0;
};

template <class S>
double global_norm(TaggerModel<S>& model, Parameters<S>& grad) {
  double sq = 0;
  for (auto view : flat_views(model, grad))
    for (S g : view) sq += double(g) * double(g);
  return std::sqrt(sq);
}

}  // namespace detail

/// Mean per-log loss over `batch` and its gradient. `dropout_rng` null
/// means inference mode (no dropout).
template <class S>
double batch_gradient(const TaggerModel<S>& model,
                      std::span<const EncodedLog> encoded,
                      std::span<const std::vector<int>> gold, Rng* dropout_rng,
                      Parameters<S>& grad) {
  grad = model.params.zeros_like();
  const double scale = 1.0 / double(encoded.size());
  double loss = 0;
  for (std::size_t i = 0; i < encoded.size(); ++i)
    loss += log_loss_and_gradient(encoded[i], gold[i], model, dropout_rng, grad, scale);
  return loss * scale;
}

inline double selection_value(const MetricsReport& r, SelectionMetric m) {
  return m == SelectionMetric::VariableAwareAccuracy ? r.variable_aware_accuracy
                                                     : r.general_accuracy;
}

/// Trains from `init`; returns the checkpoint with the best validation
/// metric (earliest epoch on ties) and the per-epoch history.
template <class S>
TrainResult<S> train(TaggerModel<S> init, std::span<const AnnotatedLog> train_set,
                     std::span<const AnnotatedLog> val_set, const TrainConfig& cfg,
                     const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  cfg.validate();
  if (train_set.empty()) throw std::invalid_argument("training set is empty");
  if (val_set.empty()) throw std::invalid_argument("validation set is empty");
  if (cfg.mode != init.mode)
    throw ModeError("training config mode is " + std::string(to_string(cfg.mode)) +
                    " but the model is " + std::string(to_string(init.mode)));

  std::vector<EncodedLog> encoded;
  std::vector<std::vector<int>> gold;
  for (const auto& log : train_set) {
    encoded.push_back(encode_for(init, log.tokens));
    gold.push_back(gold_indices(init, log));
  }
  for (const auto& log : val_set) gold_indices(init, log);

  TaggerModel<S> model = std::move(init);
  detail::Adam<S> adam(model.params, cfg.learning_rate);
  Rng shuffle_rng(cfg.seed);
  Rng dropout_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  TrainResult<S> result;
  std::vector<std::size_t> order(encoded.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Parameters<S> grad;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0;
    int batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      ++batch_no;
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      grad = model.params.zeros_like();
      double batch_loss = 0;
      const double scale = 1.0 / double(stop - start);
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t i = order[k];
        batch_loss += log_loss_and_gradient(encoded[i], gold[i], model, &dropout_rng, grad, scale);
      }
      if (!std::isfinite(batch_loss))
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) +
                              ", batch " + std::to_string(batch_no));
      epoch_loss += batch_loss;
      if (cfg.freeze_word_embeddings) grad.word_embedding.setZero();
      if (cfg.gradient_clip_norm > 0) {
        const double norm = detail::global_norm(model, grad);
        if (!std::isfinite(norm))
          throw DivergenceError("non-finite gradient at epoch " + std::to_string(epoch) +
                                ", batch " + std::to_string(batch_no));
        if (norm > cfg.gradient_clip_norm) {
          const S f = static_cast<S>(cfg.gradient_clip_norm / norm);
          for (auto view : detail::flat_views(model, grad))
            for (S& g : view) g *= f;
        }
      }
      adam.step(model, grad);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / double(order.size());
    const MetricsReport r = evaluate(predict(model, val_set), val_set);
    rec.val_general_accuracy = r.general_accuracy;
    rec.val_variable_aware_accuracy = r.variable_aware_accuracy;
    rec.val_metric = selection_value(r, cfg.selection_metric);
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (epoch == 1 || rec.val_metric > result.best.val_metric) {
      result.best.model = model;
      result.best.epoch = epoch;
      result.best.val_metric = rec.val_metric;
    }
  }
  result.loss_flagged = loss_trend_violation(result.history);
  return result;
}

/// Continues training a pretrained model on a (small) target sample with
/// the same loop and vocabularies.
template <class S>
TrainResult<S> finetune(const TaggerModel<S>& pretrained,
                        std::span<const AnnotatedLog> target_train,
                        std::span<const AnnotatedLog> target_val, TrainConfig cfg,
                        const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  if (target_train.empty())
    throw std::invalid_argument("fine-tuning needs at least one training log");
  cfg.mode = pretrained.mode;
  return train(pretrained, target_train, target_val, cfg, on_epoch);
}

}  // namespace valb
