#pragma once

#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "medctx/encoder.hpp"
#include "medctx/optimizer.hpp"

namespace medctx {

using Log = std::function<void(const std::string&)>;

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0;
  double dev_score = 0;
  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_score = 0;
  bool stopped_early = false;
  friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

// A strictly higher score resets the counter; training stops once `patience`
// consecutive epochs fail to improve.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  bool update(double score) {
    if (!seen_ || score > best_) {
      seen_ = true;
      best_ = score;
      stale_ = 0;
      return true;
    }
    ++stale_;
    return false;
  }

  bool should_stop() const { return stale_ >= patience_; }
  double best() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t stale_ = 0;
  double best_ = 0;
  bool seen_ = false;
};

inline void shuffle_indices(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
}

// Mini-batch training with per-epoch dev scoring. The model ends holding the
// parameters of its best-scoring epoch.
template <typename T, typename ScoreFn>
TrainHistory fit(EncoderModel<T>& model, std::span<const LabeledSequence> train, LossMode mode, std::size_t head,
                 const TrainConfig& tc, ScoreFn&& dev_score, const Log& log = {}) {
  tc.validate();
  if (train.empty()) throw DataError("no training examples");
  std::mt19937_64 order_rng(tc.seed);
  Dropout dropout(model.config.dropout_rate, tc.seed ^ 0xd1b54a32d192ed03ULL);
  AdamState<T> adam;
  EarlyStopping stopper(tc.patience);
  TrainHistory history;
  EncoderModel<T> best = model;

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<LabeledSequence> batch;

  for (std::size_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    shuffle_indices(order, order_rng);
    double loss_sum = 0;
    std::size_t loss_count = 0;
    for (std::size_t at = 0; at < order.size(); at += tc.batch_size) {
      batch.clear();
      for (std::size_t k = at; k < std::min(order.size(), at + tc.batch_size); ++k) batch.push_back(train[order[k]]);
      auto lg = loss_and_grads(model, std::span<const LabeledSequence>(batch), mode, head,
                               model.config.dropout_rate > 0 ? &dropout : nullptr);
      if (lg.count == 0) continue;
      loss_sum += lg.loss * static_cast<double>(lg.count);
      loss_count += lg.count;
      optimizer_step(adam, model, lg.grads, tc);
    }
    if (!model.all_finite()) throw NumericError("epoch " + std::to_string(epoch), "parameters became non-finite");

    EpochRecord rec{epoch, loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0,
                    static_cast<double>(dev_score(model))};
    history.epochs.push_back(rec);
    const bool improved = stopper.update(rec.dev_score);
    if (improved) {
      best = model;
      history.best_epoch = epoch;
      history.best_score = rec.dev_score;
    }
    if (log)
      log("epoch " + std::to_string(epoch) + " loss " + std::to_string(rec.train_loss) + " dev " +
          std::to_string(rec.dev_score) + (improved ? " *" : ""));
    if (stopper.should_stop()) {
      history.stopped_early = epoch < tc.max_epochs;
      break;
    }
  }
  model = std::move(best);
  return history;
}

}  // namespace medctx
