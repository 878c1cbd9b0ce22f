#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "medctx/encoder.hpp"

namespace medctx {

struct TrainConfig {
  double learning_rate = 3e-4;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 20;
  std::size_t patience = 3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 1.0;
  std::uint64_t seed = 17;

  void validate() const {
    if (!(learning_rate > 0) || batch_size == 0 || max_epochs == 0 || !(epsilon > 0) || !(clip_norm > 0))
      throw ConfigError("training hyperparameters must be positive");
    if (patience < 1) throw ConfigError("patience must be at least 1");
    if (!(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1))
      throw ConfigError("moment coefficients must lie in (0, 1)");
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// First/second moment estimates, one entry per parameter tensor.
template <typename T>
struct AdamState {
  std::vector<Matrix<T>> first;
  std::vector<Matrix<T>> second;
  std::size_t steps = 0;
};

template <typename T>
double global_norm(std::span<Matrix<T>* const> grads) {
  double sq = 0.0;
  for (const auto* g : grads) sq += g->template cast<double>().squaredNorm();
  return std::sqrt(sq);
}

// In-place adaptive-moment update with bias correction, after rescaling the
// gradients so their global L2 norm is at most clip_norm. Returns the
// pre-clipping norm.
template <typename T>
double adam_update(AdamState<T>& state, std::span<Matrix<T>* const> params, std::span<Matrix<T>* const> grads,
                   const TrainConfig& tc) {
  if (params.size() != grads.size()) throw InputError("parameter/gradient count mismatch");
  if (state.first.empty()) {
    for (const auto* p : params) {
      state.first.push_back(Matrix<T>::Zero(p->rows(), p->cols()));
      state.second.push_back(Matrix<T>::Zero(p->rows(), p->cols()));
    }
  }
  const double norm = global_norm<T>(grads);
  if (!std::isfinite(norm)) throw NumericError("optimizer", "non-finite gradient norm");
  const T clip = norm > tc.clip_norm ? static_cast<T>(tc.clip_norm / norm) : T(1);

  ++state.steps;
  const auto t = static_cast<double>(state.steps);
  const T b1 = static_cast<T>(tc.beta1), b2 = static_cast<T>(tc.beta2);
  const T correct1 = static_cast<T>(1.0 - std::pow(tc.beta1, t));
  const T correct2 = static_cast<T>(1.0 - std::pow(tc.beta2, t));
  const T lr = static_cast<T>(tc.learning_rate), eps = static_cast<T>(tc.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto g = (*grads[i] * clip).eval();
    auto& m = state.first[i];
    auto& v = state.second[i];
    m = b1 * m + (T(1) - b1) * g;
    v = b2 * v + (T(1) - b2) * g.cwiseProduct(g);
    params[i]->array() -= lr * (m.array() / correct1) / ((v.array() / correct2).sqrt() + eps);
  }
  return norm;
}

template <typename T>
double optimizer_step(AdamState<T>& state, EncoderModel<T>& model, EncoderModel<T>& grads, const TrainConfig& tc) {
  std::vector<Matrix<T>*> params, gs;
  for (auto& p : model.parameters()) params.push_back(p.value);
  for (auto& g : grads.parameters()) gs.push_back(g.value);
  return adam_update<T>(state, params, gs, tc);
}

}  // namespace medctx
