#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "medctx/encoder.hpp"

namespace medctx {

struct GradCheckReport {
  std::size_t samples = 0;
  double max_relative_error = 0.0;
  std::string worst_parameter;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Gradients below this magnitude are roundoff (e.g. the key bias, whose true
// gradient is zero because softmax ignores per-row shifts).
inline constexpr double kGradFloor = 1e-8;

// |a - n| / max(|a|, |n|, kGradFloor); both exactly zero counts as agreement.
inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), kGradFloor});
  return std::abs(analytic - numeric) / scale;
}

// Compares analytic gradients with central finite differences on `samples`
// scalars. Tensors are picked uniformly, then an entry within the tensor, so
// small tensors (biases, heads) are covered as well as the embeddings.
// The differences are taken on an extended-precision copy so their roundoff
// (about eps * loss / step) stays far below the gradients being checked.
// Dropout is off; 64-bit only.
inline GradCheckReport grad_check(const EncoderModel<double>& model, std::span<const LabeledSequence> batch,
                                  LossMode mode, std::size_t head = 0, std::size_t samples = 200,
                                  double step = 1e-5, std::uint64_t seed = 1) {
  auto analytic = loss_and_grads(model, batch, mode, head);
  auto probe = model_cast<long double>(model);
  auto params = probe.parameters();
  auto grads = analytic.grads.parameters();
  std::mt19937_64 rng(seed);

  GradCheckReport report;
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t t = rng() % params.size();
    auto& value = *params[t].value;
    const auto idx = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(value.size()));
    const long double saved = value.data()[idx];
    value.data()[idx] = saved + step;
    const long double plus = batch_loss(probe, batch, mode, head);
    value.data()[idx] = saved - step;
    const long double minus = batch_loss(probe, batch, mode, head);
    value.data()[idx] = saved;

    const double numeric = static_cast<double>((plus - minus) / (2 * static_cast<long double>(step)));
    const double a = grads[t].value->data()[idx];
    const double err = relative_error(a, numeric);
    ++report.samples;
    if (err >= report.max_relative_error) {
      report.max_relative_error = err;
      report.worst_parameter = params[t].name + "[" + std::to_string(idx) + "]";
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
  }
  return report;
}

}  // namespace medctx
