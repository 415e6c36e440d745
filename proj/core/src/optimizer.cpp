#include "boot/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace boot {

TrainState make_train_state(const ModelParams& params, double base_lr, std::int64_t warmup_steps,
                            std::int64_t total_steps) {
  if (!(base_lr >= 0.0)) throw InvalidInput("learning rate must be non-negative");
  if (warmup_steps < 0 || total_steps < 1) throw InvalidInput("invalid schedule lengths");
  TrainState s;
  s.first_moment.assign(params.values.size(), 0.0);
  s.second_moment.assign(params.values.size(), 0.0);
  s.base_lr = base_lr;
  s.warmup_steps = warmup_steps;
  s.total_steps = total_steps;
  return s;
}

double schedule_factor(const TrainState& state, std::int64_t step) {
  double warm = 1.0;
  if (state.warmup_steps > 0) warm = std::min(1.0, static_cast<double>(step) / state.warmup_steps);
  const std::int64_t span = state.total_steps - state.warmup_steps;
  double progress = 1.0;
  if (span > 0) progress = std::clamp(static_cast<double>(step - state.warmup_steps) / span, 0.0, 1.0);
  const double floor = state.final_lr_fraction;
  const double cosine = floor + (1.0 - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return warm * cosine;
}

void adam_step(TrainState& state, ModelParams& params, const Gradients& grads) {
  const size_t n = params.values.size();
  if (grads.size() != n || state.first_moment.size() != n || state.second_moment.size() != n) {
    throw InvalidInput("optimizer state does not match parameters");
  }
  const double lr = learning_rate(state);
  const std::int64_t t = state.step + 1;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(t));
  double* m = state.first_moment.data();
  double* v = state.second_moment.data();
  double* p = params.values.data();
  for (size_t i = 0; i < n; ++i) {
    const double g = grads[i];
    m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
    v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
    p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + state.epsilon);
  }
  state.step = t;
}

double clip_grad_norm(Gradients& grads, double max_norm) {
  double sq = 0.0;
  for (double g : grads) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (double& g : grads) g *= s;
  }
  return norm;
}

}  // namespace boot
