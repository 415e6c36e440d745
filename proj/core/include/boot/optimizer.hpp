#pragma once

#include <cstdint>

#include "boot/model.hpp"

namespace boot {

struct TrainState {
  std::int64_t step = 0;
  ParamVector first_moment;
  ParamVector second_moment;
  double base_lr = 1e-4;
  std::int64_t warmup_steps = 0;
  std::int64_t total_steps = 1;
  double final_lr_fraction = 0.1;  // cosine floor as a fraction of base_lr
  double beta1 = 0.9;
  double beta2 = 0.95;
  double epsilon = 1e-8;

  bool operator==(const TrainState&) const = default;
};

TrainState make_train_state(const ModelParams& params, double base_lr, std::int64_t warmup_steps,
                            std::int64_t total_steps);

// Multiplier on base_lr at `step`: linear warmup from 0, then cosine decay to the floor.
double schedule_factor(const TrainState& state, std::int64_t step);
inline double learning_rate(const TrainState& state) { return state.base_lr * schedule_factor(state, state.step); }

// Bias-corrected Adam update at the current scheduled rate; increments step.
void adam_step(TrainState& state, ModelParams& params, const Gradients& grads);

// Rescales grads in place to at most max_norm; returns the norm before clipping.
double clip_grad_norm(Gradients& grads, double max_norm);

}  // namespace boot
