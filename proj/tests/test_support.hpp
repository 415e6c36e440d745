#pragma once

#include <vector>

#include "boot/bootstrap.hpp"
#include "boot/envs.hpp"
#include "boot/model.hpp"
#include "boot/optimizer.hpp"

namespace boot::testing {

inline ModelConfig small_model(int vocab, int context, int width = 16, int layers = 1, std::uint64_t seed = 1) {
  ModelConfig c;
  c.vocab = vocab;
  c.context = context;
  c.width = width;
  c.layers = layers;
  c.heads = 2;
  c.ff_width = 4 * width;
  c.dropout = 0.0;
  c.seed = seed;
  return c;
}

// Episodes of `env_id` cut into windows and tokenized with a discretizer fitted on them.
inline TrainingData make_training_data(const std::string& env_id, Tier tier, int episodes, int bins, int window,
                                       std::uint64_t seed, double discount = 0.99) {
  DatasetSpec spec{env_id, tier, episodes, seed, std::nullopt, 0.0};
  std::vector<AugmentedTrajectory> windows;
  for (const auto& raw : collect_dataset(spec)) {
    for (auto& w : slice_windows(augment(raw, discount), window, 1)) windows.push_back(std::move(w));
  }
  const Discretizer disc = fit_discretizer(windows, bins);
  return TrainingData::from_windows(disc, std::move(windows));
}

inline std::vector<std::vector<int>> token_batch(const std::vector<TokenSequence>& seqs) {
  std::vector<std::vector<int>> out;
  for (const auto& s : seqs) out.push_back(s.tokens);
  return out;
}

// Full-batch Adam without warmup; returns the final NLL.
inline double fit(ModelParams& params, const std::vector<std::vector<int>>& batch, int steps, double lr) {
  TrainState st = make_train_state(params, lr, 0, steps);
  st.final_lr_fraction = 1.0;
  for (int i = 0; i < steps; ++i) {
    Gradients g = loss_and_grad(params, batch, true).grad;
    clip_grad_norm(g, 1.0);
    adam_step(st, params, g);
  }
  return nll_loss(params, batch);
}

}  // namespace boot::testing
