#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "boot/model.hpp"
#include "boot/trajectory.hpp"

namespace boot {

enum class GenerationScheme { kAutoregressive, kTeacherForcing };

std::string to_string(GenerationScheme scheme);
GenerationScheme parse_generation_scheme(const std::string& name);  // "ar" / "tf" or the long names

struct GenerationConfig {
  int regen_steps = 1;  // T': trailing timesteps that are resampled
  GenerationScheme scheme = GenerationScheme::kTeacherForcing;
  SamplingPolicy policy = SamplingPolicy::kCategorical;
  std::uint64_t seed = 0;

  // Requires 1 <= regen_steps < steps.
  void validate(int steps) const;
};

struct GeneratedTrajectory {
  TokenSequence tokens;
  std::int64_t source_id = -1;
  double confidence = 0.0;
  GenerationScheme scheme = GenerationScheme::kTeacherForcing;
  std::vector<double> token_logprobs;  // one per regenerated token
};

// Positions before this index are copied verbatim from the source.
int regeneration_start(const VocabLayout& layout, int steps, int regen_steps);

GeneratedTrajectory generate_autoregressive(const ModelParams& params, const TokenSequence& source,
                                            const GenerationConfig& cfg, Rng& rng, std::int64_t source_id = -1);
GeneratedTrajectory generate_teacher_forcing(const ModelParams& params, const TokenSequence& source,
                                             const GenerationConfig& cfg, Rng& rng, std::int64_t source_id = -1);

// Uses Rng(cfg.seed) and dispatches on cfg.scheme.
GeneratedTrajectory generate(const ModelParams& params, const TokenSequence& source, const GenerationConfig& cfg,
                             std::int64_t source_id = -1);

// Teacher forcing for many sources with a single batched forward pass.
// rngs[i] drives candidate i.
std::vector<GeneratedTrajectory> generate_teacher_forcing_batch(const ModelParams& params,
                                                                std::span<const TokenSequence> sources,
                                                                std::span<const std::int64_t> source_ids,
                                                                const GenerationConfig& cfg, std::span<Rng> rngs);

// Plain mean of selected log-probabilities.
double mean_logprob(std::span<const double> token_logprobs);
// Mean of the regenerated tokens' log-probabilities; expects exactly
// regen_steps * tokens_per_step values.
double confidence(std::span<const double> token_logprobs, const VocabLayout& layout, int regen_steps);
// Same, reading the log-probabilities of `tokens` from the table rows.
double confidence(const LogProbTable& table, std::span<const int> tokens, const VocabLayout& layout, int regen_steps);

// Indices of the floor(eta% * K) most confident candidates, ties broken by index.
std::vector<size_t> select_top_confidence(std::span<const double> confidences, double eta_percent);
std::vector<GeneratedTrajectory> select_top_confidence(const std::vector<GeneratedTrajectory>& candidates,
                                                       double eta_percent);

// floor(eta% * k) with a small tolerance against representation error (e.g. 25% of 16).
int selection_count(int k, double eta_percent);

}  // namespace boot
