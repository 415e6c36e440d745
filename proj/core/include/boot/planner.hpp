#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "boot/envs.hpp"
#include "boot/model.hpp"
#include "boot/trajectory.hpp"

namespace boot {

// Position in a token stream that yields next-token log-probabilities.
class TokenCursor {
 public:
  virtual ~TokenCursor() = default;
  virtual std::span<const double> logprobs() const = 0;
  virtual void push(int token) = 0;
  virtual std::unique_ptr<TokenCursor> clone() const = 0;
};

class TokenModel {
 public:
  virtual ~TokenModel() = default;
  virtual int context_limit() const = 0;
  virtual std::unique_ptr<TokenCursor> start(std::span<const int> context) const = 0;
};

class TransformerTokenModel final : public TokenModel {
 public:
  explicit TransformerTokenModel(const ModelParams& params) : params_(&params) {}
  int context_limit() const override { return params_->config.context; }
  std::unique_ptr<TokenCursor> start(std::span<const int> context) const override;

 private:
  const ModelParams* params_;
};

// Exact token model of a ChainMDP: state, reward and reward-to-go tokens are
// deterministic, the two legal action tokens are equally likely. The
// reward-to-go token encodes r + discount * (uniform-policy value of the rest).
class ChainTokenModel final : public TokenModel {
 public:
  ChainTokenModel(ChainMDP env, int bins, double discount);

  int context_limit() const override { return (env_.episode_length() + 1) * layout_.tokens_per_step(); }
  std::unique_ptr<TokenCursor> start(std::span<const int> context) const override;

  const Discretizer& discretizer() const { return disc_; }
  const ChainMDP& env() const { return env_; }
  double discount() const { return discount_; }
  // Next-token log-probabilities after `tokens`.
  std::vector<double> logprobs_after(std::span<const int> tokens) const;

 private:
  ChainMDP env_;
  VocabLayout layout_;
  Discretizer disc_;
  double discount_;
};

struct PlannerConfig {
  int beam_width = 32;  // B
  int horizon = 5;      // H timesteps
  int expansions = 4;   // action candidates kept per beam entry
  double discount = 0.99;
  std::uint64_t seed = 0;

  void validate() const;  // throws InvalidInput
};

struct BeamCandidate {
  std::vector<int> tokens;  // planned tokens following the context
  double score = 0.0;
  std::vector<double> logprobs;          // per planned token
  std::vector<double> rewards;           // decoded reward per planned step
  std::vector<double> rewards_to_go;     // decoded reward-to-go per planned step
  std::vector<std::vector<double>> next_states;  // decoded predicted next states (H - 1 entries)
};

// sum_{h < H-1} discount^h r_h + discount^(H-1) R_(H-1); R includes the reward of its own step.
double beam_score(std::span<const double> rewards, std::span<const double> rewards_to_go, double discount);

struct PlanResult {
  std::vector<double> action;      // reconstructed first action of the best candidate
  std::vector<int> action_tokens;  // its tokens
  double score = 0.0;
  std::vector<BeamCandidate> beam;  // final beam, best first
  int context_tokens_used = 0;
};

// Context must end right after a state's tokens. Contexts too long for the
// model's window lose their oldest whole timesteps.
PlanResult plan(const TokenModel& model, const Discretizer& disc, std::span<const int> context,
                const PlannerConfig& cfg);
PlanResult plan(const ModelParams& params, const Discretizer& disc, std::span<const int> context,
                const PlannerConfig& cfg);

// Every action-token sequence over the tokens with nonzero probability, scored
// with the planner's greedy decode. Exponential; for small oracles only.
std::vector<BeamCandidate> enumerate_plans(const TokenModel& model, const Discretizer& disc,
                                           std::span<const int> context, const PlannerConfig& cfg);

struct EpisodeResult {
  double episode_return = 0.0;
  RawTrajectory trajectory;
  Series predicted_next_states;  // model prediction of s_{t+1} for each executed step but the last
  Series real_next_states;       // matching environment states
  std::vector<double> plan_scores;
};

// Model-predictive control: plan, execute the first action, append the real
// transition to the context, repeat. The horizon shrinks near the episode end.
EpisodeResult run_episode(const Environment& env, const TokenModel& model, const Discretizer& disc,
                          const PlannerConfig& cfg, int max_steps, std::uint64_t env_seed);

}  // namespace boot
