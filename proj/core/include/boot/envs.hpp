#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "boot/rng.hpp"
#include "boot/trajectory.hpp"

namespace boot {

struct EnvState {
  std::vector<double> observation;
  int time = 0;
};

struct StepResult {
  EnvState next;
  double reward = 0.0;
  bool done = false;
};

// Stateless description of an MDP; transition and reward are pure functions
// of (state, action, rng).
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string id() const = 0;
  virtual int state_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual int episode_length() const = 0;
  virtual std::vector<double> state_lower() const = 0;
  virtual std::vector<double> state_upper() const = 0;
  virtual std::vector<double> action_lower() const = 0;
  virtual std::vector<double> action_upper() const = 0;

  virtual EnvState reset(Rng& rng) const = 0;
  // Out-of-bounds actions are clamped.
  virtual StepResult step(const EnvState& state, std::span<const double> action, Rng& rng) const = 0;
  // Analytic near-optimal controller.
  virtual std::vector<double> expert_action(const EnvState& state) const = 0;

  // Projects an action onto the legal set (clamping; discrete envs also round).
  virtual std::vector<double> clamp_action(std::span<const double> action) const;
};

// 2-D point mass chasing the origin: state [px, py, vx, vy], action = bounded acceleration.
class PointChase final : public Environment {
 public:
  static constexpr double kDt = 0.4;
  static constexpr double kMaxPosition = 2.0;
  static constexpr double kMaxVelocity = 1.0;
  static constexpr double kMaxAccel = 1.0;
  static constexpr double kGainP = 3.0;
  static constexpr double kGainD = 2.0;

  std::string id() const override { return "point_chase"; }
  int state_dim() const override { return 4; }
  int action_dim() const override { return 2; }
  int episode_length() const override { return 10; }
  std::vector<double> state_lower() const override;
  std::vector<double> state_upper() const override;
  std::vector<double> action_lower() const override { return {-kMaxAccel, -kMaxAccel}; }
  std::vector<double> action_upper() const override { return {kMaxAccel, kMaxAccel}; }

  EnvState reset(Rng& rng) const override;
  StepResult step(const EnvState& state, std::span<const double> action, Rng& rng) const override;
  std::vector<double> expert_action(const EnvState& state) const override;
};

// Five cells in a row, actions left (0) / right (1), fixed horizon, start at cell 0.
// Reward table indexed [cell][action]; the default pays next_cell / 4.
class ChainMDP final : public Environment {
 public:
  static constexpr int kCells = 5;
  static constexpr int kActions = 2;

  ChainMDP();
  ChainMDP(std::vector<double> reward_table, int horizon = 4);

  std::string id() const override { return "chain_mdp"; }
  int state_dim() const override { return 1; }
  int action_dim() const override { return 1; }
  int episode_length() const override { return horizon_; }
  std::vector<double> state_lower() const override { return {0.0}; }
  std::vector<double> state_upper() const override { return {kCells - 1.0}; }
  std::vector<double> action_lower() const override { return {0.0}; }
  std::vector<double> action_upper() const override { return {1.0}; }

  EnvState reset(Rng& rng) const override;
  StepResult step(const EnvState& state, std::span<const double> action, Rng& rng) const override;
  std::vector<double> expert_action(const EnvState& state) const override;
  std::vector<double> clamp_action(std::span<const double> action) const override;

  static int next_cell(int cell, int action);
  double reward(int cell, int action) const { return rewards_[cell * kActions + action]; }
  const std::vector<double>& reward_table() const { return rewards_; }
  // Optimal return from (cell, steps remaining) by dynamic programming.
  double optimal_value(int cell, int steps_left) const;
  // Value of the uniform-random policy from (cell, steps remaining).
  double uniform_value(int cell, int steps_left, double discount) const;

 private:
  std::vector<double> rewards_;
  int horizon_;
};

std::unique_ptr<Environment> make_environment(const std::string& id);
std::vector<std::string> environment_ids();

enum class Tier { kRandom, kMedium, kExpert, kMediumReplay, kMediumExpert };

std::string to_string(Tier tier);
Tier parse_tier(const std::string& name);  // throws InvalidInput for unknown tiers
std::vector<std::string> tier_names();

struct DatasetSpec {
  std::string env_id;
  Tier tier = Tier::kMedium;
  int trajectories = 2000;
  std::uint64_t seed = 0;
  // Optional replacement of a fraction of the dataset by another tier.
  std::optional<Tier> mix_tier;
  double mix_percent = 0.0;
};

// Episode-level behaviour policy. `episode` and `episodes` locate the rollout
// within the collection so medium-replay can schedule its improving snapshots.
std::vector<double> behavior_action(const Environment& env, Tier tier, const EnvState& state, int episode,
                                    int episodes, Rng& rng);

RawTrajectory rollout_episode(const Environment& env, Tier tier, int episode, int episodes, Rng& rng);

std::vector<RawTrajectory> collect_dataset(const DatasetSpec& spec);

// Replaces floor(percent% * |base|) base trajectories by seeded draws from replacement.
std::vector<RawTrajectory> mix_datasets(const std::vector<RawTrajectory>& base,
                                        const std::vector<RawTrajectory>& replacement, double percent,
                                        std::uint64_t seed);

double episode_return(const RawTrajectory& traj);

struct ReferenceReturns {
  double random = 0.0;
  double expert = 0.0;
};

struct RegistryEntry {
  std::string env_id;
  ReferenceReturns reference;
  std::vector<double> state_lower, state_upper, action_lower, action_upper;
  int episode_length = 0;
};

// Persisted reference returns, measured once with reference_rollouts() and frozen.
const RegistryEntry& registry_entry(const std::string& env_id);
std::vector<RegistryEntry> registry();
std::string registry_text();

// Mean episode returns of the random and expert tiers over `episodes` seeded rollouts.
ReferenceReturns reference_rollouts(const Environment& env, int episodes, std::uint64_t seed);
inline constexpr int kReferenceEpisodes = 1000;
inline constexpr std::uint64_t kReferenceSeed = 20220614;

// 100 * (return - random) / (expert - random).
double normalized_score(double episode_return, const std::string& env_id);
double normalized_score(double episode_return, const ReferenceReturns& ref);

}  // namespace boot
