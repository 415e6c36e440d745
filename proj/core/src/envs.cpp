#include "boot/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "boot/keyvalue.hpp"

namespace boot {

std::vector<double> Environment::clamp_action(std::span<const double> action) const {
  if (static_cast<int>(action.size()) != action_dim()) throw InvalidInput("action dimension mismatch");
  const auto lo = action_lower();
  const auto hi = action_upper();
  std::vector<double> out(action.begin(), action.end());
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] = std::isfinite(out[i]) ? std::clamp(out[i], lo[i], hi[i]) : 0.0;
  }
  return out;
}

std::vector<double> PointChase::state_lower() const {
  return {-kMaxPosition, -kMaxPosition, -kMaxVelocity, -kMaxVelocity};
}
std::vector<double> PointChase::state_upper() const {
  return {kMaxPosition, kMaxPosition, kMaxVelocity, kMaxVelocity};
}

EnvState PointChase::reset(Rng& rng) const {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double px = u(rng);
  const double py = u(rng);
  return {{px, py, 0.0, 0.0}, 0};
}

StepResult PointChase::step(const EnvState& state, std::span<const double> action, Rng&) const {
  const auto a = clamp_action(action);
  const auto& s = state.observation;
  if (s.size() != 4) throw InvalidInput("point_chase state must have 4 entries");
  StepResult r;
  r.next.time = state.time + 1;
  r.next.observation.resize(4);
  for (int i = 0; i < 2; ++i) {
    const double v = std::clamp(s[2 + i] + kDt * a[i], -kMaxVelocity, kMaxVelocity);
    r.next.observation[2 + i] = v;
    r.next.observation[i] = std::clamp(s[i] + kDt * v, -kMaxPosition, kMaxPosition);
  }
  r.reward = -std::hypot(r.next.observation[0], r.next.observation[1]);
  r.done = r.next.time >= episode_length();
  return r;
}

std::vector<double> PointChase::expert_action(const EnvState& state) const {
  const auto& s = state.observation;
  std::vector<double> a(2);
  for (int i = 0; i < 2; ++i) a[i] = std::clamp(-kGainP * s[i] - kGainD * s[2 + i], -kMaxAccel, kMaxAccel);
  return a;
}

ChainMDP::ChainMDP() : horizon_(4) {
  rewards_.resize(kCells * kActions);
  for (int c = 0; c < kCells; ++c)
    for (int a = 0; a < kActions; ++a) rewards_[c * kActions + a] = next_cell(c, a) / 4.0;
}

ChainMDP::ChainMDP(std::vector<double> reward_table, int horizon) : rewards_(std::move(reward_table)), horizon_(horizon) {
  if (rewards_.size() != static_cast<size_t>(kCells * kActions)) throw InvalidInput("chain reward table must be 5x2");
  if (horizon < 1) throw InvalidInput("chain horizon must be positive");
}

int ChainMDP::next_cell(int cell, int action) {
  return std::clamp(cell + (action == 1 ? 1 : -1), 0, kCells - 1);
}

std::vector<double> ChainMDP::clamp_action(std::span<const double> action) const {
  if (action.size() != 1) throw InvalidInput("chain action has one entry");
  return {std::isfinite(action[0]) && action[0] >= 0.5 ? 1.0 : 0.0};
}

EnvState ChainMDP::reset(Rng&) const { return {{0.0}, 0}; }

StepResult ChainMDP::step(const EnvState& state, std::span<const double> action, Rng&) const {
  if (state.observation.size() != 1) throw InvalidInput("chain state has one entry");
  const int cell = std::clamp(static_cast<int>(std::lround(state.observation[0])), 0, kCells - 1);
  const int a = clamp_action(action)[0] >= 0.5 ? 1 : 0;
  StepResult r;
  r.next.time = state.time + 1;
  r.next.observation = {static_cast<double>(next_cell(cell, a))};
  r.reward = reward(cell, a);
  r.done = r.next.time >= horizon_;
  return r;
}

std::vector<double> ChainMDP::expert_action(const EnvState& state) const {
  const int cell = std::clamp(static_cast<int>(std::lround(state.observation[0])), 0, kCells - 1);
  const int left = horizon_ - state.time;
  int best = 0;
  double best_v = -1e300;
  for (int a = 0; a < kActions; ++a) {
    const double v = reward(cell, a) + optimal_value(next_cell(cell, a), left - 1);
    if (v > best_v) {
      best_v = v;
      best = a;
    }
  }
  return {static_cast<double>(best)};
}

double ChainMDP::optimal_value(int cell, int steps_left) const {
  if (steps_left <= 0) return 0.0;
  double best = -1e300;
  for (int a = 0; a < kActions; ++a) best = std::max(best, reward(cell, a) + optimal_value(next_cell(cell, a), steps_left - 1));
  return best;
}

double ChainMDP::uniform_value(int cell, int steps_left, double discount) const {
  if (steps_left <= 0) return 0.0;
  double v = 0.0;
  for (int a = 0; a < kActions; ++a) {
    v += 0.5 * (reward(cell, a) + discount * uniform_value(next_cell(cell, a), steps_left - 1, discount));
  }
  return v;
}

std::unique_ptr<Environment> make_environment(const std::string& id) {
  if (id == "point_chase") return std::make_unique<PointChase>();
  if (id == "chain_mdp") return std::make_unique<ChainMDP>();
  throw InvalidInput("unknown environment '" + id + "'");
}

std::vector<std::string> environment_ids() { return {"point_chase", "chain_mdp"}; }

std::string to_string(Tier tier) {
  switch (tier) {
    case Tier::kRandom: return "random";
    case Tier::kMedium: return "medium";
    case Tier::kExpert: return "expert";
    case Tier::kMediumReplay: return "medium-replay";
    case Tier::kMediumExpert: return "medium-expert";
  }
  return "?";
}

Tier parse_tier(const std::string& name) {
  for (Tier t : {Tier::kRandom, Tier::kMedium, Tier::kExpert, Tier::kMediumReplay, Tier::kMediumExpert}) {
    if (to_string(t) == name) return t;
  }
  throw InvalidInput("unknown tier '" + name + "'");
}

std::vector<std::string> tier_names() { return {"random", "medium", "expert", "medium-replay", "medium-expert"}; }

namespace {

constexpr double kMediumNoise = 0.3;       // action noise std as a fraction of the action range
constexpr double kMediumRandomMix = 0.3;   // probability of a uniform random action
constexpr int kReplaySnapshots = 5;

std::vector<double> uniform_action(const Environment& env, Rng& rng) {
  const auto lo = env.action_lower();
  const auto hi = env.action_upper();
  std::vector<double> a(lo.size());
  for (size_t i = 0; i < a.size(); ++i) a[i] = std::uniform_real_distribution<double>(lo[i], hi[i])(rng);
  return env.clamp_action(a);
}

std::vector<double> noisy_expert(const Environment& env, const EnvState& s, double noise_fraction, double random_mix,
                                 Rng& rng) {
  if (uniform01(rng) < random_mix) return uniform_action(env, rng);
  auto a = env.expert_action(s);
  const auto lo = env.action_lower();
  const auto hi = env.action_upper();
  for (size_t i = 0; i < a.size(); ++i) {
    a[i] += std::normal_distribution<double>(0.0, noise_fraction * (hi[i] - lo[i]))(rng);
  }
  return env.clamp_action(a);
}

}  // namespace

std::vector<double> behavior_action(const Environment& env, Tier tier, const EnvState& state, int episode, int episodes,
                                    Rng& rng) {
  switch (tier) {
    case Tier::kRandom: return uniform_action(env, rng);
    case Tier::kExpert: return env.clamp_action(env.expert_action(state));
    case Tier::kMedium: return noisy_expert(env, state, kMediumNoise, kMediumRandomMix, rng);
    case Tier::kMediumReplay: {
      // snapshots of a controller improving from very noisy towards medium quality
      const int snap = std::min(kReplaySnapshots - 1, episode * kReplaySnapshots / std::max(1, episodes));
      const double lag = 1.0 - static_cast<double>(snap) / (kReplaySnapshots - 1);
      return noisy_expert(env, state, kMediumNoise * (1.0 + lag), kMediumRandomMix + 0.4 * lag, rng);
    }
    case Tier::kMediumExpert:
      if (episode < episodes / 2) return noisy_expert(env, state, kMediumNoise, kMediumRandomMix, rng);
      return env.clamp_action(env.expert_action(state));
  }
  throw InvalidInput("unknown tier");
}

RawTrajectory rollout_episode(const Environment& env, Tier tier, int episode, int episodes, Rng& rng) {
  RawTrajectory traj;
  traj.states = Series(0, env.state_dim());
  traj.actions = Series(0, env.action_dim());
  EnvState s = env.reset(rng);
  for (int t = 0; t < env.episode_length(); ++t) {
    const auto a = behavior_action(env, tier, s, episode, episodes, rng);
    StepResult r = env.step(s, a, rng);
    traj.states.push_back(s.observation);
    traj.actions.push_back(a);
    traj.rewards.push_back(r.reward);
    s = std::move(r.next);
    if (r.done) {
      traj.terminal = true;
      break;
    }
  }
  return traj;
}

std::vector<RawTrajectory> collect_dataset(const DatasetSpec& spec) {
  if (spec.trajectories < 1) throw InvalidInput("dataset needs at least one trajectory");
  const auto env = make_environment(spec.env_id);
  auto collect = [&](Tier tier, std::uint64_t seed) {
    std::vector<RawTrajectory> out;
    out.reserve(spec.trajectories);
    for (int i = 0; i < spec.trajectories; ++i) {
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
      out.push_back(rollout_episode(*env, tier, i, spec.trajectories, rng));
    }
    return out;
  };
  auto base = collect(spec.tier, derive_seed(spec.seed, "collect:" + to_string(spec.tier)));
  if (!spec.mix_tier || spec.mix_percent <= 0.0) return base;
  auto replacement = collect(*spec.mix_tier, derive_seed(spec.seed, "collect:" + to_string(*spec.mix_tier)));
  return mix_datasets(base, replacement, spec.mix_percent, derive_seed(spec.seed, "mix"));
}

std::vector<RawTrajectory> mix_datasets(const std::vector<RawTrajectory>& base,
                                        const std::vector<RawTrajectory>& replacement, double percent,
                                        std::uint64_t seed) {
  if (!(percent >= 0.0 && percent <= 100.0)) throw InvalidInput("mix percentage must lie in [0, 100]");
  if (base.empty()) return base;
  const size_t count = static_cast<size_t>(std::floor(percent / 100.0 * static_cast<double>(base.size()) + 1e-9));
  if (count == 0) return base;
  if (replacement.empty()) throw InvalidInput("replacement dataset is empty");
  for (const auto& r : replacement) {
    if (r.state_dim() != base.front().state_dim() || r.action_dim() != base.front().action_dim()) {
      throw InvalidInput("replacement dataset has different dimensions");
    }
  }
  Rng rng(seed);
  std::vector<size_t> slots(base.size());
  std::iota(slots.begin(), slots.end(), 0);
  std::shuffle(slots.begin(), slots.end(), rng);
  std::vector<size_t> draws(replacement.size());
  std::iota(draws.begin(), draws.end(), 0);
  std::shuffle(draws.begin(), draws.end(), rng);
  std::vector<RawTrajectory> out = base;
  for (size_t i = 0; i < count; ++i) out[slots[i]] = replacement[draws[i % draws.size()]];
  return out;
}

double episode_return(const RawTrajectory& traj) {
  return std::accumulate(traj.rewards.begin(), traj.rewards.end(), 0.0);
}

ReferenceReturns reference_rollouts(const Environment& env, int episodes, std::uint64_t seed) {
  ReferenceReturns ref;
  for (Tier tier : {Tier::kRandom, Tier::kExpert}) {
    double total = 0.0;
    const std::uint64_t base = derive_seed(seed, "reference:" + to_string(tier));
    for (int i = 0; i < episodes; ++i) {
      Rng rng(derive_seed(base, static_cast<std::uint64_t>(i)));
      total += episode_return(rollout_episode(env, tier, i, episodes, rng));
    }
    (tier == Tier::kRandom ? ref.random : ref.expert) = total / episodes;
  }
  return ref;
}

namespace {

RegistryEntry describe(const Environment& env, ReferenceReturns ref) {
  return {env.id(), ref, env.state_lower(), env.state_upper(), env.action_lower(), env.action_upper(),
          env.episode_length()};
}

}  // namespace

std::vector<RegistryEntry> registry() {
  // Frozen output of reference_rollouts(env, kReferenceEpisodes, kReferenceSeed).
  return {
      describe(PointChase(), {-12.606351300241542, -1.0069221112972495}),
      describe(ChainMDP(), {0.88875000000000004, 2.5}),
  };
}

const RegistryEntry& registry_entry(const std::string& env_id) {
  static const std::vector<RegistryEntry> entries = registry();
  for (const auto& e : entries) {
    if (e.env_id == env_id) return e;
  }
  throw InvalidInput("environment '" + env_id + "' is not registered");
}

std::string registry_text() {
  KeyValueText kv;
  kv.set("format", "boot-env-registry/1");
  for (const auto& e : registry()) {
    const std::string p = "env." + e.env_id + ".";
    kv.set(p + "random_return", e.reference.random);
    kv.set(p + "expert_return", e.reference.expert);
    kv.set(p + "episode_length", e.episode_length);
    auto list = [](const std::vector<double>& v) {
      std::string s;
      for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
      return s;
    };
    kv.set(p + "state_lower", list(e.state_lower));
    kv.set(p + "state_upper", list(e.state_upper));
    kv.set(p + "action_lower", list(e.action_lower));
    kv.set(p + "action_upper", list(e.action_upper));
  }
  return kv.serialize();
}

double normalized_score(double episode_return, const ReferenceReturns& ref) {
  if (ref.expert == ref.random) throw InvalidInput("expert and random reference returns coincide");
  return 100.0 * (episode_return - ref.random) / (ref.expert - ref.random);
}

double normalized_score(double episode_return, const std::string& env_id) {
  return normalized_score(episode_return, registry_entry(env_id).reference);
}

}  // namespace boot
