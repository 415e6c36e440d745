#include "boot/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace boot {

void Series::push_back(std::span<const double> v) {
  if (width == 0) width = static_cast<int>(v.size());
  if (static_cast<int>(v.size()) != width) throw InvalidInput("series row width mismatch");
  values.insert(values.end(), v.begin(), v.end());
}

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

void RawTrajectory::validate() const {
  const int steps = length();
  if (steps < 1) throw InvalidInput("trajectory has no timesteps");
  if (states.steps() != steps || actions.steps() != steps) {
    throw InvalidInput("trajectory sequences have different lengths");
  }
  if (states.width < 1 || actions.width < 1) throw InvalidInput("trajectory needs state and action dimensions");
  if (!all_finite(states.values) || !all_finite(actions.values) || !all_finite(rewards)) {
    throw InvalidInput("trajectory contains non-finite entries");
  }
}

std::vector<double> compute_reward_to_go(std::span<const double> rewards, double discount) {
  if (rewards.empty()) throw InvalidInput("reward-to-go needs at least one reward");
  if (!(discount > 0.0 && discount <= 1.0)) throw InvalidInput("discount must lie in (0, 1]");
  if (!all_finite(rewards)) throw InvalidInput("non-finite reward");
  std::vector<double> out(rewards.size());
  double acc = 0.0;
  for (size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + discount * acc;
    out[i] = acc;
  }
  return out;
}

AugmentedTrajectory augment(const RawTrajectory& traj, double discount) {
  traj.validate();
  AugmentedTrajectory out;
  static_cast<RawTrajectory&>(out) = traj;
  out.reward_to_go = compute_reward_to_go(traj.rewards, discount);
  out.discount = discount;
  return out;
}

std::vector<AugmentedTrajectory> slice_windows(const AugmentedTrajectory& traj, int window, int stride) {
  if (window < 1 || stride < 1) throw InvalidInput("window and stride must be positive");
  std::vector<AugmentedTrajectory> out;
  for (int start = 0; start + window <= traj.length(); start += stride) {
    AugmentedTrajectory w;
    w.discount = traj.discount;
    w.states = Series(0, traj.state_dim());
    w.actions = Series(0, traj.action_dim());
    for (int t = start; t < start + window; ++t) {
      w.states.push_back(traj.states.row(t));
      w.actions.push_back(traj.actions.row(t));
      w.rewards.push_back(traj.rewards[t]);
      w.reward_to_go.push_back(traj.reward_to_go[t]);
    }
    w.terminal = traj.terminal && start + window == traj.length();
    out.push_back(std::move(w));
  }
  return out;
}

const char* to_string(FieldKind kind) {
  switch (kind) {
    case FieldKind::kState: return "state";
    case FieldKind::kAction: return "action";
    case FieldKind::kReward: return "reward";
    case FieldKind::kRewardToGo: return "reward_to_go";
  }
  return "?";
}

VocabLayout::VocabLayout(int state_dim, int action_dim, int bins)
    : state_dim_(state_dim), action_dim_(action_dim), bins_(bins) {
  if (state_dim < 1 || action_dim < 1) throw InvalidInput("layout needs positive state and action dimensions");
  if (bins < 2) throw InvalidInput("layout needs at least two bins");
}

int VocabLayout::field(FieldKind kind, int dim) const {
  switch (kind) {
    case FieldKind::kState:
      if (dim < 0 || dim >= state_dim_) break;
      return dim;
    case FieldKind::kAction:
      if (dim < 0 || dim >= action_dim_) break;
      return state_dim_ + dim;
    case FieldKind::kReward:
      if (dim != 0) break;
      return state_dim_ + action_dim_;
    case FieldKind::kRewardToGo:
      if (dim != 0) break;
      return state_dim_ + action_dim_ + 1;
  }
  throw InvalidInput("field dimension out of range");
}

FieldKind VocabLayout::kind_of_field(int field) const {
  if (field < state_dim_) return FieldKind::kState;
  if (field < state_dim_ + action_dim_) return FieldKind::kAction;
  if (field == state_dim_ + action_dim_) return FieldKind::kReward;
  return FieldKind::kRewardToGo;
}

int VocabLayout::flat_index(const TokenPosition& pos) const {
  if (pos.step < 0) throw InvalidInput("negative step");
  return pos.step * tokens_per_step() + field(pos.kind, pos.dim);
}

TokenPosition VocabLayout::position(int flat) const {
  if (flat < 0) throw InvalidInput("negative token index");
  const int f = field_of(flat);
  const FieldKind kind = kind_of_field(f);
  int dim = 0;
  if (kind == FieldKind::kState) dim = f;
  if (kind == FieldKind::kAction) dim = f - state_dim_;
  return {flat / tokens_per_step(), kind, dim};
}

void TokenSequence::validate() const {
  if (size() % layout.tokens_per_step() != 0) throw InvalidInput("token sequence is not a whole number of steps");
  for (int t : tokens) {
    if (t < 0 || t >= layout.bins()) throw InvalidInput("token outside vocabulary");
  }
}

Discretizer::Discretizer(VocabLayout layout, std::vector<double> lower, std::vector<double> upper)
    : layout_(layout), lower_(std::move(lower)), upper_(std::move(upper)) {
  if (static_cast<int>(lower_.size()) != layout_.fields() || static_cast<int>(upper_.size()) != layout_.fields()) {
    throw InvalidInput("discretizer bounds do not match layout");
  }
  for (int f = 0; f < layout_.fields(); ++f) {
    if (!(lower_[f] < upper_[f]) || !std::isfinite(lower_[f]) || !std::isfinite(upper_[f])) {
      throw InvalidInput("discretizer bounds must be finite with lower < upper");
    }
  }
}

int Discretizer::encode(int field, double x) const {
  const double lo = lower_[field];
  const double hi = upper_[field];
  const double scaled = std::floor(bins() * (x - lo) / (hi - lo));
  if (!(scaled > 0.0)) return 0;  // also catches NaN
  if (scaled >= bins() - 1) return bins() - 1;
  return static_cast<int>(scaled);
}

double Discretizer::decode(int field, int token) const {
  if (token < 0 || token >= bins()) throw InvalidInput("token outside vocabulary");
  return lower_[field] + (token + 0.5) * (upper_[field] - lower_[field]) / bins();
}

TokenSequence Discretizer::discretize(const AugmentedTrajectory& traj) const {
  if (traj.state_dim() != layout_.state_dim() || traj.action_dim() != layout_.action_dim()) {
    throw InvalidInput("trajectory dimensions do not match discretizer layout");
  }
  if (static_cast<int>(traj.reward_to_go.size()) != traj.length()) throw InvalidInput("missing reward-to-go");
  traj.validate();
  TokenSequence out;
  out.layout = layout_;
  out.tokens.reserve(static_cast<size_t>(traj.length()) * layout_.tokens_per_step());
  const int sd = layout_.state_dim();
  const int ad = layout_.action_dim();
  for (int t = 0; t < traj.length(); ++t) {
    auto s = traj.states.row(t);
    auto a = traj.actions.row(t);
    for (int i = 0; i < sd; ++i) out.tokens.push_back(encode(i, s[i]));
    for (int j = 0; j < ad; ++j) out.tokens.push_back(encode(sd + j, a[j]));
    out.tokens.push_back(encode(sd + ad, traj.rewards[t]));
    out.tokens.push_back(encode(sd + ad + 1, traj.reward_to_go[t]));
  }
  return out;
}

AugmentedTrajectory Discretizer::reconstruct(const TokenSequence& tokens) const {
  if (!(tokens.layout == layout_)) throw InvalidInput("token layout does not match discretizer");
  tokens.validate();
  const int sd = layout_.state_dim();
  const int ad = layout_.action_dim();
  const int steps = tokens.steps();
  AugmentedTrajectory out;
  out.states = Series(steps, sd);
  out.actions = Series(steps, ad);
  out.rewards.resize(steps);
  out.reward_to_go.resize(steps);
  for (int t = 0; t < steps; ++t) {
    const int* row = tokens.tokens.data() + static_cast<size_t>(t) * layout_.tokens_per_step();
    for (int i = 0; i < sd; ++i) out.states.row(t)[i] = decode(i, row[i]);
    for (int j = 0; j < ad; ++j) out.actions.row(t)[j] = decode(sd + j, row[sd + j]);
    out.rewards[t] = decode(sd + ad, row[sd + ad]);
    out.reward_to_go[t] = decode(sd + ad + 1, row[sd + ad + 1]);
  }
  return out;
}

double degenerate_padding(double value) { return std::max(1e-6, 1e-6 * std::abs(value)); }

Discretizer fit_discretizer(std::span<const AugmentedTrajectory> dataset, int bins) {
  if (dataset.empty()) throw InvalidInput("cannot fit a discretizer to an empty dataset");
  const int sd = dataset.front().state_dim();
  const int ad = dataset.front().action_dim();
  VocabLayout layout(sd, ad, bins);
  const int fields = layout.fields();
  std::vector<double> lo(fields, std::numeric_limits<double>::infinity());
  std::vector<double> hi(fields, -std::numeric_limits<double>::infinity());
  auto see = [&](int f, double x) {
    lo[f] = std::min(lo[f], x);
    hi[f] = std::max(hi[f], x);
  };
  for (const auto& traj : dataset) {
    traj.validate();
    if (traj.state_dim() != sd || traj.action_dim() != ad) throw InvalidInput("dataset mixes trajectory dimensions");
    if (static_cast<int>(traj.reward_to_go.size()) != traj.length()) throw InvalidInput("missing reward-to-go");
    for (int t = 0; t < traj.length(); ++t) {
      for (int i = 0; i < sd; ++i) see(i, traj.states.row(t)[i]);
      for (int j = 0; j < ad; ++j) see(sd + j, traj.actions.row(t)[j]);
      see(sd + ad, traj.rewards[t]);
      see(sd + ad + 1, traj.reward_to_go[t]);
    }
  }
  for (int f = 0; f < fields; ++f) {
    if (!(lo[f] < hi[f])) {
      const double pad = degenerate_padding(lo[f]);
      const double v = lo[f];
      lo[f] = v - pad;
      hi[f] = v + pad;
    }
  }
  return Discretizer(layout, std::move(lo), std::move(hi));
}

}  // namespace boot
