#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace boot {

// Thrown for inputs that violate an operation's preconditions.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Fixed-width row-major storage for per-timestep vectors.
struct Series {
  int width = 0;
  std::vector<double> values;

  Series() = default;
  Series(int steps, int w) : width(w), values(static_cast<size_t>(steps) * w, 0.0) {}

  int steps() const { return width == 0 ? 0 : static_cast<int>(values.size() / width); }
  std::span<double> row(int t) { return {values.data() + static_cast<size_t>(t) * width, static_cast<size_t>(width)}; }
  std::span<const double> row(int t) const {
    return {values.data() + static_cast<size_t>(t) * width, static_cast<size_t>(width)};
  }
  void push_back(std::span<const double> v);
  bool operator==(const Series&) const = default;
};

struct RawTrajectory {
  Series states;
  Series actions;
  std::vector<double> rewards;
  bool terminal = false;

  int length() const { return static_cast<int>(rewards.size()); }
  int state_dim() const { return states.width; }
  int action_dim() const { return actions.width; }

  // Throws InvalidInput unless lengths agree, T >= 1 and every entry is finite.
  void validate() const;
  bool operator==(const RawTrajectory&) const = default;
};

struct AugmentedTrajectory : RawTrajectory {
  std::vector<double> reward_to_go;
  double discount = 1.0;

  bool operator==(const AugmentedTrajectory&) const = default;
};

// Backward-pass discounted suffix sums. Throws InvalidInput on empty or
// non-finite rewards and for discount outside (0, 1].
std::vector<double> compute_reward_to_go(std::span<const double> rewards, double discount);

AugmentedTrajectory augment(const RawTrajectory& traj, double discount);

// Cuts an augmented episode into windows of `window` steps with the given
// stride. Episodes shorter than a window produce nothing.
std::vector<AugmentedTrajectory> slice_windows(const AugmentedTrajectory& traj, int window, int stride);

enum class FieldKind : std::uint8_t { kState, kAction, kReward, kRewardToGo };

const char* to_string(FieldKind kind);

struct TokenPosition {
  int step = 0;
  FieldKind kind = FieldKind::kState;
  int dim = 0;
  bool operator==(const TokenPosition&) const = default;
};

// Flat token ordering within a step: state dims, action dims, reward, reward-to-go.
class VocabLayout {
 public:
  VocabLayout() = default;
  VocabLayout(int state_dim, int action_dim, int bins);

  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  int bins() const { return bins_; }
  int tokens_per_step() const { return state_dim_ + action_dim_ + 2; }
  int fields() const { return tokens_per_step(); }

  // Field index in [0, fields()) for (kind, dim).
  int field(FieldKind kind, int dim = 0) const;
  int flat_index(const TokenPosition& pos) const;
  TokenPosition position(int flat) const;
  int field_of(int flat) const { return flat % tokens_per_step(); }
  FieldKind kind_of_field(int field) const;

  bool operator==(const VocabLayout&) const = default;

 private:
  int state_dim_ = 0;
  int action_dim_ = 0;
  int bins_ = 0;
};

struct TokenSequence {
  std::vector<int> tokens;
  VocabLayout layout;

  int size() const { return static_cast<int>(tokens.size()); }
  int steps() const { return size() / layout.tokens_per_step(); }
  void validate() const;
  bool operator==(const TokenSequence&) const = default;
};

// Uniform per-field binning over [lower, upper].
class Discretizer {
 public:
  Discretizer() = default;
  Discretizer(VocabLayout layout, std::vector<double> lower, std::vector<double> upper);

  const VocabLayout& layout() const { return layout_; }
  int bins() const { return layout_.bins(); }
  double lower(int field) const { return lower_.at(field); }
  double upper(int field) const { return upper_.at(field); }
  const std::vector<double>& lower_bounds() const { return lower_; }
  const std::vector<double>& upper_bounds() const { return upper_; }
  double bin_width(int field) const { return (upper_[field] - lower_[field]) / bins(); }

  int encode(int field, double x) const;
  double decode(int field, int token) const;

  TokenSequence discretize(const AugmentedTrajectory& traj) const;
  AugmentedTrajectory reconstruct(const TokenSequence& tokens) const;

  bool operator==(const Discretizer&) const = default;

 private:
  VocabLayout layout_;
  std::vector<double> lower_;
  std::vector<double> upper_;
};

// Widening applied to constant fields.
double degenerate_padding(double value);

Discretizer fit_discretizer(std::span<const AugmentedTrajectory> dataset, int bins);

}  // namespace boot
