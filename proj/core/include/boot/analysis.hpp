#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "boot/trajectory.hpp"

namespace boot {

// One flattened vector per trajectory segment.
using PointSet = std::vector<std::vector<double>>;

// Last `steps` timesteps of each trajectory, flattened as (s, a, r, R) per step
// in continuous units; with_reward = false keeps (s, a) only.
PointSet last_steps(const std::vector<AugmentedTrajectory>& trajs, int steps, bool with_reward = true);
// Same segments as raw token values.
PointSet last_steps_tokens(const std::vector<TokenSequence>& seqs, int steps);

// Mean over index-paired rows of the Euclidean norm of their difference.
double rmse_distance(const PointSet& x, const PointSet& y);

double gaussian_kernel(const std::vector<double>& a, const std::vector<double>& b, double sigma);
// Signed unbiased squared MMD; may be negative.
double mmd_gaussian(const PointSet& x, const PointSet& y, double sigma);
// Median of pairwise Euclidean distances over the pooled sets.
double median_bandwidth(const std::vector<const PointSet*>& sets);

// Mean squared Euclidean error between predicted and real next states.
double inter_state_distance(const Series& predicted, const Series& real);

struct TransitionSet {
  std::string label;  // original | teacher-forcing | autoregressive
  std::vector<AugmentedTrajectory> trajectories;
};

// CSV of per-timestep transition vectors over the last `steps` timesteps with a
// trailing label column. Sets larger than max_per_set are subsampled.
void export_transitions(std::ostream& out, const std::vector<TransitionSet>& sets, int steps, bool with_reward,
                        std::uint64_t seed, int max_per_set = 2500);

struct DistanceReport {
  std::string method;
  std::string comparison;  // dataset | environment
  double rmse_discrete = 0.0;
  double rmse_continuous = 0.0;
  double mmd_squared = 0.0;
  double mmd = 0.0;  // sqrt of mmd_squared, NaN when negative
  double sigma = 0.0;
  double inter_state = 0.0;  // NaN for dataset comparisons
  int count = 0;
};

// Compares generated sequences with their index-paired sources over the
// regenerated tail. sigma <= 0 selects the median heuristic.
DistanceReport compare_dataset(const std::string& method, const std::vector<TokenSequence>& sources,
                               const std::vector<TokenSequence>& generated, const Discretizer& disc, int steps,
                               double sigma = 0.0);

std::string distance_csv_header();
std::string distance_csv_row(const DistanceReport& r);
std::string distance_csv(const std::vector<DistanceReport>& reports);

}  // namespace boot
