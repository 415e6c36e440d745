#include "boot/analysis.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "boot/rng.hpp"

namespace boot {
namespace {

PointSet random_set(Rng& rng, int n, int width, double shift = 0.0) {
  std::normal_distribution<double> g(shift, 1.0);
  PointSet s(n, std::vector<double>(width));
  for (auto& v : s)
    for (double& x : v) x = g(rng);
  return s;
}

double naive_rmse(const PointSet& x, const PointSet& y) {
  double total = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    double sq = 0.0;
    for (size_t k = 0; k < x[i].size(); ++k) sq += std::pow(x[i][k] - y[i][k], 2);
    total += std::sqrt(sq);
  }
  return total / x.size();
}

double naive_k(const std::vector<double>& a, const std::vector<double>& b, double sigma) {
  double sq = 0.0;
  for (size_t k = 0; k < a.size(); ++k) sq += std::pow(a[k] - b[k], 2);
  return std::exp(-sq / (2 * sigma * sigma));
}

double naive_mmd(const PointSet& x, const PointSet& y, double sigma) {
  const double n = x.size();
  double xx = 0, xy = 0, yy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    for (size_t j = 0; j < x.size(); ++j) {
      if (j != i) xx += naive_k(x[i], x[j], sigma);
      if (j != i) yy += naive_k(y[i], y[j], sigma);
      xy += naive_k(x[i], y[j], sigma);
    }
  }
  return xx / (n * (n - 1)) - 2 * xy / (n * n) + yy / (n * (n - 1));
}

TEST(Rmse, Examples) {
  const PointSet x{{0, 0, 0}};
  const PointSet y{{3, 0, 4}};
  EXPECT_EQ(rmse_distance(x, y), 5.0);
  EXPECT_EQ(rmse_distance(x, x), 0.0);
  EXPECT_THROW(rmse_distance(x, PointSet{}), InvalidInput);
  EXPECT_THROW(rmse_distance(x, PointSet{{1, 2}}), InvalidInput);
}

TEST(Rmse, MatchesNaiveAndSymmetric) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_set(rng, 10, 6);
    const auto y = random_set(rng, 10, 6);
    EXPECT_NEAR(rmse_distance(x, y), naive_rmse(x, y), 1e-12);
    EXPECT_EQ(rmse_distance(x, y), rmse_distance(y, x));
  }
}

TEST(Mmd, IdenticalPointsGiveZero) {
  const PointSet x(4, std::vector<double>{1.0, 2.0});
  EXPECT_NEAR(mmd_gaussian(x, x, 0.7), 0.0, 1e-15);
}

TEST(Mmd, TwoPointIdenticalSets) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_set(rng, 2, 3);
    const double sigma = 0.5 + trial * 0.1;
    const double got = mmd_gaussian(x, x, sigma);
    // equal up to the rounding of the three kernel sums
    EXPECT_NEAR(got, gaussian_kernel(x[0], x[1], sigma) - 1.0, 0x1p-50);
    EXPECT_LE(got, 0.0);
  }
}

TEST(Mmd, MatchesNaiveOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_set(rng, 8, 4);
    const auto y = random_set(rng, 8, 4, 0.5);
    const double sigma = median_bandwidth({&x, &y});
    EXPECT_NEAR(mmd_gaussian(x, y, sigma), naive_mmd(x, y, sigma), 1e-12);
    EXPECT_NEAR(mmd_gaussian(x, y, sigma), mmd_gaussian(y, x, sigma), 1e-12);
  }
}

TEST(Mmd, TranslationInvariant) {
  Rng rng(4);
  auto x = random_set(rng, 6, 3);
  auto y = random_set(rng, 6, 3, 1.0);
  const double before = mmd_gaussian(x, y, 1.3);
  for (auto* s : {&x, &y})
    for (auto& v : *s)
      for (double& c : v) c += 2.5;
  EXPECT_NEAR(mmd_gaussian(x, y, 1.3), before, 1e-12);
}

TEST(Mmd, Rejections) {
  const PointSet x{{0.0}, {1.0}};
  EXPECT_THROW(mmd_gaussian(x, x, 0.0), InvalidInput);
  EXPECT_THROW(mmd_gaussian(x, x, -1.0), InvalidInput);
  EXPECT_THROW(mmd_gaussian(PointSet{{0.0}}, PointSet{{0.0}}, 1.0), InvalidInput);
}

TEST(MedianBandwidth, Examples) {
  const PointSet x{{0.0}, {1.0}, {3.0}};  // distances 1, 2, 3
  EXPECT_EQ(median_bandwidth({&x}), 2.0);
  const PointSet y{{0.0}, {1.0}};
  const PointSet z{{3.0}, {7.0}};  // distances 1 3 7 2 6 4 -> median 3.5
  EXPECT_EQ(median_bandwidth({&y, &z}), 3.5);
}

Series series(const PointSet& rows) {
  Series s(0, static_cast<int>(rows.front().size()));
  for (const auto& r : rows) s.push_back(r);
  return s;
}

TEST(InterState, Examples) {
  const PointSet real{{1.0, 2.0, 3.0}, {0.0, 0.0, 0.0}};
  PointSet off = real;
  for (auto& r : off)
    for (double& v : r) v += 0.5;
  EXPECT_DOUBLE_EQ(inter_state_distance(series(off), series(real)), 3 * 0.25);
  EXPECT_EQ(inter_state_distance(series(real), series(real)), 0.0);
  EXPECT_THROW(inter_state_distance(Series(0, 3), Series(0, 3)), InvalidInput);
}

TEST(InterState, MatchesNaive) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_set(rng, 7, 2);
    const auto r = random_set(rng, 7, 2);
    double naive = 0.0;
    for (size_t i = 0; i < p.size(); ++i) naive += std::pow(p[i][0] - r[i][0], 2) + std::pow(p[i][1] - r[i][1], 2);
    EXPECT_NEAR(inter_state_distance(series(p), series(r)), naive / p.size(), 1e-12);
  }
}

AugmentedTrajectory traj(int steps, double base) {
  RawTrajectory raw;
  raw.states = Series(0, 2);
  raw.actions = Series(0, 1);
  for (int t = 0; t < steps; ++t) {
    raw.states.push_back(std::vector<double>{base + t, -base});
    raw.actions.push_back(std::vector<double>{0.5});
    raw.rewards.push_back(1.0);
  }
  return augment(raw, 1.0);
}

TEST(LastSteps, Segments) {
  const std::vector<AugmentedTrajectory> ts{traj(4, 0.0)};
  const auto with = last_steps(ts, 2, true);
  EXPECT_EQ(with[0], (std::vector<double>{2, 0, 0.5, 1, 2, 3, 0, 0.5, 1, 1}));
  EXPECT_EQ(last_steps(ts, 1, false)[0], (std::vector<double>{3, 0, 0.5}));
  EXPECT_THROW(last_steps(ts, 5), InvalidInput);
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

TEST(ExportTransitions, WidthsAndLabels) {
  std::vector<TransitionSet> sets{{"original", {traj(5, 0), traj(5, 1), traj(5, 2)}},
                                  {"teacher-forcing", {traj(5, 3)}}};
  std::ostringstream a;
  export_transitions(a, sets, 2, false, 1);
  std::istringstream in(a.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "s0,s1,a0,label");
  std::string line;
  int originals = 0, tf = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 3);
    if (line.ends_with(",original")) ++originals;
    if (line.ends_with(",teacher-forcing")) ++tf;
  }
  EXPECT_EQ(originals, 3 * 2);
  EXPECT_EQ(tf, 2);
  std::ostringstream b;
  export_transitions(b, sets, 1, true, 1);
  EXPECT_TRUE(b.str().starts_with("s0,s1,a0,r,R,label\n"));
  EXPECT_EQ(count_lines(b.str()), 1 + 4);
}

TEST(ExportTransitions, CapsSetSize) {
  TransitionSet big{"autoregressive", {}};
  for (int i = 0; i < 30; ++i) big.trajectories.push_back(traj(3, i));
  std::ostringstream a, b;
  export_transitions(a, {big}, 1, true, 9, 10);
  export_transitions(b, {big}, 1, true, 9, 10);
  EXPECT_EQ(count_lines(a.str()), 1 + 10);
  EXPECT_EQ(a.str(), b.str());
}

TEST(CompareDataset, ReportFields) {
  const VocabLayout lay(2, 1, 50);
  std::vector<AugmentedTrajectory> src{traj(4, 0.0), traj(4, 1.0), traj(4, 2.0)};
  const Discretizer disc = fit_discretizer(src, 50);
  std::vector<TokenSequence> a, b;
  for (const auto& t : src) a.push_back(disc.discretize(t));
  b = a;
  b[0].tokens.back() = (b[0].tokens.back() + 3) % 50;
  const auto r = compare_dataset("tf", a, b, disc, 1);
  EXPECT_EQ(r.rmse_discrete, 3.0 / 3.0);
  EXPECT_GT(r.rmse_continuous, 0.0);
  EXPECT_GT(r.sigma, 0.0);
  EXPECT_TRUE(std::isnan(r.inter_state));
  const auto csv = distance_csv({r});
  EXPECT_TRUE(csv.starts_with(distance_csv_header() + "\n" + "tf,dataset,3,1,"));
}

}  // namespace
}  // namespace boot
