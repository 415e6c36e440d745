#include "boot/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "boot/rng.hpp"

namespace boot {

namespace {

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw InvalidInput("vectors differ in width");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void require_steps(int length, int steps) {
  if (steps < 1 || steps > length) throw InvalidInput("segment length out of range");
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void append_step(std::vector<double>& out, const AugmentedTrajectory& t, int step, bool with_reward) {
  const auto s = t.states.row(step);
  const auto a = t.actions.row(step);
  out.insert(out.end(), s.begin(), s.end());
  out.insert(out.end(), a.begin(), a.end());
  if (with_reward) {
    out.push_back(t.rewards[step]);
    out.push_back(t.reward_to_go[step]);
  }
}

}  // namespace

PointSet last_steps(const std::vector<AugmentedTrajectory>& trajs, int steps, bool with_reward) {
  PointSet out;
  out.reserve(trajs.size());
  for (const auto& t : trajs) {
    require_steps(t.length(), steps);
    std::vector<double> v;
    for (int k = t.length() - steps; k < t.length(); ++k) append_step(v, t, k, with_reward);
    out.push_back(std::move(v));
  }
  return out;
}

PointSet last_steps_tokens(const std::vector<TokenSequence>& seqs, int steps) {
  PointSet out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) {
    require_steps(s.steps(), steps);
    const size_t start = static_cast<size_t>(s.steps() - steps) * s.layout.tokens_per_step();
    out.emplace_back(s.tokens.begin() + start, s.tokens.end());
  }
  return out;
}

double rmse_distance(const PointSet& x, const PointSet& y) {
  if (x.size() != y.size()) throw InvalidInput("rmse needs index-paired sets of equal size");
  if (x.empty()) throw InvalidInput("rmse of empty sets");
  double total = 0.0;
  for (size_t i = 0; i < x.size(); ++i) total += std::sqrt(squared_distance(x[i], y[i]));
  return total / static_cast<double>(x.size());
}

double gaussian_kernel(const std::vector<double>& a, const std::vector<double>& b, double sigma) {
  if (!(sigma > 0.0)) throw InvalidInput("kernel bandwidth must be positive");
  return std::exp(-squared_distance(a, b) / (2.0 * sigma * sigma));
}

double mmd_gaussian(const PointSet& x, const PointSet& y, double sigma) {
  if (!(sigma > 0.0)) throw InvalidInput("kernel bandwidth must be positive");
  if (x.size() != y.size()) throw InvalidInput("mmd sets must have equal size");
  const size_t n = x.size();
  if (n < 2) throw InvalidInput("mmd needs at least two points per set");
  const double inv = 1.0 / (2.0 * sigma * sigma);
  auto within = [&](const PointSet& s) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = i + 1; j < n; ++j) acc += std::exp(-squared_distance(s[i], s[j]) * inv);
    }
    return 2.0 * acc;
  };
  double cross = 0.0;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) cross += std::exp(-squared_distance(x[i], y[j]) * inv);
  }
  const double nn1 = static_cast<double>(n) * static_cast<double>(n - 1);
  const double n2 = static_cast<double>(n) * static_cast<double>(n);
  return within(x) / nn1 - 2.0 * cross / n2 + within(y) / nn1;
}

double median_bandwidth(const std::vector<const PointSet*>& sets) {
  std::vector<const std::vector<double>*> pool;
  for (const PointSet* s : sets) {
    for (const auto& v : *s) pool.push_back(&v);
  }
  if (pool.size() < 2) throw InvalidInput("median bandwidth needs at least two points");
  std::vector<double> d;
  d.reserve(pool.size() * (pool.size() - 1) / 2);
  for (size_t i = 0; i < pool.size(); ++i) {
    for (size_t j = i + 1; j < pool.size(); ++j) d.push_back(std::sqrt(squared_distance(*pool[i], *pool[j])));
  }
  const size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + mid, d.end());
  double med = d[mid];
  if (d.size() % 2 == 0) med = 0.5 * (med + *std::max_element(d.begin(), d.begin() + mid));
  return med > 0.0 ? med : 1.0;
}

double inter_state_distance(const Series& predicted, const Series& real) {
  if (predicted.width != real.width || predicted.steps() != real.steps()) {
    throw InvalidInput("predicted and real states are not paired");
  }
  if (predicted.steps() == 0) throw InvalidInput("inter-state distance needs at least one pair");
  double total = 0.0;
  for (int t = 0; t < predicted.steps(); ++t) {
    const auto p = predicted.row(t);
    const auto r = real.row(t);
    for (int i = 0; i < predicted.width; ++i) total += (p[i] - r[i]) * (p[i] - r[i]);
  }
  return total / predicted.steps();
}

void export_transitions(std::ostream& out, const std::vector<TransitionSet>& sets, int steps, bool with_reward,
                        std::uint64_t seed, int max_per_set) {
  int sd = -1, ad = -1;
  for (const auto& set : sets) {
    for (const auto& t : set.trajectories) {
      if (sd < 0) {
        sd = t.state_dim();
        ad = t.action_dim();
      }
      if (t.state_dim() != sd || t.action_dim() != ad) throw InvalidInput("transition sets differ in dimensions");
    }
  }
  if (sd < 0) sd = ad = 0;
  for (int i = 0; i < sd; ++i) out << 's' << i << ',';
  for (int i = 0; i < ad; ++i) out << 'a' << i << ',';
  if (with_reward) out << "r,R,";
  out << "label\n";
  for (const auto& set : sets) {
    std::vector<size_t> idx(set.trajectories.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (static_cast<int>(idx.size()) > max_per_set) {
      Rng rng(derive_seed(seed, "export:" + set.label));
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(max_per_set);
      std::sort(idx.begin(), idx.end());
    }
    for (size_t i : idx) {
      const auto& t = set.trajectories[i];
      require_steps(t.length(), steps);
      for (int k = t.length() - steps; k < t.length(); ++k) {
        std::vector<double> v;
        append_step(v, t, k, with_reward);
        for (double x : v) out << fmt(x) << ',';
        out << set.label << '\n';
      }
    }
  }
}

DistanceReport compare_dataset(const std::string& method, const std::vector<TokenSequence>& sources,
                               const std::vector<TokenSequence>& generated, const Discretizer& disc, int steps,
                               double sigma) {
  DistanceReport r;
  r.method = method;
  r.comparison = "dataset";
  r.count = static_cast<int>(generated.size());
  r.rmse_discrete = rmse_distance(last_steps_tokens(sources, steps), last_steps_tokens(generated, steps));
  std::vector<AugmentedTrajectory> a, b;
  for (const auto& s : sources) a.push_back(disc.reconstruct(s));
  for (const auto& g : generated) b.push_back(disc.reconstruct(g));
  const PointSet x = last_steps(a, steps);
  const PointSet y = last_steps(b, steps);
  r.rmse_continuous = rmse_distance(x, y);
  r.sigma = sigma > 0.0 ? sigma : median_bandwidth({&x, &y});
  r.mmd_squared = mmd_gaussian(x, y, r.sigma);
  r.mmd = r.mmd_squared >= 0.0 ? std::sqrt(r.mmd_squared) : std::numeric_limits<double>::quiet_NaN();
  r.inter_state = std::numeric_limits<double>::quiet_NaN();
  return r;
}

std::string distance_csv_header() {
  return "method,comparison,count,rmse_discrete,rmse_continuous,mmd_squared,mmd,sigma,inter_state";
}

std::string distance_csv_row(const DistanceReport& r) {
  std::ostringstream s;
  s << r.method << ',' << r.comparison << ',' << r.count << ',' << fmt(r.rmse_discrete) << ','
    << fmt(r.rmse_continuous) << ',' << fmt(r.mmd_squared) << ',' << fmt(r.mmd) << ',' << fmt(r.sigma) << ','
    << fmt(r.inter_state);
  return s.str();
}

std::string distance_csv(const std::vector<DistanceReport>& reports) {
  std::string out = distance_csv_header() + "\n";
  for (const auto& r : reports) out += distance_csv_row(r) + "\n";
  return out;
}

}  // namespace boot
