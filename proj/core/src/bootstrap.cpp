#include "boot/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace boot {

namespace {

struct SchemeName {
  const char* name;
  SchemeKind kind;
  GenerationScheme generation;
};

constexpr SchemeName kSchemes[] = {
    {"boot-o-tf", SchemeKind::kBootOnce, GenerationScheme::kTeacherForcing},
    {"boot-o-ar", SchemeKind::kBootOnce, GenerationScheme::kAutoregressive},
    {"boot-r-tf", SchemeKind::kBootRepeat, GenerationScheme::kTeacherForcing},
    {"boot-r-ar", SchemeKind::kBootRepeat, GenerationScheme::kAutoregressive},
    {"tt-baseline", SchemeKind::kBaseline, GenerationScheme::kTeacherForcing},
    {"tt-retrain-random", SchemeKind::kRetrainRandom, GenerationScheme::kTeacherForcing},
    {"tt-retrain-lowest-loss", SchemeKind::kRetrainLowest, GenerationScheme::kTeacherForcing},
    {"tt-retrain-largest-loss", SchemeKind::kRetrainLargest, GenerationScheme::kTeacherForcing},
    {"tt-s4rl-all", SchemeKind::kS4rlAll, GenerationScheme::kTeacherForcing},
    {"tt-s4rl-last", SchemeKind::kS4rlLast, GenerationScheme::kTeacherForcing},
};

std::string policy_name(SamplingPolicy p) { return p == SamplingPolicy::kGreedy ? "greedy" : "categorical"; }

SamplingPolicy parse_policy(const std::string& s) {
  if (s == "greedy") return SamplingPolicy::kGreedy;
  if (s == "categorical") return SamplingPolicy::kCategorical;
  throw ConfigError("unknown sampling policy '" + s + "'");
}

}  // namespace

std::string Scheme::name() const {
  for (const auto& s : kSchemes) {
    if (s.kind == kind && (!bootstraps() || s.generation == generation)) return s.name;
  }
  return "?";
}

Scheme Scheme::parse(const std::string& name) {
  if (name == "boot-o") return {SchemeKind::kBootOnce, GenerationScheme::kTeacherForcing};
  if (name == "boot-r") return {SchemeKind::kBootRepeat, GenerationScheme::kTeacherForcing};
  for (const auto& s : kSchemes) {
    if (name == s.name) return {s.kind, s.generation};
  }
  throw ConfigError("unknown scheme '" + name + "'");
}

std::vector<std::string> scheme_names() {
  std::vector<std::string> out;
  for (const auto& s : kSchemes) out.emplace_back(s.name);
  return out;
}

double BootstrapConfig::effective_eta() const {
  if (eta_percent >= 0.0) return eta_percent;
  return scheme.kind == SchemeKind::kBootRepeat ? 0.4 : 4.0;
}

int BootstrapConfig::threshold_epoch() const {
  return static_cast<int>(std::ceil(threshold * epochs - 1e-9));
}

void BootstrapConfig::validate() const {
  std::vector<std::string> problems;
  if (epochs < 1) problems.push_back("epochs must be >= 1");
  if (!(threshold >= 0.0 && threshold <= 1.0)) problems.push_back("threshold must lie in [0, 1]");
  if (!(effective_eta() <= 100.0)) problems.push_back("eta_percent must lie in [0, 100]");
  if (regen_steps < 1) problems.push_back("regen_steps must be >= 1");
  if (batch_size < 1) problems.push_back("batch_size must be >= 1");
  if (candidates_per_source < 1) problems.push_back("candidates_per_source must be >= 1");
  if (!(s4rl_sigma >= 0.0)) problems.push_back("s4rl_sigma must be >= 0");
  if (!(learning_rate > 0.0)) problems.push_back("learning_rate must be > 0");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) problems.push_back("warmup_fraction must lie in [0, 1)");
  if (!(grad_clip > 0.0)) problems.push_back("grad_clip must be > 0");
  if (!problems.empty()) {
    std::string msg = "invalid bootstrap config:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
}

void BootstrapConfig::write(KeyValueText& kv, const std::string& p) const {
  kv.set(p + "scheme", scheme.name());
  kv.set(p + "epochs", epochs);
  kv.set(p + "threshold", threshold);
  kv.set(p + "eta_percent", effective_eta());
  kv.set(p + "regen_steps", regen_steps);
  kv.set(p + "batch_size", batch_size);
  kv.set(p + "candidates_per_source", candidates_per_source);
  kv.set(p + "generated_as_sources", generated_as_sources);
  kv.set(p + "sampling", policy_name(sampling));
  kv.set(p + "s4rl_sigma", s4rl_sigma);
  kv.set(p + "learning_rate", learning_rate);
  kv.set(p + "warmup_fraction", warmup_fraction);
  kv.set(p + "grad_clip", grad_clip);
}

BootstrapConfig BootstrapConfig::read(const KeyValueText& kv, const std::string& p) {
  BootstrapConfig c;
  c.scheme = Scheme::parse(kv.get_or(p + "scheme", c.scheme.name()));
  c.epochs = static_cast<int>(kv.get_int_or(p + "epochs", c.epochs));
  c.threshold = kv.get_double_or(p + "threshold", c.threshold);
  c.eta_percent = kv.get_double_or(p + "eta_percent", c.eta_percent);
  c.regen_steps = static_cast<int>(kv.get_int_or(p + "regen_steps", c.regen_steps));
  c.batch_size = static_cast<int>(kv.get_int_or(p + "batch_size", c.batch_size));
  c.candidates_per_source = static_cast<int>(kv.get_int_or(p + "candidates_per_source", c.candidates_per_source));
  c.generated_as_sources = kv.get_bool_or(p + "generated_as_sources", c.generated_as_sources);
  c.sampling = parse_policy(kv.get_or(p + "sampling", policy_name(c.sampling)));
  c.s4rl_sigma = kv.get_double_or(p + "s4rl_sigma", c.s4rl_sigma);
  c.learning_rate = kv.get_double_or(p + "learning_rate", c.learning_rate);
  c.warmup_fraction = kv.get_double_or(p + "warmup_fraction", c.warmup_fraction);
  c.grad_clip = kv.get_double_or(p + "grad_clip", c.grad_clip);
  c.validate();
  return c;
}

TrainingData TrainingData::from_windows(const Discretizer& disc, std::vector<AugmentedTrajectory> windows) {
  TrainingData d;
  d.discretizer = disc;
  d.tokens.reserve(windows.size());
  for (const auto& w : windows) d.tokens.push_back(disc.discretize(w));
  d.windows = std::move(windows);
  return d;
}

std::string run_log_header() {
  return "epoch,scheme,dataset_size,generated,selected,mean_confidence,mean_nll,optimizer_steps";
}

std::string run_log_row(const EpochLog& r) {
  std::ostringstream os;
  os << r.epoch << ',' << r.scheme << ',' << r.dataset_size << ',' << r.generated << ',' << r.selected << ','
     << (std::isnan(r.mean_confidence) ? std::string("nan") : format_double(r.mean_confidence)) << ','
     << format_double(r.mean_nll) << ',' << r.optimizer_steps;
  return os.str();
}

std::string run_log_csv(const std::vector<EpochLog>& rows) {
  std::string out = run_log_header() + "\n";
  for (const auto& r : rows) out += run_log_row(r) + "\n";
  return out;
}

namespace {

struct BatchPlan {
  size_t begin;
  size_t count;
};

std::vector<BatchPlan> plan_batches(size_t originals, int batch_size) {
  std::vector<BatchPlan> out;
  for (size_t b = 0; b < originals; b += batch_size) out.push_back({b, std::min<size_t>(batch_size, originals - b)});
  return out;
}

// Sequences used by the extra per-batch step, or appended by boot-r.
int extra_count(const BootstrapConfig& cfg, size_t originals_in_batch) {
  const int k = cfg.candidates_per_source * static_cast<int>(originals_in_batch);
  const int n = selection_count(k, cfg.effective_eta());
  if (cfg.scheme.retrains() || cfg.scheme.s4rl()) return std::min<int>(n, static_cast<int>(originals_in_batch));
  return n;
}

void optimizer_step(TrainState& state, ModelParams& params, Gradients& g, double clip) {
  clip_grad_norm(g, clip);
  adam_step(state, params, g);
}

std::vector<size_t> select_by_policy(std::span<const double> losses, int keep, RetrainPolicy policy, Rng& rng) {
  std::vector<size_t> idx(losses.size());
  std::iota(idx.begin(), idx.end(), 0);
  switch (policy) {
    case RetrainPolicy::kRandom:
      std::shuffle(idx.begin(), idx.end(), rng);
      break;
    case RetrainPolicy::kLowest:
      std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return losses[a] < losses[b]; });
      break;
    case RetrainPolicy::kLargest:
      std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return losses[a] > losses[b]; });
      break;
  }
  idx.resize(std::min<size_t>(idx.size(), static_cast<size_t>(keep)));
  return idx;
}

}  // namespace

std::int64_t planned_optimizer_steps(const BootstrapConfig& cfg, size_t originals) {
  const auto batches = plan_batches(originals, cfg.batch_size);
  std::int64_t steps = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    steps += static_cast<std::int64_t>(batches.size());
    if (!cfg.bootstrap_epoch(epoch) || !cfg.scheme.extra_step()) continue;
    for (const auto& b : batches) steps += extra_count(cfg, b.count) > 0 ? 1 : 0;
  }
  return steps;
}

TrainResult train_run(const TrainingData& data, ModelParams initial, const BootstrapConfig& cfg, std::uint64_t seed,
                      const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.tokens.empty()) throw InvalidInput("training data is empty");
  if (data.windows.size() != data.tokens.size()) throw InvalidInput("training windows and tokens differ in count");
  for (const auto& t : data.tokens) {
    if (t.layout.bins() != initial.config.vocab) throw InvalidInput("token layout does not match model vocabulary");
    if (t.size() > initial.config.context) throw InvalidInput("training sequence exceeds model context");
    if ((cfg.scheme.bootstraps() || cfg.scheme.kind == SchemeKind::kS4rlLast) && cfg.regen_steps >= t.steps()) {
      throw InvalidInput("regen_steps must be smaller than the window length");
    }
  }

  TrainResult res;
  res.params = std::move(initial);
  ModelParams& params = res.params;
  const std::int64_t total = planned_optimizer_steps(cfg, data.size());
  const auto warmup = static_cast<std::int64_t>(std::llround(cfg.warmup_fraction * static_cast<double>(total)));
  res.state = make_train_state(params, cfg.learning_rate, warmup, total);
  TrainState& state = res.state;

  Rng shuffle_rng(derive_seed(seed, "shuffle"));
  Rng dropout_rng(derive_seed(seed, "dropout"));
  Rng select_rng(derive_seed(seed, "select"));
  Rng noise_rng(derive_seed(seed, "s4rl"));
  const std::uint64_t gen_seed = derive_seed(seed, "generate");
  std::uint64_t gen_counter = 0;
  const ForwardOptions fwd{&dropout_rng};

  GenerationConfig gcfg;
  gcfg.regen_steps = cfg.regen_steps;
  gcfg.scheme = cfg.scheme.generation;
  gcfg.policy = cfg.sampling;

  const auto batches = plan_batches(data.size(), cfg.batch_size);
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<TokenSequence>& pool = res.appended;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    std::vector<size_t> pool_order(pool.size());
    std::iota(pool_order.begin(), pool_order.end(), 0);
    std::shuffle(pool_order.begin(), pool_order.end(), shuffle_rng);

    const bool boot_now = cfg.bootstrap_epoch(epoch);
    std::vector<TokenSequence> fresh;
    EpochLog log;
    log.epoch = epoch;
    log.scheme = cfg.scheme.name();
    double conf_sum = 0.0;
    std::int64_t conf_n = 0;
    double nll_sum = 0.0;

    for (size_t b = 0; b < batches.size(); ++b) {
      std::vector<std::vector<int>> seqs;
      std::vector<const TokenSequence*> members;
      for (size_t i = 0; i < batches[b].count; ++i) members.push_back(&data.tokens[order[batches[b].begin + i]]);
      const size_t n_orig = members.size();
      for (size_t j = b; j < pool_order.size(); j += batches.size()) members.push_back(&pool[pool_order[j]]);
      seqs.reserve(members.size());
      for (const auto* m : members) seqs.push_back(m->tokens);

      LossResult main = loss_and_grad(params, seqs, true, fwd);
      nll_sum += main.loss;
      optimizer_step(state, params, main.grad, cfg.grad_clip);

      if (!boot_now || cfg.scheme.kind == SchemeKind::kBaseline) continue;
      const int count = extra_count(cfg, n_orig);
      if (count == 0) continue;

      if (cfg.scheme.bootstraps()) {
        const size_t n_src = cfg.generated_as_sources ? members.size() : n_orig;
        std::vector<TokenSequence> sources;
        std::vector<std::int64_t> ids;
        std::vector<Rng> rngs;
        for (size_t i = 0; i < n_src; ++i) {
          const std::int64_t id = i < n_orig ? static_cast<std::int64_t>(order[batches[b].begin + i]) : -1;
          for (int c = 0; c < cfg.candidates_per_source; ++c) {
            sources.push_back(*members[i]);
            ids.push_back(id);
            rngs.emplace_back(derive_seed(gen_seed, gen_counter++));
          }
        }
        std::vector<GeneratedTrajectory> cands;
        if (gcfg.scheme == GenerationScheme::kTeacherForcing) {
          cands = generate_teacher_forcing_batch(params, sources, ids, gcfg, rngs);
        } else {
          for (size_t i = 0; i < sources.size(); ++i) {
            cands.push_back(generate_autoregressive(params, sources[i], gcfg, rngs[i], ids[i]));
          }
        }
        log.generated += static_cast<std::int64_t>(cands.size());
        const int keep = selection_count(static_cast<int>(cands.size()), cfg.effective_eta());
        std::vector<double> conf;
        for (const auto& g : cands) conf.push_back(g.confidence);
        auto idx = select_top_confidence(conf, cfg.effective_eta());
        idx.resize(std::min<size_t>(idx.size(), keep));
        log.selected += static_cast<std::int64_t>(idx.size());
        for (size_t i : idx) {
          conf_sum += cands[i].confidence;
          ++conf_n;
        }
        if (cfg.scheme.kind == SchemeKind::kBootOnce) {
          if (idx.empty()) continue;
          std::vector<std::vector<int>> chosen;
          for (size_t i : idx) chosen.push_back(cands[i].tokens.tokens);
          LossResult extra = loss_and_grad(params, chosen, true, fwd);
          optimizer_step(state, params, extra.grad, cfg.grad_clip);
        } else {
          for (size_t i : idx) fresh.push_back(std::move(cands[i].tokens));
        }
        continue;
      }

      std::vector<std::vector<int>> chosen;
      if (cfg.scheme.retrains()) {
        const RetrainPolicy policy = cfg.scheme.kind == SchemeKind::kRetrainRandom   ? RetrainPolicy::kRandom
                                     : cfg.scheme.kind == SchemeKind::kRetrainLowest ? RetrainPolicy::kLowest
                                                                                     : RetrainPolicy::kLargest;
        std::span<const double> losses(main.per_sequence.data(), n_orig);
        auto idx = select_by_policy(losses, count, policy, select_rng);
        for (size_t i : idx) chosen.push_back(seqs[i]);
      } else {
        std::vector<double> flat(n_orig, 0.0);
        auto idx = select_by_policy(flat, count, RetrainPolicy::kRandom, select_rng);
        std::vector<AugmentedTrajectory> picked;
        for (size_t i : idx) picked.push_back(data.windows[order[batches[b].begin + i]]);
        const S4rlMode mode = cfg.scheme.kind == SchemeKind::kS4rlAll ? S4rlMode::kAll : S4rlMode::kLast;
        for (auto& t : s4rl_augment(picked, data.discretizer, cfg.s4rl_sigma, mode, cfg.regen_steps, noise_rng)) {
          chosen.push_back(std::move(t.tokens));
        }
        log.generated += static_cast<std::int64_t>(chosen.size());
      }
      log.selected += static_cast<std::int64_t>(chosen.size());
      LossResult extra = loss_and_grad(params, chosen, true, fwd);
      optimizer_step(state, params, extra.grad, cfg.grad_clip);
    }

    for (auto& t : fresh) pool.push_back(std::move(t));
    log.dataset_size = static_cast<std::int64_t>(data.size() + pool.size());
    log.mean_confidence = conf_n > 0 ? conf_sum / static_cast<double>(conf_n) : std::numeric_limits<double>::quiet_NaN();
    log.mean_nll = nll_sum / static_cast<double>(batches.size());
    log.optimizer_steps = state.step;
    res.log.push_back(log);
    if (on_epoch) on_epoch(log, params);
  }
  return res;
}

std::vector<TokenSequence> s4rl_augment(std::span<const AugmentedTrajectory> batch, const Discretizer& disc,
                                        double sigma, S4rlMode mode, int regen_steps, Rng& rng) {
  std::vector<TokenSequence> out;
  out.reserve(batch.size());
  const VocabLayout& lay = disc.layout();
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const auto& src : batch) {
    AugmentedTrajectory t = src;
    const int steps = t.length();
    const int first = mode == S4rlMode::kAll ? 0 : std::max(0, steps - regen_steps);
    for (int s = first; s < steps; ++s) {
      for (int i = 0; i < lay.state_dim(); ++i) {
        const int f = lay.field(FieldKind::kState, i);
        t.states.values[static_cast<size_t>(s) * lay.state_dim() + i] +=
            sigma * normal(rng) * (disc.upper(f) - disc.lower(f));
      }
    }
    out.push_back(disc.discretize(t));
  }
  return out;
}

std::vector<size_t> retrain_select(std::span<const double> losses, double eta_percent, RetrainPolicy policy, Rng& rng) {
  return select_by_policy(losses, selection_count(static_cast<int>(losses.size()), eta_percent), policy, rng);
}

}  // namespace boot
