#include "boot/experiment.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>

#include "boot/generation.hpp"
#include "boot/rng.hpp"

namespace boot {

namespace {

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "run.seed", "run.output_dir", "run.train_seeds", "run.eval_seeds",
      "data.env", "data.tier", "data.trajectories", "data.seed", "data.mix_tier", "data.mix_percent",
      "data.bins", "data.window", "data.discount", "data.path",
      "model.width", "model.layers", "model.heads", "model.ff_width", "model.dropout", "model.init_scale",
      "bootstrap.scheme", "bootstrap.epochs", "bootstrap.threshold", "bootstrap.eta_percent",
      "bootstrap.regen_steps", "bootstrap.batch_size", "bootstrap.candidates_per_source",
      "bootstrap.generated_as_sources", "bootstrap.sampling", "bootstrap.s4rl_sigma", "bootstrap.learning_rate",
      "bootstrap.warmup_fraction", "bootstrap.grad_clip",
      "planner.beam_width", "planner.horizon", "planner.expansions", "planner.discount"};
  return keys;
}

// Runs `fn`, turning any exception into a recorded problem.
void collect(std::vector<std::string>& problems, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    problems.emplace_back(e.what());
  }
}

std::string fmt(double v) { return std::isnan(v) ? std::string("nan") : format_double(v); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<AugmentedTrajectory> windows_of(const std::vector<RawTrajectory>& episodes, double discount, int window) {
  std::vector<AugmentedTrajectory> out;
  for (const auto& ep : episodes) {
    for (auto& w : slice_windows(augment(ep, discount), window, 1)) out.push_back(std::move(w));
  }
  if (out.empty()) throw InvalidInput("dataset yields no windows of the configured length");
  return out;
}

}  // namespace

std::vector<std::string> run_config_keys() { return known_keys(); }

RunConfig RunConfig::from_text(const KeyValueText& kv) {
  RunConfig c;
  std::vector<std::string> problems;
  const std::set<std::string> known(known_keys().begin(), known_keys().end());
  for (const auto& [k, v] : kv.entries()) {
    if (!known.count(k)) problems.push_back("unknown key '" + k + "'");
  }
  auto as_int = [&](const std::string& key, int& out) {
    collect(problems, [&] { out = static_cast<int>(kv.get_int_or(key, out)); });
  };
  auto as_double = [&](const std::string& key, double& out) {
    collect(problems, [&] { out = kv.get_double_or(key, out); });
  };
  collect(problems, [&] { c.seed = static_cast<std::uint64_t>(kv.get_int_or("run.seed", 0)); });
  c.output_dir = kv.get_or("run.output_dir", c.output_dir);
  as_int("run.train_seeds", c.train_seeds);
  as_int("run.eval_seeds", c.eval_seeds);

  c.data.env_id = kv.get_or("data.env", c.data.env_id);
  collect(problems, [&] { c.data.tier = parse_tier(kv.get_or("data.tier", to_string(c.data.tier))); });
  as_int("data.trajectories", c.data.trajectories);
  if (kv.contains("data.seed")) {
    collect(problems, [&] { c.data.seed = static_cast<std::uint64_t>(kv.get_int("data.seed")); });
    c.data_seed_set = true;
  }
  if (kv.contains("data.mix_tier")) collect(problems, [&] { c.data.mix_tier = parse_tier(kv.get("data.mix_tier")); });
  as_double("data.mix_percent", c.data.mix_percent);
  as_int("data.bins", c.bins);
  as_int("data.window", c.window);
  as_double("data.discount", c.discount);
  c.data_path = kv.get_or("data.path", "");

  as_int("model.width", c.model.width);
  as_int("model.layers", c.model.layers);
  as_int("model.heads", c.model.heads);
  as_int("model.ff_width", c.model.ff_width);
  as_double("model.dropout", c.model.dropout);
  as_double("model.init_scale", c.model.init_scale);

  collect(problems, [&] { c.bootstrap = BootstrapConfig::read(kv); });

  as_int("planner.beam_width", c.planner.beam_width);
  as_int("planner.horizon", c.planner.horizon);
  as_int("planner.expansions", c.planner.expansions);
  as_double("planner.discount", c.planner.discount);

  if (problems.empty()) {
    for (auto& p : c.problems()) problems.push_back(std::move(p));
  }
  if (!problems.empty()) {
    std::string msg = "invalid run config:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ConfigError(msg);
  }
  return c;
}

KeyValueText RunConfig::to_text() const {
  KeyValueText kv;
  kv.set("run.seed", seed);
  kv.set("run.output_dir", output_dir);
  kv.set("run.train_seeds", train_seeds);
  kv.set("run.eval_seeds", eval_seeds);
  kv.set("data.env", data.env_id);
  kv.set("data.tier", to_string(data.tier));
  kv.set("data.trajectories", data.trajectories);
  if (data_seed_set) kv.set("data.seed", data.seed);
  if (data.mix_tier) kv.set("data.mix_tier", to_string(*data.mix_tier));
  kv.set("data.mix_percent", data.mix_percent);
  kv.set("data.bins", bins);
  kv.set("data.window", window);
  kv.set("data.discount", discount);
  if (!data_path.empty()) kv.set("data.path", data_path);
  kv.set("model.width", model.width);
  kv.set("model.layers", model.layers);
  kv.set("model.heads", model.heads);
  kv.set("model.ff_width", model.ff_width);
  kv.set("model.dropout", model.dropout);
  kv.set("model.init_scale", model.init_scale);
  bootstrap.write(kv);
  kv.set("planner.beam_width", planner.beam_width);
  kv.set("planner.horizon", planner.horizon);
  kv.set("planner.expansions", planner.expansions);
  kv.set("planner.discount", planner.discount);
  return kv;
}

ModelConfig RunConfig::model_config(int tokens_per_step, std::uint64_t init_seed) const {
  ModelConfig m = model;
  m.vocab = bins;
  m.context = window * tokens_per_step;
  m.seed = init_seed;
  return m;
}

std::vector<std::string> RunConfig::problems() const {
  std::vector<std::string> out;
  if (train_seeds < 1) out.push_back("run.train_seeds must be >= 1");
  if (eval_seeds < 1) out.push_back("run.eval_seeds must be >= 1");
  if (output_dir.empty()) out.push_back("run.output_dir must not be empty");
  std::unique_ptr<Environment> env;
  collect(out, [&] { env = make_environment(data.env_id); });
  if (data.trajectories < 1) out.push_back("data.trajectories must be >= 1");
  if (data.mix_percent < 0.0 || data.mix_percent > 100.0) out.push_back("data.mix_percent must lie in [0, 100]");
  if (bins < 2) out.push_back("data.bins must be >= 2");
  if (window < 2) out.push_back("data.window must be >= 2");
  if (env && window > env->episode_length()) out.push_back("data.window exceeds the episode length");
  if (!(discount > 0.0 && discount <= 1.0)) out.push_back("data.discount must lie in (0, 1]");
  if (!data_path.empty() && !std::filesystem::exists(data_path)) {
    out.push_back("data.path '" + data_path + "' does not exist");
  }
  if (env) {
    const int tps = env->state_dim() + env->action_dim() + 2;
    collect(out, [&] { model_config(tps, 0).validate(tps); });
  }
  collect(out, [&] { bootstrap.validate(); });
  if (bootstrap.regen_steps >= window) out.push_back("bootstrap.regen_steps must be below data.window");
  collect(out, [&] { planner.validate(); });
  return out;
}

void RunConfig::validate() const {
  const auto p = problems();
  if (p.empty()) return;
  std::string msg = "invalid run config:";
  for (const auto& s : p) msg += "\n  " + s;
  throw ConfigError(msg);
}

PreparedData prepare_data(const RunConfig& cfg) {
  cfg.validate();
  PreparedData out;
  if (cfg.data_path.empty()) {
    DatasetSpec spec = cfg.data;
    spec.seed = cfg.data_seed();
    out.episodes = collect_dataset(spec);
  } else {
    out.episodes = read_dataset(cfg.data_path);
  }
  auto windows = windows_of(out.episodes, cfg.discount, cfg.window);
  const Discretizer disc = fit_discretizer(windows, cfg.bins);
  out.training = TrainingData::from_windows(disc, std::move(windows));
  DatasetManifest& m = out.manifest;
  m.env_id = cfg.data.env_id;
  m.tier = to_string(cfg.data.tier);
  m.trajectories = static_cast<std::int64_t>(out.episodes.size());
  m.seed = cfg.data_seed();
  m.discount = cfg.discount;
  m.window = cfg.window;
  m.discretizer = disc;
  if (cfg.data.mix_tier) {
    m.extra["mix_tier"] = to_string(*cfg.data.mix_tier);
    m.extra["mix_percent"] = format_double(cfg.data.mix_percent);
  }
  if (!cfg.data_path.empty()) m.extra["source"] = cfg.data_path;
  return out;
}

PreparedData prepare_data(const std::vector<RawTrajectory>& episodes, DatasetManifest manifest) {
  PreparedData out;
  out.episodes = episodes;
  out.training = TrainingData::from_windows(manifest.discretizer, windows_of(episodes, manifest.discount, manifest.window));
  out.manifest = std::move(manifest);
  return out;
}

std::uint64_t train_seed_value(const RunConfig& cfg, int train_index) {
  return derive_seed(cfg.seed, "train:" + std::to_string(train_index));
}

TrainResult train_model(const RunConfig& cfg, const TrainingData& data, int train_index,
                        const EpochCallback& on_epoch) {
  const std::uint64_t s = train_seed_value(cfg, train_index);
  const ModelConfig mc = cfg.model_config(data.discretizer.layout().tokens_per_step(), derive_seed(s, "init"));
  return train_run(data, init_params(mc), cfg.bootstrap, derive_seed(s, "steps"), on_epoch);
}

std::uint64_t eval_seed_value(const RunConfig& cfg, int train_index, int eval_index) {
  return derive_seed(train_seed_value(cfg, train_index), "eval:" + std::to_string(eval_index));
}

std::vector<ResultRow> evaluate(const RunConfig& cfg, const ModelParams& params, const Discretizer& disc,
                                int train_index) {
  const auto env = make_environment(cfg.data.env_id);
  const TransformerTokenModel model(params);
  std::vector<ResultRow> rows;
  for (int e = 0; e < cfg.eval_seeds; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    const EpisodeResult ep =
        run_episode(*env, model, disc, cfg.planner, env->episode_length(), eval_seed_value(cfg, train_index, e));
    ResultRow r;
    r.env_id = cfg.data.env_id;
    r.tier = to_string(cfg.data.tier);
    r.scheme = cfg.bootstrap.scheme.name();
    r.train_seed = train_index;
    r.eval_seed = e;
    r.episode_return = ep.episode_return;
    r.normalized = normalized_score(ep.episode_return, cfg.data.env_id);
    r.wall_seconds = seconds_since(t0);
    rows.push_back(r);
  }
  return rows;
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= s.count;
  if (s.count > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (s.count - 1));
  }
  return s;
}

Summary summarize_scores(const std::vector<ResultRow>& rows) {
  std::vector<double> v;
  for (const auto& r : rows) v.push_back(r.normalized);
  return summarize(v);
}

std::string result_csv_header() { return "env,tier,scheme,train_seed,eval_seed,return,normalized_score"; }

std::string result_csv_row(const ResultRow& r) {
  std::ostringstream os;
  os << r.env_id << ',' << r.tier << ',' << r.scheme << ',' << r.train_seed << ',' << r.eval_seed << ','
     << fmt(r.episode_return) << ',' << fmt(r.normalized);
  return os.str();
}

std::string result_csv(const std::vector<ResultRow>& rows) {
  std::string out = result_csv_header() + "\n";
  for (const auto& r : rows) out += result_csv_row(r) + "\n";
  std::vector<double> ret;
  for (const auto& r : rows) ret.push_back(r.episode_return);
  const Summary a = summarize(ret);
  const Summary b = summarize_scores(rows);
  out += "# summary,return,mean=" + fmt(a.mean) + ",std=" + fmt(a.std) + ",count=" + std::to_string(a.count) + "\n";
  out += "# summary,normalized_score,mean=" + fmt(b.mean) + ",std=" + fmt(b.std) + ",count=" +
         std::to_string(b.count) + "\n";
  return out;
}

std::string timing_csv(const std::vector<ResultRow>& rows) {
  std::string out = "train_seed,eval_seed,wall_seconds\n";
  for (const auto& r : rows) {
    out += std::to_string(r.train_seed) + "," + std::to_string(r.eval_seed) + "," + fmt(r.wall_seconds) + "\n";
  }
  return out;
}

std::vector<std::string> default_grid_values(const std::string& key, const Scheme& scheme) {
  if (key == "bootstrap.threshold") return {"0.0", "0.2", "0.4", "0.6", "0.8"};
  if (key == "bootstrap.eta_percent") {
    if (scheme.kind == SchemeKind::kBootRepeat) return {"0.2", "0.4", "0.6", "0.8", "1.0"};
    return {"2", "4", "6", "8", "10"};
  }
  if (key == "bootstrap.regen_steps") return {"1", "3", "5", "9"};
  throw ConfigError("no default grid for '" + key + "'; give values as key=v1,v2");
}

GridAxis parse_grid_axis(const std::string& spec, const Scheme& scheme) {
  GridAxis axis;
  const auto eq = spec.find('=');
  axis.key = spec.substr(0, eq);
  const auto keys = known_keys();
  if (std::find(keys.begin(), keys.end(), axis.key) == keys.end()) {
    throw ConfigError("unknown grid key '" + axis.key + "'");
  }
  if (eq == std::string::npos) {
    axis.values = default_grid_values(axis.key, scheme);
    return axis;
  }
  std::stringstream ss(spec.substr(eq + 1));
  std::string v;
  while (std::getline(ss, v, ',')) {
    if (v.empty()) throw ConfigError("empty grid value for '" + axis.key + "'");
    axis.values.push_back(v);
  }
  if (axis.values.empty()) throw ConfigError("no grid values for '" + axis.key + "'");
  return axis;
}

std::vector<SweepCell> expand_grid(const KeyValueText& base_text, const std::vector<GridAxis>& axes) {
  std::vector<SweepCell> cells;
  std::vector<size_t> idx(axes.size(), 0);
  while (true) {
    SweepCell cell;
    KeyValueText kv = base_text;
    for (size_t a = 0; a < axes.size(); ++a) {
      cell.values.push_back(axes[a].values[idx[a]]);
      kv.set(axes[a].key, axes[a].values[idx[a]]);
    }
    cell.config = RunConfig::from_text(kv);
    cells.push_back(std::move(cell));
    size_t a = axes.size();
    while (a > 0) {
      --a;
      if (++idx[a] < axes[a].values.size()) break;
      idx[a] = 0;
      if (a == 0) return cells;
    }
    if (axes.empty()) return cells;
  }
}

std::string sweep_csv_header(const std::vector<GridAxis>& axes) {
  std::string h;
  for (const auto& a : axes) h += a.key + ",";
  return h + "scheme,count,return_mean,return_std,normalized_mean,normalized_std";
}

std::string sweep_csv_row(const SweepCell& cell, const Summary& normalized, const Summary& returns) {
  std::string r;
  for (const auto& v : cell.values) r += v + ",";
  return r + cell.config.bootstrap.scheme.name() + "," + std::to_string(normalized.count) + "," + fmt(returns.mean) +
         "," + fmt(returns.std) + "," + fmt(normalized.mean) + "," + fmt(normalized.std);
}

DatasetAnalysis analyze_dataset(const ModelParams& params, const TrainingData& data, int regen_steps, int limit,
                                SamplingPolicy policy, std::uint64_t seed) {
  const size_t n = limit > 0 ? std::min<size_t>(limit, data.size()) : data.size();
  std::vector<TokenSequence> sources(data.tokens.begin(), data.tokens.begin() + n);
  std::vector<std::int64_t> ids(n);
  for (size_t i = 0; i < n; ++i) ids[i] = static_cast<std::int64_t>(i);

  GenerationConfig gc;
  gc.regen_steps = regen_steps;
  gc.policy = policy;
  gc.scheme = GenerationScheme::kTeacherForcing;
  std::vector<Rng> rngs;
  for (size_t i = 0; i < n; ++i) rngs.emplace_back(derive_seed(derive_seed(seed, "tf"), i));
  std::vector<TokenSequence> tf, ar;
  constexpr size_t kBatch = 64;
  for (size_t b = 0; b < n; b += kBatch) {
    const size_t e = std::min(n, b + kBatch);
    auto out = generate_teacher_forcing_batch(params, std::span(sources).subspan(b, e - b),
                                              std::span(ids).subspan(b, e - b), gc,
                                              std::span(rngs).subspan(b, e - b));
    for (auto& g : out) tf.push_back(std::move(g.tokens));
  }
  gc.scheme = GenerationScheme::kAutoregressive;
  for (size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(derive_seed(seed, "ar"), i));
    ar.push_back(generate_autoregressive(params, sources[i], gc, rng, ids[i]).tokens);
  }

  DatasetAnalysis out;
  const Discretizer& disc = data.discretizer;
  for (const auto& s : sources) out.originals.push_back(disc.reconstruct(s));
  for (const auto& s : tf) out.teacher_forcing.push_back(disc.reconstruct(s));
  for (const auto& s : ar) out.autoregressive.push_back(disc.reconstruct(s));
  const PointSet x = last_steps(out.originals, regen_steps);
  const PointSet y = last_steps(out.teacher_forcing, regen_steps);
  const PointSet z = last_steps(out.autoregressive, regen_steps);
  const double sigma = median_bandwidth({&x, &y, &z});
  out.reports.push_back(compare_dataset("teacher-forcing", sources, tf, disc, regen_steps, sigma));
  out.reports.push_back(compare_dataset("autoregressive", sources, ar, disc, regen_steps, sigma));
  return out;
}

DistanceReport analyze_environment(const RunConfig& cfg, const ModelParams& params, const Discretizer& disc,
                                   int episodes) {
  const auto env = make_environment(cfg.data.env_id);
  const TransformerTokenModel model(params);
  const VocabLayout& lay = disc.layout();
  Series pred(0, lay.state_dim()), real(0, lay.state_dim());
  for (int e = 0; e < episodes; ++e) {
    const auto ep = run_episode(*env, model, disc, cfg.planner, env->episode_length(), eval_seed_value(cfg, 0, e));
    for (int t = 0; t < ep.predicted_next_states.steps(); ++t) {
      pred.push_back(ep.predicted_next_states.row(t));
      real.push_back(ep.real_next_states.row(t));
    }
  }
  PointSet x, y, xt, yt;
  for (int t = 0; t < pred.steps(); ++t) {
    x.emplace_back(pred.row(t).begin(), pred.row(t).end());
    y.emplace_back(real.row(t).begin(), real.row(t).end());
    std::vector<double> a, b;
    for (int i = 0; i < lay.state_dim(); ++i) {
      const int f = lay.field(FieldKind::kState, i);
      a.push_back(disc.encode(f, x.back()[i]));
      b.push_back(disc.encode(f, y.back()[i]));
    }
    xt.push_back(std::move(a));
    yt.push_back(std::move(b));
  }
  DistanceReport r;
  r.method = "model";
  r.comparison = "environment";
  r.count = pred.steps();
  r.rmse_discrete = rmse_distance(xt, yt);
  r.rmse_continuous = rmse_distance(x, y);
  r.sigma = median_bandwidth({&x, &y});
  r.mmd_squared = mmd_gaussian(x, y, r.sigma);
  r.mmd = r.mmd_squared >= 0.0 ? std::sqrt(r.mmd_squared) : std::numeric_limits<double>::quiet_NaN();
  r.inter_state = inter_state_distance(pred, real);
  return r;
}

}  // namespace boot
