#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "boot/analysis.hpp"
#include "boot/bootstrap.hpp"
#include "boot/dataset_io.hpp"
#include "boot/envs.hpp"
#include "boot/keyvalue.hpp"
#include "boot/model.hpp"
#include "boot/planner.hpp"

namespace boot {

// Every section of a run. Text form:
//   [run] seed, output_dir, train_seeds, eval_seeds
//   [data] env, tier, trajectories, seed, mix_tier, mix_percent, bins, window, discount, path
//   [model] width, layers, heads, ff_width, dropout, init_scale
//   [bootstrap] see BootstrapConfig
//   [planner] beam_width, horizon, expansions, discount
struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  int train_seeds = 1;
  int eval_seeds = 3;

  DatasetSpec data{"point_chase", Tier::kMedium, 2000, 0, std::nullopt, 0.0};
  bool data_seed_set = false;  // otherwise the data seed follows run.seed
  int bins = 100;
  int window = 10;
  double discount = 0.99;
  std::string data_path;  // optional JSONL dataset; empty collects one from `data`

  ModelConfig model;
  BootstrapConfig bootstrap;
  PlannerConfig planner;

  // Throws ConfigError listing every unknown key and invalid value.
  static RunConfig from_text(const KeyValueText& kv);
  static RunConfig load(const std::string& path) { return from_text(KeyValueText::load(path)); }
  KeyValueText to_text() const;

  std::vector<std::string> problems() const;
  void validate() const;  // throws ConfigError when problems() is non-empty

  std::uint64_t data_seed() const { return data_seed_set ? data.seed : seed; }
  // Model shape with vocabulary and context sized from bins and window.
  ModelConfig model_config(int tokens_per_step, std::uint64_t init_seed) const;
};

// Names accepted in [section] key form.
std::vector<std::string> run_config_keys();

struct PreparedData {
  std::vector<RawTrajectory> episodes;
  TrainingData training;
  DatasetManifest manifest;
};

PreparedData prepare_data(const RunConfig& cfg);
// Windows and discretizer for an on-disk dataset described by `manifest`.
PreparedData prepare_data(const std::vector<RawTrajectory>& episodes, DatasetManifest manifest);

std::uint64_t train_seed_value(const RunConfig& cfg, int train_index);
TrainResult train_model(const RunConfig& cfg, const TrainingData& data, int train_index,
                        const EpochCallback& on_epoch = {});

struct ResultRow {
  std::string env_id;
  std::string tier;
  std::string scheme;
  int train_seed = 0;
  int eval_seed = 0;
  double episode_return = 0.0;
  double normalized = 0.0;
  double wall_seconds = 0.0;  // kept out of result_csv so result tables stay reproducible
};

std::uint64_t eval_seed_value(const RunConfig& cfg, int train_index, int eval_index);
std::vector<ResultRow> evaluate(const RunConfig& cfg, const ModelParams& params, const Discretizer& disc,
                                int train_index);

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single row
  int count = 0;
};

Summary summarize(const std::vector<double>& values);
Summary summarize_scores(const std::vector<ResultRow>& rows);

std::string result_csv_header();
std::string result_csv_row(const ResultRow& r);
// Rows, then "# mean,std,count" summary lines for return and normalized score.
std::string result_csv(const std::vector<ResultRow>& rows);
std::string timing_csv(const std::vector<ResultRow>& rows);

// A Cartesian grid over config keys; values are kept as text and echoed verbatim.
struct GridAxis {
  std::string key;
  std::vector<std::string> values;
};

// Default search values for the tunable bootstrap keys.
std::vector<std::string> default_grid_values(const std::string& key, const Scheme& scheme);
GridAxis parse_grid_axis(const std::string& spec, const Scheme& scheme);

struct SweepCell {
  std::vector<std::string> values;  // one per axis
  RunConfig config;
};
std::vector<SweepCell> expand_grid(const KeyValueText& base_text, const std::vector<GridAxis>& axes);

std::string sweep_csv_header(const std::vector<GridAxis>& axes);
std::string sweep_csv_row(const SweepCell& cell, const Summary& normalized, const Summary& returns);

// Regenerates the tail of up to `limit` windows with both generation schemes
// and compares each set with its sources under one shared bandwidth.
struct DatasetAnalysis {
  std::vector<DistanceReport> reports;  // teacher-forcing, autoregressive
  std::vector<AugmentedTrajectory> originals, teacher_forcing, autoregressive;
};
DatasetAnalysis analyze_dataset(const ModelParams& params, const TrainingData& data, int regen_steps, int limit,
                                SamplingPolicy policy, std::uint64_t seed);

// Model next-state predictions against the environment over evaluation episodes.
DistanceReport analyze_environment(const RunConfig& cfg, const ModelParams& params, const Discretizer& disc,
                                   int episodes);

}  // namespace boot
