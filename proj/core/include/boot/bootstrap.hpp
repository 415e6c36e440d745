#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "boot/generation.hpp"
#include "boot/keyvalue.hpp"
#include "boot/model.hpp"
#include "boot/optimizer.hpp"
#include "boot/trajectory.hpp"

namespace boot {

enum class SchemeKind {
  kBootOnce,
  kBootRepeat,
  kBaseline,
  kRetrainRandom,
  kRetrainLowest,
  kRetrainLargest,
  kS4rlAll,
  kS4rlLast,
};

struct Scheme {
  SchemeKind kind = SchemeKind::kBaseline;
  GenerationScheme generation = GenerationScheme::kTeacherForcing;  // boot-o / boot-r only

  bool bootstraps() const { return kind == SchemeKind::kBootOnce || kind == SchemeKind::kBootRepeat; }
  bool retrains() const {
    return kind == SchemeKind::kRetrainRandom || kind == SchemeKind::kRetrainLowest ||
           kind == SchemeKind::kRetrainLargest;
  }
  bool s4rl() const { return kind == SchemeKind::kS4rlAll || kind == SchemeKind::kS4rlLast; }
  // Schemes that take a second optimizer step per batch after the threshold.
  bool extra_step() const { return kind != SchemeKind::kBaseline && kind != SchemeKind::kBootRepeat; }

  // e.g. "boot-o-tf", "boot-r-ar", "tt-baseline", "tt-retrain-lowest-loss", "tt-s4rl-last".
  std::string name() const;
  // Accepts the names above; "boot-o" / "boot-r" default to teacher forcing.
  static Scheme parse(const std::string& name);
  bool operator==(const Scheme&) const = default;
};

std::vector<std::string> scheme_names();

struct BootstrapConfig {
  Scheme scheme;
  int epochs = 20;                // E
  double threshold = 0.4;         // k, as a fraction of E
  double eta_percent = -1.0;      // negative selects the scheme default (4 for boot-o, 0.4 for boot-r)
  int regen_steps = 1;            // T'
  int batch_size = 64;            // original trajectories per batch
  int candidates_per_source = 1;  // m; K = m * originals in the batch
  bool generated_as_sources = false;
  SamplingPolicy sampling = SamplingPolicy::kCategorical;
  double s4rl_sigma = 3e-4;
  double learning_rate = 1e-4;
  double warmup_fraction = 0.05;  // of total optimizer steps
  double grad_clip = 1.0;

  double effective_eta() const;
  // Last epoch (1-based) trained on originals only: ceil(k * E).
  int threshold_epoch() const;
  bool bootstrap_epoch(int epoch) const { return epoch > threshold_epoch(); }
  void validate() const;  // throws ConfigError

  void write(KeyValueText& kv, const std::string& prefix = "bootstrap.") const;
  static BootstrapConfig read(const KeyValueText& kv, const std::string& prefix = "bootstrap.");
};

// Tokenized training set plus the continuous windows it came from.
struct TrainingData {
  Discretizer discretizer;
  std::vector<AugmentedTrajectory> windows;
  std::vector<TokenSequence> tokens;

  static TrainingData from_windows(const Discretizer& disc, std::vector<AugmentedTrajectory> windows);
  size_t size() const { return tokens.size(); }
};

struct EpochLog {
  int epoch = 0;
  std::string scheme;
  std::int64_t dataset_size = 0;  // trajectories available for training after this epoch
  std::int64_t generated = 0;     // new sequences created this epoch
  std::int64_t selected = 0;      // sequences used in extra steps or appended
  double mean_confidence = 0.0;   // over selected generated sequences, NaN when none
  double mean_nll = 0.0;          // mean training NLL over this epoch's original batches
  std::int64_t optimizer_steps = 0;
};

std::string run_log_header();
std::string run_log_row(const EpochLog& row);
std::string run_log_csv(const std::vector<EpochLog>& rows);

struct TrainResult {
  ModelParams params;
  TrainState state;
  std::vector<EpochLog> log;
  std::vector<TokenSequence> appended;  // boot-r additions, in order
};

// Number of optimizer steps train_run will take, used to size the schedule.
std::int64_t planned_optimizer_steps(const BootstrapConfig& cfg, size_t originals);

// Called after every epoch with the current model.
using EpochCallback = std::function<void(const EpochLog&, const ModelParams&)>;

TrainResult train_run(const TrainingData& data, ModelParams initial, const BootstrapConfig& cfg, std::uint64_t seed,
                      const EpochCallback& on_epoch = {});

enum class S4rlMode { kAll, kLast };

// Adds N(0, sigma) noise to the states in normalized units (x + sigma * eps * (hi - lo)),
// either at every timestep or only in the last regen_steps, and re-discretizes.
std::vector<TokenSequence> s4rl_augment(std::span<const AugmentedTrajectory> batch, const Discretizer& disc,
                                        double sigma, S4rlMode mode, int regen_steps, Rng& rng);

enum class RetrainPolicy { kRandom, kLowest, kLargest };

// floor(eta% * K) indices of the batch chosen by per-sequence loss (ties by index) or at random.
std::vector<size_t> retrain_select(std::span<const double> losses, double eta_percent, RetrainPolicy policy, Rng& rng);

}  // namespace boot
