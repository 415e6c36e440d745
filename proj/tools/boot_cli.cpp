#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "boot/analysis.hpp"
#include "boot/checkpoint.hpp"
#include "boot/dataset_io.hpp"
#include "boot/envs.hpp"
#include "boot/experiment.hpp"
#include "boot/planner.hpp"

namespace fs = std::filesystem;
using namespace boot;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

fs::path checkpoint_path(const RunConfig& cfg, int i) { return fs::path(cfg.output_dir) / ("model-" + std::to_string(i) + ".ckpt"); }

void log_epoch(int seed_index, const EpochLog& e) {
  std::fprintf(stderr, "[train %d] epoch %d nll %.4f dataset %lld generated %lld\n", seed_index, e.epoch, e.mean_nll,
               static_cast<long long>(e.dataset_size), static_cast<long long>(e.generated));
}

// Trains every seed of `cfg` and writes checkpoints, run logs and the manifest.
DatasetManifest train_all(const RunConfig& cfg, bool quiet) {
  const PreparedData data = prepare_data(cfg);
  fs::create_directories(cfg.output_dir);
  data.manifest.save((fs::path(cfg.output_dir) / "manifest.txt").string());
  cfg.to_text().save((fs::path(cfg.output_dir) / "config.txt").string());
  for (int i = 0; i < cfg.train_seeds; ++i) {
    TrainResult res = train_model(cfg, data.training, i, [&](const EpochLog& e, const ModelParams&) {
      if (!quiet) log_epoch(i, e);
    });
    save_checkpoint(checkpoint_path(cfg, i).string(), {res.params, res.state, data.manifest.hash()});
    write_text(fs::path(cfg.output_dir) / ("runlog-" + std::to_string(i) + ".csv"), run_log_csv(res.log));
  }
  return data.manifest;
}

std::vector<ResultRow> eval_all(const RunConfig& cfg, const std::vector<std::string>& checkpoints) {
  const DatasetManifest manifest = DatasetManifest::load((fs::path(cfg.output_dir) / "manifest.txt").string());
  std::vector<std::string> paths = checkpoints;
  if (paths.empty()) {
    for (int i = 0; i < cfg.train_seeds; ++i) paths.push_back(checkpoint_path(cfg, i).string());
  }
  std::vector<ResultRow> rows;
  for (size_t i = 0; i < paths.size(); ++i) {
    const Checkpoint ck = load_checkpoint(paths[i], manifest.hash());
    for (auto& r : evaluate(cfg, ck.params, manifest.discretizer, static_cast<int>(i))) rows.push_back(r);
  }
  write_text(fs::path(cfg.output_dir) / "results.csv", result_csv(rows));
  write_text(fs::path(cfg.output_dir) / "timings.csv", timing_csv(rows));
  return rows;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Bootstrapped trajectory transformer for offline RL"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress progress output");

  auto* ds = app.add_subcommand("dataset", "Collect a behaviour dataset and its manifest");
  std::string env_id, tier = "medium", mix_tier, out_dir = "data";
  int trajectories = 2000, bins = 100, window = 10;
  std::uint64_t seed = 0;
  double mix_percent = 0.0, discount = 0.99;
  ds->add_option("--env", env_id, "Environment id")->required();
  ds->add_option("--tier", tier, "Behaviour tier");
  ds->add_option("--trajectories", trajectories, "Episode count")->check(CLI::PositiveNumber);
  ds->add_option("--seed", seed, "Collection seed");
  ds->add_option("--mix-tier", mix_tier, "Tier mixed into the dataset");
  ds->add_option("--mix-percent", mix_percent, "Percentage replaced by the mix tier")->check(CLI::Range(0.0, 100.0));
  ds->add_option("--bins", bins, "Discretization bins per scalar")->check(CLI::Range(2, 100000));
  ds->add_option("--window", window, "Timesteps per training window")->check(CLI::PositiveNumber);
  ds->add_option("--discount", discount, "Reward-to-go discount");
  ds->add_option("--out", out_dir, "Output directory");

  auto* tiers = app.add_subcommand("tiers", "List behaviour tiers");
  auto* reg = app.add_subcommand("registry", "Print the environment registry");

  std::string config_path;
  auto* tr = app.add_subcommand("train", "Train every seed of a run config");
  tr->add_option("config", config_path, "Run config file")->required()->check(CLI::ExistingFile);

  std::vector<std::string> ckpts;
  auto* ev = app.add_subcommand("eval", "Evaluate trained checkpoints with the planner");
  ev->add_option("config", config_path, "Run config file")->required()->check(CLI::ExistingFile);
  ev->add_option("--checkpoint", ckpts, "Checkpoints (default: the run's own)");

  auto* run = app.add_subcommand("run", "Train then evaluate");
  run->add_option("config", config_path, "Run config file")->required()->check(CLI::ExistingFile);

  std::vector<std::string> grid;
  auto* sw = app.add_subcommand("sweep", "Train and evaluate a grid of configs");
  sw->add_option("config", config_path, "Base run config")->required()->check(CLI::ExistingFile);
  sw->add_option("--grid", grid, "key or key=v1,v2,... (repeatable)")->required();

  std::string mode = "dataset", ckpt, export_path;
  int regen_steps = 3, limit = 500, episodes = 10;
  bool with_reward = true, greedy = false;
  auto* an = app.add_subcommand("analyze", "Distance metrics of generated data");
  an->add_option("config", config_path, "Run config file")->required()->check(CLI::ExistingFile);
  an->add_option("--checkpoint", ckpt, "Checkpoint (default: seed 0 of the run)");
  an->add_option("--mode", mode, "dataset or environment")->check(CLI::IsMember({"dataset", "environment"}));
  an->add_option("--regen-steps", regen_steps, "Regenerated timesteps")->check(CLI::PositiveNumber);
  an->add_option("--limit", limit, "Source windows used")->check(CLI::NonNegativeNumber);
  an->add_option("--episodes", episodes, "Evaluation episodes for environment mode")->check(CLI::PositiveNumber);
  an->add_option("--export", export_path, "Write transition vectors to this CSV");
  an->add_flag("--with-reward,!--without-reward", with_reward, "Include r and R in exported vectors");
  an->add_flag("--greedy", greedy, "Greedy instead of categorical sampling");

  std::string manifest_path, obs_text;
  PlannerConfig pc;
  auto* pl = app.add_subcommand("plan", "Plan one action for an observation");
  pl->add_option("--checkpoint", ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  pl->add_option("--manifest", manifest_path, "Dataset manifest")->required()->check(CLI::ExistingFile);
  pl->add_option("--obs", obs_text, "Comma-separated observation")->required();
  pl->add_option("--beam-width", pc.beam_width);
  pl->add_option("--horizon", pc.horizon);
  pl->add_option("--expansions", pc.expansions);
  pl->add_option("--discount", pc.discount);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (tiers->parsed()) {
    for (const auto& t : tier_names()) std::cout << t << "\n";
    return 0;
  }
  if (reg->parsed()) {
    std::cout << registry_text();
    return 0;
  }
  if (ds->parsed()) {
    RunConfig cfg;
    cfg.data.env_id = env_id;
    cfg.data.tier = parse_tier(tier);
    cfg.data.trajectories = trajectories;
    cfg.data.seed = seed;
    cfg.data_seed_set = true;
    if (!mix_tier.empty()) cfg.data.mix_tier = parse_tier(mix_tier);
    cfg.data.mix_percent = mix_percent;
    cfg.bins = bins;
    cfg.window = window;
    cfg.discount = discount;
    const PreparedData data = prepare_data(cfg);
    fs::create_directories(out_dir);
    write_dataset((fs::path(out_dir) / "dataset.jsonl").string(), data.episodes);
    data.manifest.save((fs::path(out_dir) / "manifest.txt").string());
    if (!quiet) std::fprintf(stderr, "wrote %zu episodes to %s\n", data.episodes.size(), out_dir.c_str());
    return 0;
  }
  if (pl->parsed()) {
    const DatasetManifest m = DatasetManifest::load(manifest_path);
    const Checkpoint ck = load_checkpoint(ckpt, m.hash());
    const auto obs = parse_double_list(obs_text);
    const VocabLayout& lay = m.discretizer.layout();
    if (static_cast<int>(obs.size()) != lay.state_dim()) throw InvalidInput("observation has the wrong dimension");
    std::vector<int> ctx;
    for (int i = 0; i < lay.state_dim(); ++i) ctx.push_back(m.discretizer.encode(lay.field(FieldKind::kState, i), obs[i]));
    const PlanResult res = plan(ck.params, m.discretizer, ctx, pc);
    std::cout << "action";
    for (double a : res.action) std::cout << ',' << format_double(a);
    std::cout << "\nscore," << format_double(res.score) << "\nbeam_scores";
    for (const auto& c : res.beam) std::cout << ',' << format_double(c.score);
    std::cout << "\n";
    return 0;
  }

  const KeyValueText text = KeyValueText::load(config_path);
  const RunConfig cfg = RunConfig::from_text(text);
  if (tr->parsed()) {
    train_all(cfg, quiet);
    return 0;
  }
  if (ev->parsed()) {
    std::cout << result_csv(eval_all(cfg, ckpts));
    return 0;
  }
  if (run->parsed()) {
    train_all(cfg, quiet);
    std::cout << result_csv(eval_all(cfg, {}));
    return 0;
  }
  if (sw->parsed()) {
    std::vector<GridAxis> axes;
    for (const auto& g : grid) axes.push_back(parse_grid_axis(g, cfg.bootstrap.scheme));
    auto cells = expand_grid(text, axes);
    std::string table = sweep_csv_header(axes) + "\n";
    for (size_t k = 0; k < cells.size(); ++k) {
      RunConfig cell = cells[k].config;
      cell.output_dir = (fs::path(cfg.output_dir) / ("cell-" + std::to_string(k))).string();
      // every cell trains on the base dataset
      if (!cell.data_seed_set) {
        cell.data.seed = cfg.data_seed();
        cell.data_seed_set = true;
      }
      train_all(cell, quiet);
      const auto rows = eval_all(cell, {});
      std::vector<double> ret;
      for (const auto& r : rows) ret.push_back(r.episode_return);
      table += sweep_csv_row(cells[k], summarize_scores(rows), summarize(ret)) + "\n";
    }
    write_text(fs::path(cfg.output_dir) / "sweep.csv", table);
    std::cout << table;
    return 0;
  }
  if (an->parsed()) {
    const DatasetManifest m = DatasetManifest::load((fs::path(cfg.output_dir) / "manifest.txt").string());
    const std::string path = ckpt.empty() ? checkpoint_path(cfg, 0).string() : ckpt;
    const Checkpoint ck = load_checkpoint(path, m.hash());
    std::vector<DistanceReport> reports;
    if (mode == "dataset") {
      PreparedData data = prepare_data(cfg);
      data = prepare_data(data.episodes, m);
      const auto res = analyze_dataset(ck.params, data.training, regen_steps, limit,
                                       greedy ? SamplingPolicy::kGreedy : SamplingPolicy::kCategorical,
                                       derive_seed(cfg.seed, "analyze"));
      reports = res.reports;
      if (!export_path.empty()) {
        std::ofstream out(export_path);
        if (!out) throw std::runtime_error("cannot write " + export_path);
        export_transitions(out,
                           {{"original", res.originals},
                            {"teacher-forcing", res.teacher_forcing},
                            {"autoregressive", res.autoregressive}},
                           regen_steps, with_reward, derive_seed(cfg.seed, "export"));
      }
    } else {
      reports.push_back(analyze_environment(cfg, ck.params, m.discretizer, episodes));
    }
    const std::string csv = distance_csv(reports);
    write_text(fs::path(cfg.output_dir) / ("distance-" + mode + ".csv"), csv);
    std::cout << csv;
    return 0;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const InvalidInput& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
