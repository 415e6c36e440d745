#include "boot/generation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace boot {

std::string to_string(GenerationScheme scheme) {
  return scheme == GenerationScheme::kAutoregressive ? "ar" : "tf";
}

GenerationScheme parse_generation_scheme(const std::string& name) {
  if (name == "ar" || name == "autoregressive") return GenerationScheme::kAutoregressive;
  if (name == "tf" || name == "teacher-forcing") return GenerationScheme::kTeacherForcing;
  throw InvalidInput("unknown generation scheme '" + name + "'");
}

void GenerationConfig::validate(int steps) const {
  if (regen_steps < 1 || regen_steps >= steps) {
    throw InvalidInput("regenerated steps must satisfy 1 <= T' < T (T' = " + std::to_string(regen_steps) +
                       ", T = " + std::to_string(steps) + ")");
  }
}

int regeneration_start(const VocabLayout& layout, int steps, int regen_steps) {
  return layout.tokens_per_step() * (steps - regen_steps);
}

namespace {

void check_compatible(const ModelParams& params, const TokenSequence& source, const GenerationConfig& cfg) {
  source.validate();
  if (source.layout.bins() != params.config.vocab) throw InvalidInput("token layout does not match model vocabulary");
  if (source.size() > params.config.context) throw InvalidInput("source sequence exceeds model context");
  cfg.validate(source.steps());
}

GeneratedTrajectory start_from(const TokenSequence& source, const GenerationConfig& cfg, std::int64_t source_id,
                               GenerationScheme scheme) {
  GeneratedTrajectory g;
  g.tokens = source;
  g.source_id = source_id;
  g.scheme = scheme;
  g.token_logprobs.reserve(static_cast<size_t>(cfg.regen_steps) * source.layout.tokens_per_step());
  return g;
}

}  // namespace

GeneratedTrajectory generate_autoregressive(const ModelParams& params, const TokenSequence& source,
                                            const GenerationConfig& cfg, Rng& rng, std::int64_t source_id) {
  check_compatible(params, source, cfg);
  GeneratedTrajectory g = start_from(source, cfg, source_id, GenerationScheme::kAutoregressive);
  const int start = regeneration_start(source.layout, source.steps(), cfg.regen_steps);
  DecoderState state(params);
  state.push(std::span<const int>(source.tokens.data(), static_cast<size_t>(start)));
  for (int n = start; n < source.size(); ++n) {
    const auto row = state.logprobs();
    const int tok = sample_token(row, rng, cfg.policy);
    g.tokens.tokens[n] = tok;
    g.token_logprobs.push_back(row[tok]);
    if (n + 1 < source.size()) state.push(tok);
  }
  g.confidence = confidence(g.token_logprobs, source.layout, cfg.regen_steps);
  return g;
}

GeneratedTrajectory generate_teacher_forcing(const ModelParams& params, const TokenSequence& source,
                                             const GenerationConfig& cfg, Rng& rng, std::int64_t source_id) {
  const std::int64_t ids[1] = {source_id};
  std::vector<Rng> one{rng};
  auto out = generate_teacher_forcing_batch(params, std::span<const TokenSequence>(&source, 1), ids, cfg, one);
  rng = one[0];
  return std::move(out[0]);
}

std::vector<GeneratedTrajectory> generate_teacher_forcing_batch(const ModelParams& params,
                                                                std::span<const TokenSequence> sources,
                                                                std::span<const std::int64_t> source_ids,
                                                                const GenerationConfig& cfg, std::span<Rng> rngs) {
  if (sources.size() != rngs.size() || sources.size() != source_ids.size()) {
    throw InvalidInput("sources, ids and rng streams must have equal counts");
  }
  std::vector<GeneratedTrajectory> out;
  if (sources.empty()) return out;
  std::vector<std::vector<int>> batch;
  batch.reserve(sources.size());
  for (const auto& s : sources) {
    check_compatible(params, s, cfg);
    batch.push_back(s.tokens);
  }
  const auto tables = forward_logprobs_batch(params, batch);
  out.reserve(sources.size());
  for (size_t i = 0; i < sources.size(); ++i) {
    const TokenSequence& src = sources[i];
    GeneratedTrajectory g = start_from(src, cfg, source_ids[i], GenerationScheme::kTeacherForcing);
    const int start = regeneration_start(src.layout, src.steps(), cfg.regen_steps);
    for (int n = start; n < src.size(); ++n) {
      // row n conditions on the original tokens before n
      const auto row = tables[i].row(n);
      const int tok = sample_token(row, rngs[i], cfg.policy);
      g.tokens.tokens[n] = tok;
      g.token_logprobs.push_back(row[tok]);
    }
    g.confidence = confidence(g.token_logprobs, src.layout, cfg.regen_steps);
    out.push_back(std::move(g));
  }
  return out;
}

GeneratedTrajectory generate(const ModelParams& params, const TokenSequence& source, const GenerationConfig& cfg,
                             std::int64_t source_id) {
  Rng rng(cfg.seed);
  if (cfg.scheme == GenerationScheme::kAutoregressive) return generate_autoregressive(params, source, cfg, rng, source_id);
  return generate_teacher_forcing(params, source, cfg, rng, source_id);
}

double confidence(std::span<const double> token_logprobs, const VocabLayout& layout, int regen_steps) {
  const size_t expected = static_cast<size_t>(regen_steps) * layout.tokens_per_step();
  if (regen_steps < 1 || token_logprobs.size() != expected) {
    throw InvalidInput("confidence expects " + std::to_string(expected) + " log-probabilities, got " +
                       std::to_string(token_logprobs.size()));
  }
  return mean_logprob(token_logprobs);
}

double mean_logprob(std::span<const double> token_logprobs) {
  if (token_logprobs.empty()) throw InvalidInput("no log-probabilities to average");
  double s = 0.0;
  for (double v : token_logprobs) s += v;
  return s / static_cast<double>(token_logprobs.size());
}

double confidence(const LogProbTable& table, std::span<const int> tokens, const VocabLayout& layout, int regen_steps) {
  const int count = regen_steps * layout.tokens_per_step();
  if (static_cast<int>(tokens.size()) != table.rows || count > table.rows || count < 1) {
    throw InvalidInput("log-probability table does not cover the regenerated positions");
  }
  std::vector<double> sel;
  sel.reserve(count);
  for (int n = table.rows - count; n < table.rows; ++n) sel.push_back(table.at(n, tokens[n]));
  return confidence(sel, layout, regen_steps);
}

int selection_count(int k, double eta_percent) {
  if (!(eta_percent >= 0.0 && eta_percent <= 100.0)) throw InvalidInput("selection percentage must lie in [0, 100]");
  return static_cast<int>(std::floor(eta_percent / 100.0 * k + 1e-9));
}

std::vector<size_t> select_top_confidence(std::span<const double> confidences, double eta_percent) {
  const int keep = selection_count(static_cast<int>(confidences.size()), eta_percent);
  std::vector<size_t> order(confidences.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return confidences[a] > confidences[b]; });
  order.resize(keep);
  return order;
}

std::vector<GeneratedTrajectory> select_top_confidence(const std::vector<GeneratedTrajectory>& candidates,
                                                       double eta_percent) {
  std::vector<double> c;
  c.reserve(candidates.size());
  for (const auto& g : candidates) c.push_back(g.confidence);
  std::vector<GeneratedTrajectory> out;
  for (size_t i : select_top_confidence(c, eta_percent)) out.push_back(candidates[i]);
  return out;
}

}  // namespace boot
