#include "boot/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace boot {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

class DecoderCursor final : public TokenCursor {
 public:
  explicit DecoderCursor(const ModelParams& params) : state_(params) {}
  std::span<const double> logprobs() const override { return state_.logprobs(); }
  void push(int token) override { state_.push(token); }
  std::unique_ptr<TokenCursor> clone() const override { return std::make_unique<DecoderCursor>(*this); }

 private:
  DecoderState state_;
};

class ChainCursor final : public TokenCursor {
 public:
  ChainCursor(const ChainTokenModel& model, std::vector<int> tokens) : model_(&model), tokens_(std::move(tokens)) {
    refresh();
  }
  std::span<const double> logprobs() const override { return row_; }
  void push(int token) override {
    tokens_.push_back(token);
    refresh();
  }
  std::unique_ptr<TokenCursor> clone() const override { return std::make_unique<ChainCursor>(*this); }

 private:
  void refresh() { row_ = model_->logprobs_after(tokens_); }

  const ChainTokenModel* model_;
  std::vector<int> tokens_;
  std::vector<double> row_;
};

int argmax(std::span<const double> row) {
  return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

// Drops leading whole timesteps until `extra` more tokens fit the window.
std::span<const int> fit_context(std::span<const int> context, int tokens_per_step, int limit, int extra) {
  size_t drop = 0;
  while (context.size() - drop + extra > static_cast<size_t>(limit) && drop + tokens_per_step <= context.size()) {
    drop += tokens_per_step;
  }
  if (context.size() - drop + extra > static_cast<size_t>(limit)) {
    throw InvalidInput("planning horizon does not fit the model window");
  }
  return context.subspan(drop);
}

struct Node {
  std::unique_ptr<TokenCursor> cursor;
  BeamCandidate cand;
  double reward_sum = 0.0;  // sum_{j<h} discount^j r_j
};

struct Partial {
  std::unique_ptr<TokenCursor> cursor;
  std::vector<int> tokens;
  std::vector<double> logprobs;
  double joint = 0.0;
};

// Greedily decodes `count` tokens, pushing every one except possibly the last.
void greedy_tokens(Node& node, int count, bool push_last, std::vector<int>* out = nullptr) {
  for (int i = 0; i < count; ++i) {
    const auto row = node.cursor->logprobs();
    const int tok = argmax(row);
    node.cand.tokens.push_back(tok);
    node.cand.logprobs.push_back(row[tok]);
    if (out) out->push_back(tok);
    if (i + 1 < count || push_last) node.cursor->push(tok);
  }
}

// Reward and reward-to-go after the action tokens; updates the score.
void close_step(Node& node, const Discretizer& disc, int h, int horizon, double discount) {
  const VocabLayout& lay = disc.layout();
  std::vector<int> toks;
  greedy_tokens(node, 1, true, &toks);
  greedy_tokens(node, 1, h + 1 < horizon, &toks);
  const double r = disc.decode(lay.field(FieldKind::kReward, 0), toks[0]);
  const double rtg = disc.decode(lay.field(FieldKind::kRewardToGo, 0), toks[1]);
  node.cand.rewards.push_back(r);
  node.cand.rewards_to_go.push_back(rtg);
  node.cand.score = node.reward_sum + std::pow(discount, h) * rtg;
  node.reward_sum += std::pow(discount, h) * r;
}

void open_next_state(Node& node, const Discretizer& disc) {
  const VocabLayout& lay = disc.layout();
  std::vector<int> toks;
  greedy_tokens(node, lay.state_dim(), true, &toks);
  std::vector<double> s(lay.state_dim());
  for (int i = 0; i < lay.state_dim(); ++i) s[i] = disc.decode(lay.field(FieldKind::kState, i), toks[i]);
  node.cand.next_states.push_back(std::move(s));
}

std::vector<Node> expand_actions(Node& node, const Discretizer& disc, int width) {
  const VocabLayout& lay = disc.layout();
  std::vector<Partial> partials;
  partials.push_back({node.cursor->clone(), {}, {}, 0.0});
  for (int dim = 0; dim < lay.action_dim(); ++dim) {
    struct Option {
      size_t parent;
      int token;
      double lp;
    };
    std::vector<Option> options;
    for (size_t p = 0; p < partials.size(); ++p) {
      const auto row = partials[p].cursor->logprobs();
      std::vector<int> idx;
      for (int t = 0; t < static_cast<int>(row.size()); ++t) {
        if (row[t] > kNegInf) idx.push_back(t);
      }
      std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return row[a] > row[b]; });
      if (static_cast<int>(idx.size()) > width) idx.resize(width);
      for (int t : idx) options.push_back({p, t, partials[p].joint + row[t]});
    }
    std::stable_sort(options.begin(), options.end(), [](const Option& a, const Option& b) { return a.lp > b.lp; });
    if (static_cast<int>(options.size()) > width) options.resize(width);
    std::vector<Partial> next;
    for (const auto& o : options) {
      const Partial& from = partials[o.parent];
      Partial q{from.cursor->clone(), from.tokens, from.logprobs, o.lp};
      q.logprobs.push_back(q.cursor->logprobs()[o.token]);
      q.tokens.push_back(o.token);
      q.cursor->push(o.token);
      next.push_back(std::move(q));
    }
    partials = std::move(next);
  }
  std::vector<Node> out;
  for (auto& p : partials) {
    Node n{std::move(p.cursor), node.cand, node.reward_sum};
    n.cand.tokens.insert(n.cand.tokens.end(), p.tokens.begin(), p.tokens.end());
    n.cand.logprobs.insert(n.cand.logprobs.end(), p.logprobs.begin(), p.logprobs.end());
    out.push_back(std::move(n));
  }
  return out;
}

PlanResult finish(std::vector<BeamCandidate> beam, const Discretizer& disc, int used) {
  PlanResult res;
  res.context_tokens_used = used;
  if (beam.empty()) throw std::runtime_error("planner produced no candidates");
  const VocabLayout& lay = disc.layout();
  const BeamCandidate& best = beam.front();
  for (int i = 0; i < lay.action_dim(); ++i) {
    const int tok = best.tokens[i];
    res.action_tokens.push_back(tok);
    res.action.push_back(disc.decode(lay.field(FieldKind::kAction, i), tok));
  }
  res.score = best.score;
  res.beam = std::move(beam);
  return res;
}

int planned_length(const VocabLayout& lay, int horizon) { return horizon * lay.tokens_per_step() - lay.state_dim(); }

void enumerate(Node& node, const Discretizer& disc, const PlannerConfig& cfg, int h, int dim,
               std::vector<BeamCandidate>& out) {
  const VocabLayout& lay = disc.layout();
  if (dim == lay.action_dim()) {
    close_step(node, disc, h, cfg.horizon, cfg.discount);
    if (h + 1 == cfg.horizon) {
      out.push_back(node.cand);
      return;
    }
    open_next_state(node, disc);
    enumerate(node, disc, cfg, h + 1, 0, out);
    return;
  }
  const auto row = node.cursor->logprobs();
  for (int t = 0; t < static_cast<int>(row.size()); ++t) {
    if (!(row[t] > kNegInf)) continue;
    Node child{node.cursor->clone(), node.cand, node.reward_sum};
    child.cand.tokens.push_back(t);
    child.cand.logprobs.push_back(row[t]);
    child.cursor->push(t);
    enumerate(child, disc, cfg, h, dim + 1, out);
  }
}

}  // namespace

std::unique_ptr<TokenCursor> TransformerTokenModel::start(std::span<const int> context) const {
  auto c = std::make_unique<DecoderCursor>(*params_);
  for (int t : context) c->push(t);
  return c;
}

ChainTokenModel::ChainTokenModel(ChainMDP env, int bins, double discount)
    : env_(std::move(env)), layout_(1, 1, bins), discount_(discount) {
  if (!(discount > 0.0 && discount <= 1.0)) throw InvalidInput("discount must lie in (0, 1]");
  const int horizon = env_.episode_length();
  double rlo = 1e300, rhi = -1e300, glo = 1e300, ghi = -1e300;
  for (int t = 0; t < horizon; ++t) {
    for (int c = 0; c < ChainMDP::kCells; ++c) {
      for (int a = 0; a < ChainMDP::kActions; ++a) {
        const double r = env_.reward(c, a);
        const double g = r + discount_ * env_.uniform_value(ChainMDP::next_cell(c, a), horizon - t - 1, discount_);
        rlo = std::min(rlo, r);
        rhi = std::max(rhi, r);
        glo = std::min(glo, g);
        ghi = std::max(ghi, g);
      }
    }
  }
  auto widen = [](double& lo, double& hi) {
    if (lo == hi) {
      const double e = degenerate_padding(lo);
      lo -= e;
      hi += e;
    }
  };
  widen(rlo, rhi);
  widen(glo, ghi);
  disc_ = Discretizer(layout_, {0.0, 0.0, rlo, glo}, {ChainMDP::kCells - 1.0, 1.0, rhi, ghi});
}

std::vector<double> ChainTokenModel::logprobs_after(std::span<const int> tokens) const {
  const int tps = layout_.tokens_per_step();
  const int n = static_cast<int>(tokens.size());
  const int t = n / tps;
  const int offset = n % tps;
  if (t >= env_.episode_length()) throw InvalidInput("chain token model queried past the horizon");
  std::vector<double> row(layout_.bins(), kNegInf);
  auto cell_at = [&](int step) {
    return static_cast<int>(std::lround(disc_.decode(0, tokens[static_cast<size_t>(step) * tps])));
  };
  auto action_at = [&](int step) { return disc_.decode(1, tokens[static_cast<size_t>(step) * tps + 1]) >= 0.5 ? 1 : 0; };
  switch (offset) {
    case 0: {
      const int cell = t == 0 ? 0 : ChainMDP::next_cell(cell_at(t - 1), action_at(t - 1));
      row[disc_.encode(0, cell)] = 0.0;
      break;
    }
    case 1:
      row[disc_.encode(1, 0.0)] = std::log(0.5);
      row[disc_.encode(1, 1.0)] = std::log(0.5);
      break;
    case 2:
      row[disc_.encode(2, env_.reward(cell_at(t), action_at(t)))] = 0.0;
      break;
    default: {
      const int c = cell_at(t);
      const int a = action_at(t);
      const double g =
          env_.reward(c, a) +
          discount_ * env_.uniform_value(ChainMDP::next_cell(c, a), env_.episode_length() - t - 1, discount_);
      row[disc_.encode(3, g)] = 0.0;
      break;
    }
  }
  return row;
}

std::unique_ptr<TokenCursor> ChainTokenModel::start(std::span<const int> context) const {
  return std::make_unique<ChainCursor>(*this, std::vector<int>(context.begin(), context.end()));
}

void PlannerConfig::validate() const {
  if (beam_width < 1) throw InvalidInput("beam width must be >= 1");
  if (horizon < 1) throw InvalidInput("planning horizon must be >= 1");
  if (expansions < 1) throw InvalidInput("expansions per beam entry must be >= 1");
  if (!(discount > 0.0 && discount <= 1.0)) throw InvalidInput("discount must lie in (0, 1]");
}

double beam_score(std::span<const double> rewards, std::span<const double> rewards_to_go, double discount) {
  if (rewards.empty() || rewards.size() != rewards_to_go.size()) throw InvalidInput("reward sequences mismatch");
  const size_t H = rewards.size();
  double s = 0.0;
  for (size_t h = 0; h + 1 < H; ++h) s += std::pow(discount, static_cast<double>(h)) * rewards[h];
  return s + std::pow(discount, static_cast<double>(H - 1)) * rewards_to_go[H - 1];
}

PlanResult plan(const TokenModel& model, const Discretizer& disc, std::span<const int> context,
                const PlannerConfig& cfg) {
  cfg.validate();
  const VocabLayout& lay = disc.layout();
  const int tps = lay.tokens_per_step();
  if (context.size() % tps != static_cast<size_t>(lay.state_dim())) {
    throw InvalidInput("planning context must end with a complete state");
  }
  const auto ctx = fit_context(context, tps, model.context_limit(), planned_length(lay, cfg.horizon));
  std::vector<Node> beam;
  beam.push_back({model.start(ctx), {}, 0.0});
  for (int h = 0; h < cfg.horizon; ++h) {
    std::vector<Node> pool;
    for (auto& node : beam) {
      for (auto& child : expand_actions(node, disc, cfg.expansions)) {
        close_step(child, disc, h, cfg.horizon, cfg.discount);
        pool.push_back(std::move(child));
      }
    }
    std::stable_sort(pool.begin(), pool.end(), [](const Node& a, const Node& b) { return a.cand.score > b.cand.score; });
    if (static_cast<int>(pool.size()) > cfg.beam_width) pool.resize(cfg.beam_width);
    if (h + 1 < cfg.horizon) {
      for (auto& node : pool) open_next_state(node, disc);
    }
    beam = std::move(pool);
  }
  std::vector<BeamCandidate> out;
  for (auto& n : beam) out.push_back(std::move(n.cand));
  return finish(std::move(out), disc, static_cast<int>(ctx.size()));
}

PlanResult plan(const ModelParams& params, const Discretizer& disc, std::span<const int> context,
                const PlannerConfig& cfg) {
  if (disc.layout().bins() != params.config.vocab) throw InvalidInput("discretizer does not match model vocabulary");
  return plan(TransformerTokenModel(params), disc, context, cfg);
}

std::vector<BeamCandidate> enumerate_plans(const TokenModel& model, const Discretizer& disc,
                                           std::span<const int> context, const PlannerConfig& cfg) {
  cfg.validate();
  const int tps = disc.layout().tokens_per_step();
  const auto ctx = fit_context(context, tps, model.context_limit(), planned_length(disc.layout(), cfg.horizon));
  Node root{model.start(ctx), {}, 0.0};
  std::vector<BeamCandidate> out;
  enumerate(root, disc, cfg, 0, 0, out);
  return out;
}

EpisodeResult run_episode(const Environment& env, const TokenModel& model, const Discretizer& disc,
                          const PlannerConfig& cfg, int max_steps, std::uint64_t env_seed) {
  const VocabLayout& lay = disc.layout();
  if (lay.state_dim() != env.state_dim() || lay.action_dim() != env.action_dim()) {
    throw InvalidInput("discretizer layout does not match the environment");
  }
  EpisodeResult res;
  res.trajectory.states = Series(0, env.state_dim());
  res.trajectory.actions = Series(0, env.action_dim());
  res.predicted_next_states = Series(0, env.state_dim());
  res.real_next_states = Series(0, env.state_dim());
  if (max_steps <= 0) return res;

  Rng rng(env_seed);
  EnvState s = env.reset(rng);
  std::vector<int> ctx;
  auto push_state = [&](const std::vector<double>& obs) {
    for (int i = 0; i < lay.state_dim(); ++i) ctx.push_back(disc.encode(lay.field(FieldKind::kState, i), obs[i]));
  };
  push_state(s.observation);
  const int tps = lay.tokens_per_step();
  for (int step = 0; step < max_steps; ++step) {
    PlannerConfig pc = cfg;
    pc.horizon = std::max(1, std::min(cfg.horizon, env.episode_length() - s.time));
    const PlanResult p = plan(model, disc, ctx, pc);
    res.plan_scores.push_back(p.score);
    const auto action = env.clamp_action(p.action);
    StepResult r = env.step(s, action, rng);
    res.trajectory.states.push_back(s.observation);
    res.trajectory.actions.push_back(action);
    res.trajectory.rewards.push_back(r.reward);
    res.episode_return += r.reward;

    for (int tok : p.action_tokens) ctx.push_back(tok);
    ctx.push_back(disc.encode(lay.field(FieldKind::kReward, 0), r.reward));
    if (r.done || step + 1 == max_steps) {
      res.trajectory.terminal = r.done;
      break;
    }
    // reward-to-go token from the model, then its prediction of the next state
    const auto base = fit_context(ctx, tps, model.context_limit(), lay.state_dim() + 1);
    // fit_context drops whole steps counted from the front, so the offset stays aligned
    auto cursor = model.start(base);
    const int rtg = argmax(cursor->logprobs());
    cursor->push(rtg);
    std::vector<double> predicted(lay.state_dim());
    for (int i = 0; i < lay.state_dim(); ++i) {
      const auto row = cursor->logprobs();
      const int tok = argmax(row);
      predicted[i] = disc.decode(lay.field(FieldKind::kState, i), tok);
      if (i + 1 < lay.state_dim()) cursor->push(tok);
    }
    res.predicted_next_states.push_back(predicted);
    res.real_next_states.push_back(r.next.observation);
    ctx.push_back(rtg);
    push_state(r.next.observation);
    s = std::move(r.next);
  }
  return res;
}

}  // namespace boot
