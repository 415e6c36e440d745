#include "boot/model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace boot {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using MapMat = Eigen::Map<Mat>;
using CMapMat = Eigen::Map<const Mat>;
using CMapVec = Eigen::Map<const Vec>;
using MapVec = Eigen::Map<Vec>;

constexpr double kLayerNormEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

std::atomic<std::uint64_t> g_forward_passes{0};

// tanh(z) through the vectorized exponential; Eigen's double tanh is scalar.
Mat tanh_of(const Mat& z) {
  return 1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0);
}

Mat gelu_inner(const Mat& u) { return kGeluC * (u.array() + 0.044715 * u.array().cube()); }

// Returns gelu(u) and stores tanh of the inner argument for the backward pass.
Mat gelu(const Mat& u, Mat& t) {
  t = tanh_of(gelu_inner(u));
  return 0.5 * u.array() * (1.0 + t.array());
}

Mat gelu_grad(const Mat& u, const Mat& t) {
  return 0.5 * (1.0 + t.array()) +
         0.5 * u.array() * (1.0 - t.array().square()) * kGeluC * (1.0 + 3.0 * 0.044715 * u.array().square());
}

struct NormCache {
  Mat xhat;
  Eigen::VectorXd rstd;
};

// y = xhat * g + b, row-wise.
void layer_norm(const Mat& x, const double* g, const double* b, NormCache& cache, Mat& y) {
  const Eigen::Index rows = x.rows();
  const Eigen::Index d = x.cols();
  cache.xhat.resize(rows, d);
  cache.rstd.resize(rows);
  y.resize(rows, d);
  CMapVec gain(g, d);
  CMapVec bias(b, d);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.rstd[r] = rstd;
    cache.xhat.row(r) = (x.row(r).array() - mean) * rstd;
    y.row(r) = cache.xhat.row(r).cwiseProduct(gain) + bias;
  }
}

// Accumulates into dg/db and returns dx.
void layer_norm_backward(const Mat& dy, const NormCache& cache, const double* g, double* dg, double* db, Mat& dx) {
  const Eigen::Index rows = dy.rows();
  const Eigen::Index d = dy.cols();
  CMapVec gain(g, d);
  MapVec dgain(dg, d);
  MapVec dbias(db, d);
  dgain += dy.cwiseProduct(cache.xhat).colwise().sum();
  dbias += dy.colwise().sum();
  dx.resize(rows, d);
  for (Eigen::Index r = 0; r < rows; ++r) {
    Vec dxhat = dy.row(r).cwiseProduct(gain);
    const double m1 = dxhat.mean();
    const double m2 = dxhat.cwiseProduct(cache.xhat.row(r)).mean();
    dx.row(r) = cache.rstd[r] * (dxhat.array() - m1 - cache.xhat.row(r).array() * m2);
  }
}

void apply_dropout(Mat& x, double p, Rng* rng, Mat& mask) {
  if (rng == nullptr || p <= 0.0) {
    mask.resize(0, 0);
    return;
  }
  mask.resize(x.rows(), x.cols());
  const double keep = 1.0 / (1.0 - p);
  std::bernoulli_distribution drop(p);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = drop(*rng) ? 0.0 : keep;
  x.array() *= mask.array();
}

void dropout_backward(Mat& dx, const Mat& mask) {
  if (mask.size() != 0) dx.array() *= mask.array();
}

void log_softmax_rows(Mat& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double mx = m.row(r).maxCoeff();
    const double lse = mx + std::log((m.row(r).array() - mx).exp().sum());
    m.row(r).array() -= lse;
  }
}

struct Segment {
  Eigen::Index offset;
  Eigen::Index length;
};

struct LayerCache {
  Mat x_in;
  NormCache ln1;
  Mat h1;
  Mat qkv;
  std::vector<Mat> probs;  // per (segment, head)
  Mat att;
  Mat drop1;
  Mat x_mid;
  NormCache ln2;
  Mat h2;
  Mat u;
  Mat t;
  Mat g;
  Mat drop2;
};

struct ForwardCache {
  std::vector<Segment> segments;
  std::vector<int> inputs;
  std::vector<int> positions;
  std::vector<int> targets;
  Mat drop0;
  std::vector<LayerCache> layers;
  Mat x_final;
  NormCache lnf;
  Mat hf;
  Mat logprobs;
};

void check_batch(const ModelConfig& config, std::span<const std::vector<int>> batch) {
  if (batch.empty()) throw InvalidInput("empty batch");
  for (const auto& seq : batch) {
    if (seq.empty()) throw InvalidInput("empty token sequence");
    if (static_cast<int>(seq.size()) > config.context) throw InvalidInput("token sequence longer than context");
    for (int t : seq) {
      if (t < 0 || t >= config.vocab) throw InvalidInput("token out of vocabulary");
    }
  }
}

void run_forward(const ModelParams& params, std::span<const std::vector<int>> batch, const ForwardOptions& options,
                 ForwardCache& c) {
  const ModelConfig& cfg = params.config;
  check_batch(cfg, batch);
  const ParamLayout layout(cfg);
  const double* p = params.values.data();
  const int d = cfg.width;
  const int hd = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  Rng* rng = options.dropout_rng;

  Eigen::Index rows = 0;
  c.segments.clear();
  c.inputs.clear();
  c.positions.clear();
  c.targets.clear();
  for (const auto& seq : batch) {
    c.segments.push_back({rows, static_cast<Eigen::Index>(seq.size())});
    for (size_t n = 0; n < seq.size(); ++n) {
      c.inputs.push_back(n == 0 ? params.bos_token() : seq[n - 1]);
      c.positions.push_back(static_cast<int>(n));
      c.targets.push_back(seq[n]);
    }
    rows += static_cast<Eigen::Index>(seq.size());
  }

  Mat x(rows, d);
  CMapMat wte(p + layout.wte(), cfg.vocab + 1, d);
  CMapMat wpe(p + layout.wpe(), cfg.context, d);
  for (Eigen::Index r = 0; r < rows; ++r) x.row(r) = wte.row(c.inputs[r]) + wpe.row(c.positions[r]);
  apply_dropout(x, cfg.dropout, rng, c.drop0);

  c.layers.resize(cfg.layers);
  for (int l = 0; l < cfg.layers; ++l) {
    const auto& lb = layout.layer(l);
    LayerCache& lc = c.layers[l];
    lc.x_in = x;
    layer_norm(x, p + lb.ln1_g, p + lb.ln1_b, lc.ln1, lc.h1);
    CMapMat w_qkv(p + lb.w_qkv, d, 3 * d);
    lc.qkv.noalias() = lc.h1 * w_qkv;
    lc.qkv.rowwise() += CMapVec(p + lb.b_qkv, 3 * d);

    lc.att.resize(rows, d);
    lc.probs.resize(c.segments.size() * cfg.heads);
    for (size_t s = 0; s < c.segments.size(); ++s) {
      const auto [off, len] = c.segments[s];
      for (int h = 0; h < cfg.heads; ++h) {
        Mat& P = lc.probs[s * cfg.heads + h];
        auto q = lc.qkv.block(off, h * hd, len, hd);
        auto k = lc.qkv.block(off, d + h * hd, len, hd);
        auto v = lc.qkv.block(off, 2 * d + h * hd, len, hd);
        P.noalias() = (q * k.transpose()) * scale;
        for (Eigen::Index i = 0; i < len; ++i) {
          auto row = P.row(i);
          const double mx = row.head(i + 1).maxCoeff();
          row.head(i + 1) = (row.head(i + 1).array() - mx).exp();
          row.head(i + 1) /= row.head(i + 1).sum();
          row.tail(len - i - 1).setZero();
        }
        lc.att.block(off, h * hd, len, hd).noalias() = P * v;
      }
    }
    CMapMat w_proj(p + lb.w_proj, d, d);
    Mat a = lc.att * w_proj;
    a.rowwise() += CMapVec(p + lb.b_proj, d);
    apply_dropout(a, cfg.dropout, rng, lc.drop1);
    lc.x_mid = x + a;

    layer_norm(lc.x_mid, p + lb.ln2_g, p + lb.ln2_b, lc.ln2, lc.h2);
    CMapMat w_fc(p + lb.w_fc, d, cfg.ff_width);
    lc.u.noalias() = lc.h2 * w_fc;
    lc.u.rowwise() += CMapVec(p + lb.b_fc, cfg.ff_width);
    lc.g = gelu(lc.u, lc.t);
    CMapMat w_out(p + lb.w_out, cfg.ff_width, d);
    Mat m = lc.g * w_out;
    m.rowwise() += CMapVec(p + lb.b_out, d);
    apply_dropout(m, cfg.dropout, rng, lc.drop2);
    x = lc.x_mid + m;
  }

  c.x_final = x;
  layer_norm(x, p + layout.lnf_g(), p + layout.lnf_b(), c.lnf, c.hf);
  CMapMat w_head(p + layout.w_head(), d, cfg.vocab);
  c.logprobs.noalias() = c.hf * w_head;
  c.logprobs.rowwise() += CMapVec(p + layout.b_head(), cfg.vocab);
  log_softmax_rows(c.logprobs);
}

// Accumulates into gout, which must already have the parameter count.
void run_backward(const ModelParams& params, ForwardCache& c, double inv_count, Gradients& gout) {
  const ModelConfig& cfg = params.config;
  const ParamLayout layout(cfg);
  const double* p = params.values.data();
  double* gp = gout.data();
  const int d = cfg.width;
  const int hd = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const Eigen::Index rows = c.logprobs.rows();

  Mat dlogits = c.logprobs.array().exp();
  for (Eigen::Index r = 0; r < rows; ++r) dlogits(r, c.targets[r]) -= 1.0;
  dlogits *= inv_count;

  MapMat(gp + layout.w_head(), d, cfg.vocab).noalias() += c.hf.transpose() * dlogits;
  MapVec(gp + layout.b_head(), cfg.vocab) += dlogits.colwise().sum();
  Mat dhf = dlogits * CMapMat(p + layout.w_head(), d, cfg.vocab).transpose();
  Mat dx;
  layer_norm_backward(dhf, c.lnf, p + layout.lnf_g(), gp + layout.lnf_g(), gp + layout.lnf_b(), dx);

  Mat tmp;
  for (int l = cfg.layers - 1; l >= 0; --l) {
    const auto& lb = layout.layer(l);
    LayerCache& lc = c.layers[l];

    // Feed-forward branch.
    Mat dm = dx;
    dropout_backward(dm, lc.drop2);
    MapMat(gp + lb.w_out, cfg.ff_width, d).noalias() += lc.g.transpose() * dm;
    MapVec(gp + lb.b_out, d) += dm.colwise().sum();
    Mat du = dm * CMapMat(p + lb.w_out, cfg.ff_width, d).transpose();
    du.array() *= gelu_grad(lc.u, lc.t).array();
    MapMat(gp + lb.w_fc, d, cfg.ff_width).noalias() += lc.h2.transpose() * du;
    MapVec(gp + lb.b_fc, cfg.ff_width) += du.colwise().sum();
    Mat dh2 = du * CMapMat(p + lb.w_fc, d, cfg.ff_width).transpose();
    layer_norm_backward(dh2, lc.ln2, p + lb.ln2_g, gp + lb.ln2_g, gp + lb.ln2_b, tmp);
    dx += tmp;  // now d(x_mid)

    // Attention branch.
    Mat da = dx;
    dropout_backward(da, lc.drop1);
    MapMat(gp + lb.w_proj, d, d).noalias() += lc.att.transpose() * da;
    MapVec(gp + lb.b_proj, d) += da.colwise().sum();
    Mat datt = da * CMapMat(p + lb.w_proj, d, d).transpose();
    Mat dqkv = Mat::Zero(rows, 3 * d);
    for (size_t s = 0; s < c.segments.size(); ++s) {
      const auto [off, len] = c.segments[s];
      for (int h = 0; h < cfg.heads; ++h) {
        const Mat& P = lc.probs[s * cfg.heads + h];
        auto q = lc.qkv.block(off, h * hd, len, hd);
        auto k = lc.qkv.block(off, d + h * hd, len, hd);
        auto v = lc.qkv.block(off, 2 * d + h * hd, len, hd);
        auto dout = datt.block(off, h * hd, len, hd);
        Mat dP = dout * v.transpose();
        Eigen::VectorXd rowdot = (dP.cwiseProduct(P)).rowwise().sum();
        Mat dS = P.cwiseProduct(dP.colwise() - rowdot);
        dqkv.block(off, h * hd, len, hd).noalias() = (dS * k) * scale;
        dqkv.block(off, d + h * hd, len, hd).noalias() = (dS.transpose() * q) * scale;
        dqkv.block(off, 2 * d + h * hd, len, hd).noalias() = P.transpose() * dout;
      }
    }
    MapMat(gp + lb.w_qkv, d, 3 * d).noalias() += lc.h1.transpose() * dqkv;
    MapVec(gp + lb.b_qkv, 3 * d) += dqkv.colwise().sum();
    Mat dh1 = dqkv * CMapMat(p + lb.w_qkv, d, 3 * d).transpose();
    layer_norm_backward(dh1, lc.ln1, p + lb.ln1_g, gp + lb.ln1_g, gp + lb.ln1_b, tmp);
    dx += tmp;  // now d(x_in)
  }

  dropout_backward(dx, c.drop0);
  MapMat dwte(gp + layout.wte(), cfg.vocab + 1, d);
  MapMat dwpe(gp + layout.wpe(), cfg.context, d);
  for (Eigen::Index r = 0; r < rows; ++r) {
    dwte.row(c.inputs[r]) += dx.row(r);
    dwpe.row(c.positions[r]) += dx.row(r);
  }
}

LogProbTable to_table(const Mat& lp, Eigen::Index off, Eigen::Index len) {
  LogProbTable t;
  t.rows = static_cast<int>(len);
  t.width = static_cast<int>(lp.cols());
  t.values.resize(static_cast<size_t>(len) * lp.cols());
  MapMat(t.values.data(), len, lp.cols()) = lp.middleRows(off, len);
  return t;
}

}  // namespace

void ModelConfig::validate(int tokens_per_step) const {
  if (vocab < 2) throw InvalidInput("vocabulary needs at least two tokens");
  if (width < 1 || layers < 1 || heads < 1 || ff_width < 1) throw InvalidInput("model dimensions must be positive");
  if (width % heads != 0) throw InvalidInput("embedding width must be divisible by head count");
  if (context < tokens_per_step || context < 1) throw InvalidInput("context shorter than one step");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw InvalidInput("dropout must lie in [0, 1)");
  if (!(init_scale >= 0.0) || !std::isfinite(init_scale)) throw InvalidInput("init scale must be finite and >= 0");
}

ParamLayout::ParamLayout(const ModelConfig& config) {
  config.validate();
  const int d = config.width;
  wte_ = add("wte", config.vocab + 1, d, true);
  wpe_ = add("wpe", config.context, d, true);
  for (int l = 0; l < config.layers; ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    LayerBlocks lb{};
    lb.ln1_g = add(pre + "ln1.gain", 1, d, false, 1.0);
    lb.ln1_b = add(pre + "ln1.bias", 1, d, false);
    lb.w_qkv = add(pre + "attn.w_qkv", d, 3 * d, true);
    lb.b_qkv = add(pre + "attn.b_qkv", 1, 3 * d, false);
    lb.w_proj = add(pre + "attn.w_proj", d, d, true);
    lb.b_proj = add(pre + "attn.b_proj", 1, d, false);
    lb.ln2_g = add(pre + "ln2.gain", 1, d, false, 1.0);
    lb.ln2_b = add(pre + "ln2.bias", 1, d, false);
    lb.w_fc = add(pre + "mlp.w_fc", d, config.ff_width, true);
    lb.b_fc = add(pre + "mlp.b_fc", 1, config.ff_width, false);
    lb.w_out = add(pre + "mlp.w_out", config.ff_width, d, true);
    lb.b_out = add(pre + "mlp.b_out", 1, d, false);
    layers_.push_back(lb);
  }
  lnf_g_ = add("lnf.gain", 1, d, false, 1.0);
  lnf_b_ = add("lnf.bias", 1, d, false);
  w_head_ = add("head.w", d, config.vocab, true);
  b_head_ = add("head.b", 1, config.vocab, false);
}

size_t ParamLayout::add(std::string name, int rows, int cols, bool is_weight, double init_value) {
  ParamBlock b{std::move(name), total_, rows, cols, is_weight, init_value};
  total_ += b.size();
  blocks_.push_back(std::move(b));
  return blocks_.back().offset;
}

const std::string& ParamLayout::block_name(size_t i) const {
  for (const auto& b : blocks_) {
    if (i >= b.offset && i < b.offset + b.size()) return b.name;
  }
  throw InvalidInput("parameter index out of range");
}

ModelParams init_params(const ModelConfig& config) {
  const ParamLayout layout(config);
  ModelParams params;
  params.config = config;
  params.values.assign(layout.total(), 0.0);
  Rng rng(derive_seed(config.seed, "init"));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const auto& b : layout.blocks()) {
    for (size_t i = 0; i < b.size(); ++i) {
      params.values[b.offset + i] = b.is_weight ? config.init_scale * normal(rng) : b.init_value;
    }
  }
  return params;
}

LogProbTable forward_logprobs(const ModelParams& params, std::span<const int> tokens) {
  std::vector<std::vector<int>> batch{std::vector<int>(tokens.begin(), tokens.end())};
  return std::move(forward_logprobs_batch(params, batch).front());
}

// Sequences processed per forward/backward sweep; keeps activations cache-resident.
constexpr size_t kChunk = 4;

std::vector<LogProbTable> forward_logprobs_batch(const ModelParams& params, std::span<const std::vector<int>> batch) {
  check_batch(params.config, batch);
  g_forward_passes.fetch_add(1, std::memory_order_relaxed);
  std::vector<LogProbTable> out;
  out.reserve(batch.size());
  ForwardCache cache;
  for (size_t begin = 0; begin < batch.size(); begin += kChunk) {
    run_forward(params, batch.subspan(begin, std::min(kChunk, batch.size() - begin)), {}, cache);
    for (const auto& seg : cache.segments) out.push_back(to_table(cache.logprobs, seg.offset, seg.length));
  }
  return out;
}

LossResult loss_and_grad(const ModelParams& params, std::span<const std::vector<int>> batch, bool want_grad,
                         const ForwardOptions& options) {
  check_batch(params.config, batch);
  g_forward_passes.fetch_add(1, std::memory_order_relaxed);
  double count = 0.0;
  for (const auto& seq : batch) count += static_cast<double>(seq.size());
  LossResult res;
  if (want_grad) res.grad.assign(params.values.size(), 0.0);
  double total = 0.0;
  ForwardCache cache;
  for (size_t begin = 0; begin < batch.size(); begin += kChunk) {
    run_forward(params, batch.subspan(begin, std::min(kChunk, batch.size() - begin)), options, cache);
    for (const auto& seg : cache.segments) {
      double s = 0.0;
      for (Eigen::Index r = seg.offset; r < seg.offset + seg.length; ++r) s -= cache.logprobs(r, cache.targets[r]);
      total += s;
      res.per_sequence.push_back(s / static_cast<double>(seg.length));
    }
    if (want_grad) run_backward(params, cache, 1.0 / count, res.grad);
  }
  res.loss = total / count;
  if (!std::isfinite(res.loss)) throw std::runtime_error("non-finite loss");
  return res;
}

double nll_loss(const ModelParams& params, std::span<const std::vector<int>> batch) {
  return loss_and_grad(params, batch, false).loss;
}

Gradients grad(const ModelParams& params, std::span<const std::vector<int>> batch, const ForwardOptions& options) {
  Gradients g = loss_and_grad(params, batch, true, options).grad;
  for (size_t i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i])) {
      throw std::runtime_error("non-finite gradient in block " + ParamLayout(params.config).block_name(i));
    }
  }
  return g;
}

std::vector<double> nll_by_kind(const ModelParams& params, std::span<const std::vector<int>> batch,
                                const VocabLayout& layout) {
  const auto tables = forward_logprobs_batch(params, batch);
  std::vector<double> out(4, 0.0);
  double count = 0.0;
  for (size_t s = 0; s < batch.size(); ++s) {
    for (size_t n = 0; n < batch[s].size(); ++n) {
      const FieldKind kind = layout.kind_of_field(layout.field_of(static_cast<int>(n)));
      out[static_cast<int>(kind)] -= tables[s].at(static_cast<int>(n), batch[s][n]);
      count += 1.0;
    }
  }
  for (double& v : out) v /= count;
  return out;
}

DecoderState::DecoderState(const ModelParams& params)
    : params_(&params), layout_(std::make_shared<const ParamLayout>(params.config)) {
  keys_.resize(params.config.layers);
  vals_.resize(params.config.layers);
  advance(params.bos_token());
}

void DecoderState::push(int token) {
  if (token < 0 || token >= params_->config.vocab) throw InvalidInput("token out of vocabulary");
  if (full()) throw InvalidInput("decoder context is full");
  advance(token);
}

void DecoderState::push(std::span<const int> tokens) {
  for (int t : tokens) push(t);
}

void DecoderState::advance(int input_token) {
  const ModelConfig& cfg = params_->config;
  const ParamLayout& layout = *layout_;
  const double* p = params_->values.data();
  const int d = cfg.width;
  const int hd = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const int pos = pos_;

  Mat x = CMapMat(p + layout.wte(), cfg.vocab + 1, d).row(input_token) + CMapMat(p + layout.wpe(), cfg.context, d).row(pos);
  NormCache norm;
  Mat h;
  for (int l = 0; l < cfg.layers; ++l) {
    const auto& lb = layout.layer(l);
    layer_norm(x, p + lb.ln1_g, p + lb.ln1_b, norm, h);
    Mat qkv = h * CMapMat(p + lb.w_qkv, d, 3 * d);
    qkv += CMapVec(p + lb.b_qkv, 3 * d);
    auto& kc = keys_[l];
    auto& vc = vals_[l];
    kc.insert(kc.end(), qkv.data() + d, qkv.data() + 2 * d);
    vc.insert(vc.end(), qkv.data() + 2 * d, qkv.data() + 3 * d);
    CMapMat keys(kc.data(), pos + 1, d);
    CMapMat vals(vc.data(), pos + 1, d);
    Mat att(1, d);
    for (int hh = 0; hh < cfg.heads; ++hh) {
      Eigen::VectorXd s = keys.middleCols(hh * hd, hd) * qkv.block(0, hh * hd, 1, hd).transpose();
      s *= scale;
      s = (s.array() - s.maxCoeff()).exp();
      s /= s.sum();
      att.block(0, hh * hd, 1, hd) = s.transpose() * vals.middleCols(hh * hd, hd);
    }
    Mat a = att * CMapMat(p + lb.w_proj, d, d);
    a += CMapVec(p + lb.b_proj, d);
    x += a;
    layer_norm(x, p + lb.ln2_g, p + lb.ln2_b, norm, h);
    Mat u = h * CMapMat(p + lb.w_fc, d, cfg.ff_width);
    u += CMapVec(p + lb.b_fc, cfg.ff_width);
    Mat t;
    Mat m = gelu(u, t) * CMapMat(p + lb.w_out, cfg.ff_width, d);
    m += CMapVec(p + lb.b_out, d);
    x += m;
  }
  layer_norm(x, p + layout.lnf_g(), p + layout.lnf_b(), norm, h);
  Mat logits = h * CMapMat(p + layout.w_head(), d, cfg.vocab);
  logits += CMapVec(p + layout.b_head(), cfg.vocab);
  log_softmax_rows(logits);
  logprobs_.assign(logits.data(), logits.data() + cfg.vocab);
  ++pos_;
}

int sample_token(std::span<const double> logprobs, Rng& rng, SamplingPolicy policy,
                 std::span<const std::uint8_t> allowed) {
  const int n = static_cast<int>(logprobs.size());
  if (!allowed.empty() && static_cast<int>(allowed.size()) != n) throw InvalidInput("mask width mismatch");
  auto ok = [&](int i) { return allowed.empty() || allowed[i] != 0; };
  if (policy == SamplingPolicy::kGreedy) {
    int best = -1;
    for (int i = 0; i < n; ++i) {
      if (ok(i) && (best < 0 || logprobs[i] > logprobs[best])) best = i;
    }
    if (best < 0) throw InvalidInput("no token is allowed");
    return best;
  }
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    if (ok(i)) total += std::exp(logprobs[i]);
  }
  if (!(total > 0.0)) throw InvalidInput("no token has probability mass");
  const double target = uniform01(rng) * total;
  double acc = 0.0;
  int last = -1;
  for (int i = 0; i < n; ++i) {
    if (!ok(i)) continue;
    const double pr = std::exp(logprobs[i]);
    if (pr <= 0.0) continue;
    acc += pr;
    last = i;
    if (target < acc) return i;
  }
  return last;
}

int sample_next_token(const ModelParams& params, std::span<const int> prefix, Rng& rng, SamplingPolicy policy) {
  if (static_cast<int>(prefix.size()) >= params.config.context) throw InvalidInput("prefix fills the context");
  DecoderState state(params);
  state.push(prefix);
  return sample_token(state.logprobs(), rng, policy);
}

std::uint64_t forward_pass_count() { return g_forward_passes.load(std::memory_order_relaxed); }

}  // namespace boot
