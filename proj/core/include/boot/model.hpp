#pragma once

#include <cstdint>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "boot/rng.hpp"
#include "boot/trajectory.hpp"

namespace boot {

// 64-byte aligned storage so vectorized kernels see the same alignment on
// every allocation, keeping floating-point results bit-reproducible.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, size_t) { ::operator delete(p, kAlign); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

using ParamVector = std::vector<double, AlignedAllocator<double>>;

struct ModelConfig {
  int vocab = 100;
  int context = 80;  // tokens
  int width = 96;
  int layers = 3;
  int heads = 4;
  int ff_width = 384;
  double dropout = 0.1;
  double init_scale = 0.02;
  std::uint64_t seed = 0;

  int head_dim() const { return width / heads; }
  // Throws InvalidInput on inconsistent shape arithmetic.
  void validate(int tokens_per_step = 1) const;
  bool operator==(const ModelConfig&) const = default;
};

struct ParamBlock {
  std::string name;
  size_t offset = 0;
  int rows = 0;
  int cols = 0;
  bool is_weight = true;  // false for biases and norm offsets
  double init_value = 0.0;  // used when !is_weight (norm gains start at 1)

  size_t size() const { return static_cast<size_t>(rows) * cols; }
};

// Names, shapes and offsets of every parameter block in one flat buffer.
class ParamLayout {
 public:
  explicit ParamLayout(const ModelConfig& config);

  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  size_t total() const { return total_; }

  struct LayerBlocks {
    size_t ln1_g, ln1_b, w_qkv, b_qkv, w_proj, b_proj, ln2_g, ln2_b, w_fc, b_fc, w_out, b_out;
  };
  size_t wte() const { return wte_; }
  size_t wpe() const { return wpe_; }
  const LayerBlocks& layer(int l) const { return layers_[l]; }
  size_t lnf_g() const { return lnf_g_; }
  size_t lnf_b() const { return lnf_b_; }
  size_t w_head() const { return w_head_; }
  size_t b_head() const { return b_head_; }

  // Name of the block containing flat index i.
  const std::string& block_name(size_t i) const;

 private:
  size_t add(std::string name, int rows, int cols, bool is_weight, double init_value = 0.0);

  std::vector<ParamBlock> blocks_;
  std::vector<LayerBlocks> layers_;
  size_t wte_ = 0, wpe_ = 0, lnf_g_ = 0, lnf_b_ = 0, w_head_ = 0, b_head_ = 0;
  size_t total_ = 0;
};

// Token embedding has vocab + 1 rows; the extra row is the start-of-sequence input.
struct ModelParams {
  ModelConfig config;
  ParamVector values;

  ParamLayout layout() const { return ParamLayout(config); }
  int bos_token() const { return config.vocab; }
};

using Gradients = ParamVector;

ModelParams init_params(const ModelConfig& config);

// Row n holds log P(. | tokens[0..n)); row-major L x vocab.
struct LogProbTable {
  int rows = 0;
  int width = 0;
  std::vector<double> values;

  std::span<const double> row(int n) const {
    return {values.data() + static_cast<size_t>(n) * width, static_cast<size_t>(width)};
  }
  double at(int n, int token) const { return values[static_cast<size_t>(n) * width + token]; }
};

// Optional stochastic regularization during training. A null rng disables dropout.
struct ForwardOptions {
  Rng* dropout_rng = nullptr;
};

LogProbTable forward_logprobs(const ModelParams& params, std::span<const int> tokens);
inline LogProbTable forward_logprobs(const ModelParams& params, const TokenSequence& seq) {
  return forward_logprobs(params, std::span<const int>(seq.tokens));
}

// Batched forward: one table per sequence, computed in a single pass.
std::vector<LogProbTable> forward_logprobs_batch(const ModelParams& params,
                                                 std::span<const std::vector<int>> batch);

struct LossResult {
  double loss = 0.0;                   // mean NLL over all positions of the batch
  std::vector<double> per_sequence;    // mean NLL of each sequence
  Gradients grad;                      // empty unless requested
};

LossResult loss_and_grad(const ModelParams& params, std::span<const std::vector<int>> batch, bool want_grad,
                         const ForwardOptions& options = {});

double nll_loss(const ModelParams& params, std::span<const std::vector<int>> batch);

// Throws std::runtime_error naming the offending block on non-finite components.
Gradients grad(const ModelParams& params, std::span<const std::vector<int>> batch,
               const ForwardOptions& options = {});

// NLL per field kind (state, action, reward, reward-to-go), each summed over
// positions of that kind and divided by the batch's total token count, so the
// four values add up to nll_loss.
std::vector<double> nll_by_kind(const ModelParams& params, std::span<const std::vector<int>> batch,
                                const VocabLayout& layout);

// Incremental decoder with a key/value cache over the causal context.
class DecoderState {
 public:
  explicit DecoderState(const ModelParams& params);

  // Log-probabilities of the next token given everything pushed so far.
  std::span<const double> logprobs() const { return logprobs_; }
  // Number of tokens pushed (the next token's position).
  int position() const { return pos_ - 1; }
  bool full() const { return pos_ >= params_->config.context; }
  void push(int token);
  void push(std::span<const int> tokens);

 private:
  void advance(int input_token);

  const ModelParams* params_;
  std::shared_ptr<const ParamLayout> layout_;
  int pos_ = 0;  // input positions consumed, including the start token
  std::vector<ParamVector> keys_;
  std::vector<ParamVector> vals_;
  std::vector<double> logprobs_;
};

enum class SamplingPolicy { kCategorical, kGreedy };

// Draws from exp(logprobs) restricted to `allowed` (all tokens when empty).
int sample_token(std::span<const double> logprobs, Rng& rng, SamplingPolicy policy,
                 std::span<const std::uint8_t> allowed = {});

int sample_next_token(const ModelParams& params, std::span<const int> prefix, Rng& rng, SamplingPolicy policy);

// Process-wide count of full-sequence forward passes (batched calls count once).
std::uint64_t forward_pass_count();

}  // namespace boot
