#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ilt/matrix.hpp"
#include "ilt/rng.hpp"
#include "ilt/vocab.hpp"

namespace ilt {

struct ModelConfig {
  int n_layers = 2;
  int d_model = 64;
  int n_heads = 4;
  int d_ff = 256;
  int max_seq_len = 256;
  int vocab_size = 0;
  double dropout = 0.2;
  std::uint64_t seed = 0;
  double init_std = 0.02;
  /// Zero every weight matrix and embedding (gives uniform logits).
  bool zero_init = false;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Where one named tensor lives inside the flat parameter vector.
struct TensorSlot {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  [[nodiscard]] std::size_t size() const { return rows * cols; }
};

struct LayerSlots {
  std::size_t ln1_g, ln1_b, w_qkv, b_qkv, w_proj, b_proj;
  std::size_t ln2_g, ln2_b, w_fc, b_fc, w_out, b_out;
};

/// Pre-norm GPT-style layout: token + learned position embeddings, blocks of
/// (LN, causal MHA, residual, LN, GELU MLP, residual), final LN, linear head.
/// Weight matrices are stored input-major (in x out).
struct ParamLayout {
  std::size_t wte = 0, wpe = 0;
  std::vector<LayerSlots> layers;
  std::size_t lnf_g = 0, lnf_b = 0, w_head = 0, b_head = 0;
  std::vector<TensorSlot> tensors;
  std::size_t total = 0;

  ParamLayout() = default;
  explicit ParamLayout(const ModelConfig& cfg);
};

/// Parameter count implied by the layout, written out in closed form.
std::size_t parameter_count(const ModelConfig& cfg);

struct Model {
  ModelConfig config;
  ParamLayout layout;
  std::vector<double> params;

  Model() = default;
  explicit Model(const ModelConfig& cfg);
};

/// Deterministic initialization from cfg.seed: N(0, init_std) weights,
/// unit LayerNorm gains, zero biases.
Model init_model(const ModelConfig& cfg);

struct ForwardResult {
  Matrix logits;  // T x V
  Matrix hidden;  // T x d, after the final LayerNorm
};

/// Full causal forward pass. Dropout is applied only when `rng` is given
/// and train_mode is true.
ForwardResult forward(const Model& model, std::span<const TokenId> tokens, bool train_mode = false, Rng* rng = nullptr);

struct LossAndGrads {
  double loss = 0.0;      // mean NLL over target positions
  double nll_sum = 0.0;   // sum NLL over target positions
  int n_targets = 0;
  std::vector<double> grads;  // same layout as Model::params
};

/// Masked next-token cross-entropy: loss_mask[t] = 1 scores token t given
/// tokens[0..t-1]. Position 0 can never be a target. Gradients are exact
/// for the same forward graph (including dropout masks drawn from `rng`).
LossAndGrads loss_and_grads(const Model& model, std::span<const TokenId> tokens,
                            std::span<const unsigned char> loss_mask, bool train_mode = false, Rng* rng = nullptr,
                            bool want_grads = true);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip_norm = 1.0;  // <= 0 disables clipping
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update, after optional global-norm clipping.
/// Returns the pre-clipping gradient norm.
double adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamConfig& cfg);

/// Incremental decoder with a per-layer key/value cache (eval mode only).
class DecodeSession {
 public:
  explicit DecodeSession(const Model& model);
  /// Appends one token and returns the next-token logits.
  std::span<const double> push(TokenId token);
  [[nodiscard]] std::size_t position() const { return pos_; }

 private:
  const Model& model_;
  std::size_t pos_ = 0;
  std::vector<Matrix> keys_;
  std::vector<Matrix> values_;
  std::vector<double> logits_;
};

struct DecodeResult {
  std::vector<TokenId> tokens;  // generated continuation, EOS included if produced
  bool hit_eos = false;
  bool truncated = false;
};

/// Argmax decoding (ties to the lowest id) until EOS or max_new_tokens.
DecodeResult greedy_decode(const Model& model, std::span<const TokenId> prompt, int max_new_tokens,
                           const JointVocab& vocab);

}  // namespace ilt
