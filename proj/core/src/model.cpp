#include "ilt/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace ilt {

void ModelConfig::validate() const {
  if (n_layers < 1) throw std::invalid_argument("model: n_layers must be >= 1");
  if (d_model < 1 || n_heads < 1) throw std::invalid_argument("model: d_model and n_heads must be >= 1");
  if (d_model % n_heads != 0) {
    throw std::invalid_argument("model: d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                                std::to_string(n_heads));
  }
  if (d_ff < 1) throw std::invalid_argument("model: d_ff must be >= 1");
  if (max_seq_len < 1) throw std::invalid_argument("model: max_seq_len must be >= 1");
  if (vocab_size < 1) throw std::invalid_argument("model: vocab_size must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("model: dropout must be in [0, 1)");
  if (!(init_std >= 0.0)) throw std::invalid_argument("model: init_std must be >= 0");
}

ParamLayout::ParamLayout(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.d_model, f = cfg.d_ff, v = cfg.vocab_size, p = cfg.max_seq_len;
  auto add = [&](std::string name, std::size_t rows, std::size_t cols) {
    const std::size_t at = total;
    tensors.push_back(TensorSlot{std::move(name), at, rows, cols});
    total += rows * cols;
    return at;
  };
  wte = add("wte", v, d);
  wpe = add("wpe", p, d);
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string pre = "h" + std::to_string(l) + ".";
    LayerSlots s{};
    s.ln1_g = add(pre + "ln1.g", 1, d);
    s.ln1_b = add(pre + "ln1.b", 1, d);
    s.w_qkv = add(pre + "attn.w_qkv", d, 3 * d);
    s.b_qkv = add(pre + "attn.b_qkv", 1, 3 * d);
    s.w_proj = add(pre + "attn.w_proj", d, d);
    s.b_proj = add(pre + "attn.b_proj", 1, d);
    s.ln2_g = add(pre + "ln2.g", 1, d);
    s.ln2_b = add(pre + "ln2.b", 1, d);
    s.w_fc = add(pre + "mlp.w_fc", d, f);
    s.b_fc = add(pre + "mlp.b_fc", 1, f);
    s.w_out = add(pre + "mlp.w_out", f, d);
    s.b_out = add(pre + "mlp.b_out", 1, d);
    layers.push_back(s);
  }
  lnf_g = add("lnf.g", 1, d);
  lnf_b = add("lnf.b", 1, d);
  w_head = add("head.w", d, v);
  b_head = add("head.b", 1, v);
}

std::size_t parameter_count(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.d_model, f = cfg.d_ff, v = cfg.vocab_size, p = cfg.max_seq_len;
  const std::size_t per_layer = 4 * d + (3 * d * d + 3 * d) + (d * d + d) + (d * f + f) + (f * d + d);
  return v * d + p * d + cfg.n_layers * per_layer + 2 * d + d * v + v;
}

Model::Model(const ModelConfig& cfg) : config(cfg), layout(cfg), params(layout.total, 0.0) {}

Model init_model(const ModelConfig& cfg) {
  Model m(cfg);
  Rng rng(derive_seed(cfg.seed, 0x1417));
  for (const auto& t : m.layout.tensors) {
    auto* p = m.params.data() + t.offset;
    const bool is_gain = t.name.ends_with(".g");
    const bool is_bias = t.rows == 1 && !is_gain;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (is_gain) {
        p[i] = 1.0;
      } else if (is_bias || cfg.zero_init) {
        p[i] = 0.0;
      } else {
        p[i] = cfg.init_std * rng.normal();
      }
    }
  }
  return m;
}

namespace {

constexpr double kLnEps = 1e-5;
const double kGeluC = std::sqrt(2.0 / std::numbers::pi);

// y = x W + b for T rows.
void linear(const double* __restrict x, std::size_t rows, std::size_t in, const double* __restrict w,
            const double* __restrict b, std::size_t out, double* __restrict y) {
  for (std::size_t t = 0; t < rows; ++t) {
    double* yt = y + t * out;
    std::copy(b, b + out, yt);
    const double* xt = x + t * in;
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = xt[i];
      const double* wi = w + i * out;
      for (std::size_t o = 0; o < out; ++o) yt[o] += xi * wi[o];
    }
  }
}

// Eight independent partial sums so the reduction vectorizes without
// reassociation flags; the summation order is fixed.
double dot(const double* __restrict a, const double* __restrict b, std::size_t n) {
  double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail;
}

// Accumulates dx += dy W^T (if dx), dW += x^T dy, db += sum dy.
void linear_backward(const double* __restrict x, std::size_t rows, std::size_t in, const double* __restrict w,
                     std::size_t out, const double* __restrict dy, double* __restrict dx, double* __restrict dw,
                     double* __restrict db) {
  for (std::size_t t = 0; t < rows; ++t) {
    const double* dyt = dy + t * out;
    for (std::size_t o = 0; o < out; ++o) db[o] += dyt[o];
    const double* xt = x + t * in;
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = xt[i];
      double* dwi = dw + i * out;
      for (std::size_t o = 0; o < out; ++o) dwi[o] += xi * dyt[o];
      if (dx) dx[t * in + i] += dot(dyt, w + i * out, out);
    }
  }
}

void layernorm(const double* x, std::size_t rows, std::size_t d, const double* g, const double* b, double* y,
               double* mean_out, double* rstd_out) {
  for (std::size_t t = 0; t < rows; ++t) {
    const double* xt = x + t * d;
    double mean = 0.0;
    for (std::size_t i = 0; i < d; ++i) mean += xt[i];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) var += (xt[i] - mean) * (xt[i] - mean);
    var /= static_cast<double>(d);
    const double rstd = 1.0 / std::sqrt(var + kLnEps);
    double* yt = y + t * d;
    for (std::size_t i = 0; i < d; ++i) yt[i] = (xt[i] - mean) * rstd * g[i] + b[i];
    if (mean_out) mean_out[t] = mean;
    if (rstd_out) rstd_out[t] = rstd;
  }
}

// dx += LN backward; dg, db accumulated.
void layernorm_backward(const double* x, std::size_t rows, std::size_t d, const double* g, const double* mean,
                        const double* rstd, const double* dy, double* dx, double* dg, double* db) {
  for (std::size_t t = 0; t < rows; ++t) {
    const double* xt = x + t * d;
    const double* dyt = dy + t * d;
    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double xhat = (xt[i] - mean[t]) * rstd[t];
      const double dxhat = dyt[i] * g[i];
      mean_dxhat += dxhat;
      mean_dxhat_xhat += dxhat * xhat;
      dg[i] += dyt[i] * xhat;
      db[i] += dyt[i];
    }
    mean_dxhat /= static_cast<double>(d);
    mean_dxhat_xhat /= static_cast<double>(d);
    double* dxt = dx + t * d;
    for (std::size_t i = 0; i < d; ++i) {
      const double xhat = (xt[i] - mean[t]) * rstd[t];
      dxt[i] += rstd[t] * (dyt[i] * g[i] - mean_dxhat - xhat * mean_dxhat_xhat);
    }
  }
}

double gelu(double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + 0.044715 * x * x * x))); }

double gelu_grad(double x) {
  const double u = kGeluC * (x + 0.044715 * x * x * x);
  const double th = std::tanh(u);
  return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
}

struct LayerCache {
  Matrix x_in, ln1, qkv, att, x_mid, ln2, fc_pre, fc_act;
  std::vector<double> ln1_mean, ln1_rstd, ln2_mean, ln2_rstd;
  std::vector<double> probs;     // heads x T x T, softmax output
  std::vector<double> att_mult;  // dropout multipliers for probs (empty: none)
  std::vector<double> ffn_mult;  // dropout multipliers for GELU output (empty: none)
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  Matrix x_final, lnf;
  std::vector<double> lnf_mean, lnf_rstd;
};

void check_tokens(const Model& model, std::span<const TokenId> tokens) {
  if (tokens.empty()) throw std::invalid_argument("model: empty token sequence");
  if (tokens.size() > static_cast<std::size_t>(model.config.max_seq_len)) {
    throw std::invalid_argument("model: sequence length " + std::to_string(tokens.size()) + " exceeds max_seq_len " +
                                std::to_string(model.config.max_seq_len));
  }
  for (TokenId id : tokens) {
    if (id < 0 || id >= model.config.vocab_size) throw std::invalid_argument("model: token id " + std::to_string(id) + " out of range");
  }
}

void draw_dropout(std::vector<double>& mult, std::size_t n, double rate, Rng& rng) {
  mult.resize(n);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (auto& m : mult) m = rng.uniform() < rate ? 0.0 : keep_scale;
}

void run_forward(const Model& model, std::span<const TokenId> tokens, bool dropout_on, Rng* rng, ForwardCache& c) {
  const auto& cfg = model.config;
  const auto& L = model.layout;
  const double* P = model.params.data();
  const std::size_t T = tokens.size(), d = cfg.d_model, f = cfg.d_ff, H = cfg.n_heads, hd = d / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const double rate = cfg.dropout;
  dropout_on = dropout_on && rng != nullptr && rate > 0.0;

  Matrix x(T, d);
  for (std::size_t t = 0; t < T; ++t) {
    const double* te = P + L.wte + static_cast<std::size_t>(tokens[t]) * d;
    const double* pe = P + L.wpe + t * d;
    for (std::size_t i = 0; i < d; ++i) x(t, i) = te[i] + pe[i];
  }

  c.layers.resize(cfg.n_layers);
  for (int l = 0; l < cfg.n_layers; ++l) {
    const auto& s = L.layers[l];
    auto& lc = c.layers[l];
    lc.x_in = x;
    lc.ln1 = Matrix(T, d);
    lc.ln1_mean.resize(T);
    lc.ln1_rstd.resize(T);
    layernorm(lc.x_in.data.data(), T, d, P + s.ln1_g, P + s.ln1_b, lc.ln1.data.data(), lc.ln1_mean.data(),
              lc.ln1_rstd.data());
    lc.qkv = Matrix(T, 3 * d);
    linear(lc.ln1.data.data(), T, d, P + s.w_qkv, P + s.b_qkv, 3 * d, lc.qkv.data.data());

    lc.probs.assign(H * T * T, 0.0);
    if (dropout_on) {
      draw_dropout(lc.att_mult, H * T * T, rate, *rng);
    } else {
      lc.att_mult.clear();
    }
    lc.att = Matrix(T, d);
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t t = 0; t < T; ++t) {
        const double* q = lc.qkv.ptr(t, h * hd);
        double* pr = lc.probs.data() + (h * T + t) * T;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t u = 0; u <= t; ++u) {
          const double* k = lc.qkv.ptr(u, d + h * hd);
          pr[u] = dot(q, k, hd) * scale;
          mx = std::max(mx, pr[u]);
        }
        double sum = 0.0;
        for (std::size_t u = 0; u <= t; ++u) {
          pr[u] = std::exp(pr[u] - mx);
          sum += pr[u];
        }
        for (std::size_t u = 0; u <= t; ++u) pr[u] /= sum;
        double* o = &lc.att(t, h * hd);
        const double* mult = dropout_on ? lc.att_mult.data() + (h * T + t) * T : nullptr;
        for (std::size_t u = 0; u <= t; ++u) {
          const double w = mult ? pr[u] * mult[u] : pr[u];
          if (w == 0.0) continue;
          const double* v = lc.qkv.ptr(u, 2 * d + h * hd);
          for (std::size_t i = 0; i < hd; ++i) o[i] += w * v[i];
        }
      }
    }
    lc.x_mid = lc.x_in;
    {
      Matrix proj(T, d);
      linear(lc.att.data.data(), T, d, P + s.w_proj, P + s.b_proj, d, proj.data.data());
      for (std::size_t i = 0; i < T * d; ++i) lc.x_mid.data[i] += proj.data[i];
    }

    lc.ln2 = Matrix(T, d);
    lc.ln2_mean.resize(T);
    lc.ln2_rstd.resize(T);
    layernorm(lc.x_mid.data.data(), T, d, P + s.ln2_g, P + s.ln2_b, lc.ln2.data.data(), lc.ln2_mean.data(),
              lc.ln2_rstd.data());
    lc.fc_pre = Matrix(T, f);
    linear(lc.ln2.data.data(), T, d, P + s.w_fc, P + s.b_fc, f, lc.fc_pre.data.data());
    if (dropout_on) {
      draw_dropout(lc.ffn_mult, T * f, rate, *rng);
    } else {
      lc.ffn_mult.clear();
    }
    lc.fc_act = Matrix(T, f);
    for (std::size_t i = 0; i < T * f; ++i) {
      lc.fc_act.data[i] = gelu(lc.fc_pre.data[i]) * (dropout_on ? lc.ffn_mult[i] : 1.0);
    }
    x = lc.x_mid;
    {
      Matrix mlp(T, d);
      linear(lc.fc_act.data.data(), T, f, P + s.w_out, P + s.b_out, d, mlp.data.data());
      for (std::size_t i = 0; i < T * d; ++i) x.data[i] += mlp.data[i];
    }
  }

  c.x_final = std::move(x);
  c.lnf = Matrix(T, d);
  c.lnf_mean.resize(T);
  c.lnf_rstd.resize(T);
  layernorm(c.x_final.data.data(), T, d, P + L.lnf_g, P + L.lnf_b, c.lnf.data.data(), c.lnf_mean.data(),
            c.lnf_rstd.data());
}

}  // namespace

ForwardResult forward(const Model& model, std::span<const TokenId> tokens, bool train_mode, Rng* rng) {
  check_tokens(model, tokens);
  ForwardCache cache;
  run_forward(model, tokens, train_mode, rng, cache);
  const std::size_t T = tokens.size(), d = model.config.d_model, V = model.config.vocab_size;
  ForwardResult out;
  out.logits = Matrix(T, V);
  linear(cache.lnf.data.data(), T, d, model.params.data() + model.layout.w_head,
         model.params.data() + model.layout.b_head, V, out.logits.data.data());
  out.hidden = std::move(cache.lnf);
  return out;
}

LossAndGrads loss_and_grads(const Model& model, std::span<const TokenId> tokens,
                            std::span<const unsigned char> loss_mask, bool train_mode, Rng* rng, bool want_grads) {
  check_tokens(model, tokens);
  if (loss_mask.size() != tokens.size()) throw std::invalid_argument("loss: mask length differs from token length");
  if (loss_mask[0]) throw std::invalid_argument("loss: position 0 has no context and cannot be a target");
  std::vector<std::size_t> targets;
  for (std::size_t t = 1; t < tokens.size(); ++t) {
    if (loss_mask[t]) targets.push_back(t);
  }
  if (targets.empty()) throw std::invalid_argument("loss: mask selects no target positions");

  const auto& cfg = model.config;
  const auto& L = model.layout;
  const double* P = model.params.data();
  const std::size_t T = tokens.size(), d = cfg.d_model, f = cfg.d_ff, H = cfg.n_heads, hd = d / H, V = cfg.vocab_size;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  ForwardCache c;
  run_forward(model, tokens, train_mode, rng, c);

  LossAndGrads out;
  out.n_targets = static_cast<int>(targets.size());
  if (want_grads) out.grads.assign(L.total, 0.0);
  double* G = want_grads ? out.grads.data() : nullptr;
  const double inv_n = 1.0 / static_cast<double>(targets.size());

  Matrix dlnf(T, d);
  std::vector<double> logits(V);
  for (std::size_t t : targets) {
    const std::size_t r = t - 1;
    linear(&c.lnf(r, 0), 1, d, P + L.w_head, P + L.b_head, V, logits.data());
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double& z : logits) {
      z = std::exp(z - mx);
      sum += z;
    }
    const auto target = static_cast<std::size_t>(tokens[t]);
    out.nll_sum += -(std::log(logits[target] / sum));
    if (!G) continue;
    for (double& z : logits) z = z / sum * inv_n;
    logits[target] -= inv_n;
    linear_backward(&c.lnf(r, 0), 1, d, P + L.w_head, V, logits.data(), &dlnf(r, 0), G + L.w_head, G + L.b_head);
  }
  out.loss = out.nll_sum * inv_n;
  if (!G) return out;

  Matrix dx(T, d);
  layernorm_backward(c.x_final.data.data(), T, d, P + L.lnf_g, c.lnf_mean.data(), c.lnf_rstd.data(), dlnf.data.data(),
                     dx.data.data(), G + L.lnf_g, G + L.lnf_b);

  for (int l = cfg.n_layers - 1; l >= 0; --l) {
    const auto& s = L.layers[l];
    const auto& lc = c.layers[l];
    const bool drop = !lc.att_mult.empty();

    // MLP branch: x_out = x_mid + W_out(act) ; dx currently holds d x_out.
    Matrix dact(T, f);
    linear_backward(lc.fc_act.data.data(), T, f, P + s.w_out, d, dx.data.data(), dact.data.data(), G + s.w_out,
                    G + s.b_out);
    Matrix dpre(T, f);
    for (std::size_t i = 0; i < T * f; ++i) {
      const double m = lc.ffn_mult.empty() ? 1.0 : lc.ffn_mult[i];
      dpre.data[i] = dact.data[i] * m * gelu_grad(lc.fc_pre.data[i]);
    }
    Matrix dln2(T, d);
    linear_backward(lc.ln2.data.data(), T, d, P + s.w_fc, f, dpre.data.data(), dln2.data.data(), G + s.w_fc,
                    G + s.b_fc);
    layernorm_backward(lc.x_mid.data.data(), T, d, P + s.ln2_g, lc.ln2_mean.data(), lc.ln2_rstd.data(),
                       dln2.data.data(), dx.data.data(), G + s.ln2_g, G + s.ln2_b);

    // Attention branch: x_mid = x_in + W_proj(att); dx now holds d x_mid.
    Matrix datt(T, d);
    linear_backward(lc.att.data.data(), T, d, P + s.w_proj, d, dx.data.data(), datt.data.data(), G + s.w_proj,
                    G + s.b_proj);
    Matrix dqkv(T, 3 * d);
    std::vector<double> dp(T);
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t t = 0; t < T; ++t) {
        const double* pr = lc.probs.data() + (h * T + t) * T;
        const double* mult = drop ? lc.att_mult.data() + (h * T + t) * T : nullptr;
        const double* dout = &datt(t, h * hd);
        double dot_sum = 0.0;
        for (std::size_t u = 0; u <= t; ++u) {
          const double* v = lc.qkv.ptr(u, 2 * d + h * hd);
          double* dv = &dqkv(u, 2 * d + h * hd);
          const double w = mult ? pr[u] * mult[u] : pr[u];
          for (std::size_t i = 0; i < hd; ++i) dv[i] += w * dout[i];
          const double g = dot(dout, v, hd);
          dp[u] = mult ? g * mult[u] : g;
          dot_sum += pr[u] * dp[u];
        }
        const double* q = lc.qkv.ptr(t, h * hd);
        double* dq = &dqkv(t, h * hd);
        for (std::size_t u = 0; u <= t; ++u) {
          const double ds = pr[u] * (dp[u] - dot_sum) * scale;
          if (ds == 0.0) continue;
          const double* k = lc.qkv.ptr(u, d + h * hd);
          double* dk = &dqkv(u, d + h * hd);
          for (std::size_t i = 0; i < hd; ++i) {
            dq[i] += ds * k[i];
            dk[i] += ds * q[i];
          }
        }
      }
    }
    Matrix dln1(T, d);
    linear_backward(lc.ln1.data.data(), T, d, P + s.w_qkv, 3 * d, dqkv.data.data(), dln1.data.data(), G + s.w_qkv,
                    G + s.b_qkv);
    layernorm_backward(lc.x_in.data.data(), T, d, P + s.ln1_g, lc.ln1_mean.data(), lc.ln1_rstd.data(),
                       dln1.data.data(), dx.data.data(), G + s.ln1_g, G + s.ln1_b);
  }

  for (std::size_t t = 0; t < T; ++t) {
    double* gte = G + L.wte + static_cast<std::size_t>(tokens[t]) * d;
    double* gpe = G + L.wpe + t * d;
    for (std::size_t i = 0; i < d; ++i) {
      gte[i] += dx(t, i);
      gpe[i] += dx(t, i);
    }
  }
  return out;
}

double adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam: parameter and gradient sizes differ");
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("adam: optimizer state size differs from parameters");
  }
  double sq = 0.0;
  for (double g : grads) {
    if (!std::isfinite(g)) throw std::invalid_argument("adam: non-finite gradient");
    sq += g * g;
  }
  const double norm = std::sqrt(sq);
  const double clip = (cfg.grad_clip_norm > 0.0 && norm > cfg.grad_clip_norm) ? cfg.grad_clip_norm / norm : 1.0;

  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i] * clip;
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps);
  }
  return norm;
}

DecodeSession::DecodeSession(const Model& model) : model_(model) {
  const auto& cfg = model.config;
  keys_.assign(cfg.n_layers, Matrix(cfg.max_seq_len, cfg.d_model));
  values_.assign(cfg.n_layers, Matrix(cfg.max_seq_len, cfg.d_model));
  logits_.resize(cfg.vocab_size);
}

std::span<const double> DecodeSession::push(TokenId token) {
  const auto& cfg = model_.config;
  const auto& L = model_.layout;
  const double* P = model_.params.data();
  if (pos_ >= static_cast<std::size_t>(cfg.max_seq_len)) throw std::length_error("decode: max_seq_len reached");
  if (token < 0 || token >= cfg.vocab_size) throw std::invalid_argument("decode: token out of range");
  const std::size_t d = cfg.d_model, f = cfg.d_ff, H = cfg.n_heads, hd = d / H, t = pos_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  std::vector<double> x(d), ln(d), qkv(3 * d), att(d), tmp(d), fc(f), probs(t + 1);
  for (std::size_t i = 0; i < d; ++i) x[i] = P[L.wte + static_cast<std::size_t>(token) * d + i] + P[L.wpe + t * d + i];
  for (int l = 0; l < cfg.n_layers; ++l) {
    const auto& s = L.layers[l];
    layernorm(x.data(), 1, d, P + s.ln1_g, P + s.ln1_b, ln.data(), nullptr, nullptr);
    linear(ln.data(), 1, d, P + s.w_qkv, P + s.b_qkv, 3 * d, qkv.data());
    std::copy(qkv.begin() + d, qkv.begin() + 2 * d, keys_[l].row(t).begin());
    std::copy(qkv.begin() + 2 * d, qkv.end(), values_[l].row(t).begin());
    std::fill(att.begin(), att.end(), 0.0);
    for (std::size_t h = 0; h < H; ++h) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t u = 0; u <= t; ++u) {
        const double* k = keys_[l].ptr(u, h * hd);
        probs[u] = dot(qkv.data() + h * hd, k, hd) * scale;
        mx = std::max(mx, probs[u]);
      }
      double sum = 0.0;
      for (std::size_t u = 0; u <= t; ++u) {
        probs[u] = std::exp(probs[u] - mx);
        sum += probs[u];
      }
      for (std::size_t u = 0; u <= t; ++u) {
        const double w = probs[u] / sum;
        const double* v = values_[l].ptr(u, h * hd);
        for (std::size_t i = 0; i < hd; ++i) att[h * hd + i] += w * v[i];
      }
    }
    linear(att.data(), 1, d, P + s.w_proj, P + s.b_proj, d, tmp.data());
    for (std::size_t i = 0; i < d; ++i) x[i] += tmp[i];
    layernorm(x.data(), 1, d, P + s.ln2_g, P + s.ln2_b, ln.data(), nullptr, nullptr);
    linear(ln.data(), 1, d, P + s.w_fc, P + s.b_fc, f, fc.data());
    for (double& v : fc) v = gelu(v);
    linear(fc.data(), 1, f, P + s.w_out, P + s.b_out, d, tmp.data());
    for (std::size_t i = 0; i < d; ++i) x[i] += tmp[i];
  }
  layernorm(x.data(), 1, d, P + L.lnf_g, P + L.lnf_b, ln.data(), nullptr, nullptr);
  linear(ln.data(), 1, d, P + L.w_head, P + L.b_head, cfg.vocab_size, logits_.data());
  ++pos_;
  return logits_;
}

DecodeResult greedy_decode(const Model& model, std::span<const TokenId> prompt, int max_new_tokens,
                           const JointVocab& vocab) {
  if (prompt.empty()) throw std::invalid_argument("decode: empty prompt");
  if (max_new_tokens < 1) throw std::invalid_argument("decode: max_new_tokens must be >= 1");
  check_tokens(model, prompt);
  DecodeSession session(model);
  std::span<const double> logits;
  for (TokenId id : prompt) logits = session.push(id);

  DecodeResult out;
  const TokenId eos = vocab.special(Special::kEos);
  const auto max_pos = static_cast<std::size_t>(model.config.max_seq_len);
  while (true) {
    const auto best = static_cast<TokenId>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    out.tokens.push_back(best);
    if (best == eos) {
      out.hit_eos = true;
      break;
    }
    if (static_cast<int>(out.tokens.size()) >= max_new_tokens || session.position() >= max_pos) {
      out.truncated = true;
      break;
    }
    logits = session.push(best);
  }
  return out;
}

}  // namespace ilt
