#include "fdcnet/eegsp.hpp"

#include <cmath>

#include "fdcnet/ops.hpp"

namespace fdcnet::eegsp {

using namespace fdcnet::ops;

Tensor sinusoid_table(std::size_t pos_count, std::size_t d_model) {
  if (pos_count == 0 || d_model == 0) throw ShapeError("sinusoid_table needs positive sizes");
  std::vector<double> v(pos_count * d_model);
  for (std::size_t pos = 0; pos < pos_count; ++pos)
    for (std::size_t j = 0; j < d_model; ++j) {
      const double i2 = static_cast<double>(j - j % 2);
      const double arg = static_cast<double>(pos) / std::pow(10000.0, i2 / static_cast<double>(d_model));
      v[pos * d_model + j] = j % 2 == 0 ? std::sin(arg) : std::cos(arg);
    }
  return Tensor({pos_count, d_model}, std::move(v));
}

Tensor pe_envelope(const Tensor& alpha_logits) {
  if (alpha_logits.shape() != Shape{kBandCount})
    throw ShapeError("alpha_logits must be [" + std::to_string(kBandCount) + "], got " +
                     shape_str(alpha_logits.shape()));
  std::vector<double> inv_sqrt(kBandCount);
  for (std::size_t i = 0; i < kBandCount; ++i) inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(kFirstBand + i));
  return sum_all(mul(softmax_last(alpha_logits), Tensor({kBandCount}, std::move(inv_sqrt))));
}

Tensor band_limited_pe(const Tensor& alpha_logits, std::size_t pos_count, std::size_t d_model,
                       std::size_t max_positions) {
  if (pos_count > max_positions)
    throw ShapeError("positional encoding for " + std::to_string(pos_count) + " positions exceeds T_max=" +
                     std::to_string(max_positions));
  auto env = expand(reshape(pe_envelope(alpha_logits), {1, 1}), {pos_count, d_model});
  return mul(env, sinusoid_table(pos_count, d_model));
}

Tensor channel_stats(const Tensor& x) {
  if (x.ndim() != 3) throw ShapeError("channel_stats expects [B x C x T], got " + shape_str(x.shape()));
  return mean_axis(x, 2);
}

Tensor channel_gate_weights(const Tensor& z, const Tensor& w1, const Tensor& b1, const Tensor& w2,
                            const Tensor& b2) {
  if (z.ndim() != 2) throw ShapeError("channel_gate_weights expects [B x C], got " + shape_str(z.shape()));
  return sigmoid(linear(relu(linear(z, w1, &b1)), w2, &b2));
}

Tensor modulate(const Tensor& x, const Tensor& alpha) {
  if (x.ndim() != 3 || alpha.shape() != Shape{x.dim(0), x.dim(1)})
    throw ShapeError("modulate: x " + shape_str(x.shape()) + " vs alpha " + shape_str(alpha.shape()));
  return mul(x, expand(reshape(alpha, {x.dim(0), x.dim(1), 1}), x.shape()));
}

namespace {

void require_qkv(const char* op, const Tensor& q, const Tensor& k, const Tensor& v) {
  if (q.ndim() != 3 || q.shape() != k.shape() || q.shape() != v.shape())
    throw ShapeError(std::string(op) + ": Q " + shape_str(q.shape()) + ", K " + shape_str(k.shape()) + ", V " +
                     shape_str(v.shape()));
}

}  // namespace

Tensor attention_weights(const Tensor& q, const Tensor& k) {
  const double inv = 1.0 / std::sqrt(static_cast<double>(q.shape().back()));
  return softmax_last(scale(bmm(q, k, true), inv));
}

Tensor attention_head_time(const Tensor& q, const Tensor& k, const Tensor& v) {
  require_qkv("attention_head_time", q, k, v);
  return bmm(attention_weights(q, k), v);
}

Tensor attention_head_freq(const Tensor& q, const Tensor& k, const Tensor& v, const Tensor* forced_weights) {
  require_qkv("attention_head_freq", q, k, v);
  auto vf = dct_forward(v, 1);
  Tensor a;
  if (forced_weights) {
    if (forced_weights->shape() != Shape{q.dim(0), q.dim(1), q.dim(1)})
      throw ShapeError("attention_head_freq: forced weights " + shape_str(forced_weights->shape()));
    a = *forced_weights;
  } else {
    a = attention_weights(dct_forward(q, 1), dct_forward(k, 1));
  }
  return dct_inverse(bmm(a, vf), 1);
}

void EncoderConfig::validate() const {
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0)
    throw ConfigError("d_model (" + std::to_string(d_model) + ") must be a positive multiple of n_heads (" +
                      std::to_string(n_heads) + ")");
  if (freq_heads > n_heads) throw ConfigError("freq_heads cannot exceed n_heads");
  if (n_layers == 0) throw ConfigError("n_layers must be >= 1");
  if (ff_dim == 0) throw ConfigError("ff_dim must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
}

namespace {

void add_linear(ParamStore& store, const std::string& path, std::size_t out, std::size_t in, std::uint64_t seed) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  store.add(path + ".w", nn::uniform({out, in}, bound, nn::path_seed(seed, path + ".w")));
  store.add(path + ".b", nn::uniform({out}, bound, nn::path_seed(seed, path + ".b")));
}

}  // namespace

void init_encoder(ParamStore& store, const std::string& prefix, const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (cfg.band_pe) store.add(prefix + ".pe.alpha_logits", Tensor::zeros({kBandCount}));
  const auto D = cfg.d_model;
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const auto p = prefix + ".layers." + std::to_string(l);
    const double bound = 1.0 / std::sqrt(static_cast<double>(D));
    for (const char* name : {"q", "k", "v", "o"}) {
      store.add(p + ".attn.w" + name, nn::uniform({D, D}, bound, nn::path_seed(seed, p + ".attn.w" + name)));
      store.add(p + ".attn.b" + name, nn::uniform({D}, bound, nn::path_seed(seed, p + ".attn.b" + name)));
    }
    for (const char* ln : {".ln1", ".ln2"}) {
      store.add(p + ln + ".gamma", Tensor::full({D}, 1.0));
      store.add(p + ln + ".beta", Tensor::zeros({D}));
    }
    const double b1 = 1.0 / std::sqrt(static_cast<double>(D));
    const double b2 = 1.0 / std::sqrt(static_cast<double>(cfg.ff_dim));
    store.add(p + ".ff.w1", nn::uniform({cfg.ff_dim, D}, b1, nn::path_seed(seed, p + ".ff.w1")));
    store.add(p + ".ff.b1", nn::uniform({cfg.ff_dim}, b1, nn::path_seed(seed, p + ".ff.b1")));
    store.add(p + ".ff.w2", nn::uniform({D, cfg.ff_dim}, b2, nn::path_seed(seed, p + ".ff.w2")));
    store.add(p + ".ff.b2", nn::uniform({D}, b2, nn::path_seed(seed, p + ".ff.b2")));
  }
}

namespace {

Tensor multi_head(const Tensor& x, const ParamStore& store, const std::string& p, const EncoderConfig& cfg) {
  auto q = linear(x, store.get(p + ".wq"), &store.get(p + ".bq"));
  auto k = linear(x, store.get(p + ".wk"), &store.get(p + ".bk"));
  auto v = linear(x, store.get(p + ".wv"), &store.get(p + ".bv"));
  const auto dh = cfg.d_model / cfg.n_heads;
  const auto time_heads = cfg.band_pe ? cfg.n_heads - cfg.freq_heads : cfg.n_heads;
  std::vector<Tensor> heads;
  heads.reserve(cfg.n_heads);
  for (std::size_t h = 0; h < time_heads; ++h)
    heads.push_back(attention_head_time(slice_last(q, h * dh, dh), slice_last(k, h * dh, dh), slice_last(v, h * dh, dh)));
  if (time_heads < cfg.n_heads) {
    // Same as attention_head_freq per head; the transforms along T are shared
    // by all frequency heads.
    const auto f0 = time_heads * dh, fw = cfg.d_model - f0;
    auto qf = dct_forward(slice_last(q, f0, fw), 1);
    auto kf = dct_forward(slice_last(k, f0, fw), 1);
    auto vf = dct_forward(slice_last(v, f0, fw), 1);
    std::vector<Tensor> coeffs;
    for (std::size_t h = 0; h < cfg.n_heads - time_heads; ++h) {
      auto a = attention_weights(slice_last(qf, h * dh, dh), slice_last(kf, h * dh, dh));
      coeffs.push_back(bmm(a, slice_last(vf, h * dh, dh)));
    }
    heads.push_back(dct_inverse(coeffs.size() == 1 ? coeffs.front() : concat_last(coeffs), 1));
  }
  return linear(heads.size() == 1 ? heads.front() : concat_last(heads), store.get(p + ".wo"), &store.get(p + ".bo"));
}

Tensor feed_forward(const Tensor& x, const ParamStore& store, const std::string& p) {
  return linear(gelu(linear(x, store.get(p + ".w1"), &store.get(p + ".b1"))), store.get(p + ".w2"),
                &store.get(p + ".b2"));
}

Tensor norm(const Tensor& x, const ParamStore& store, const std::string& p) {
  return layer_norm(x, store.get(p + ".gamma"), store.get(p + ".beta"));
}

Tensor drop(const Tensor& x, const EncoderConfig& cfg, const nn::Mode& mode) {
  if (!mode.train || cfg.dropout == 0.0) return x;
  if (!mode.rng) throw ContractError("dropout in train mode needs an rng");
  return dropout(x, cfg.dropout, true, *mode.rng);
}

}  // namespace

Tensor encoder_layer(const Tensor& x, const ParamStore& store, const std::string& prefix, const EncoderConfig& cfg,
                     const nn::Mode& mode) {
  if (cfg.post_norm) {
    auto h = norm(add(x, drop(multi_head(x, store, prefix + ".attn", cfg), cfg, mode)), store, prefix + ".ln1");
    return norm(add(h, drop(feed_forward(h, store, prefix + ".ff"), cfg, mode)), store, prefix + ".ln2");
  }
  auto h = add(x, drop(multi_head(norm(x, store, prefix + ".ln1"), store, prefix + ".attn", cfg), cfg, mode));
  return add(h, drop(feed_forward(norm(h, store, prefix + ".ln2"), store, prefix + ".ff"), cfg, mode));
}

Tensor encoder_forward(const Tensor& x_emb, const ParamStore& store, const std::string& prefix,
                       const EncoderConfig& cfg, const nn::Mode& mode) {
  if (x_emb.ndim() != 3 || x_emb.dim(2) != cfg.d_model)
    throw ShapeError("encoder expects [B x T x " + std::to_string(cfg.d_model) + "], got " +
                     shape_str(x_emb.shape()));
  const auto B = x_emb.dim(0), T = x_emb.dim(1), D = cfg.d_model;
  Tensor pe;
  if (cfg.band_pe) {
    pe = band_limited_pe(store.get(prefix + ".pe.alpha_logits"), T, D, cfg.max_positions);
  } else {
    if (T > cfg.max_positions) throw ShapeError("sequence length exceeds T_max");
    pe = sinusoid_table(T, D);
  }
  auto h = drop(add(x_emb, expand(reshape(pe, {1, T, D}), {B, T, D})), cfg, mode);
  for (std::size_t l = 0; l < cfg.n_layers; ++l)
    h = encoder_layer(h, store, prefix + ".layers." + std::to_string(l), cfg, mode);
  return h;
}

void init_gate(ParamStore& store, const std::string& prefix, std::size_t channels, std::size_t reduction,
               std::uint64_t seed) {
  if (reduction == 0 || channels % reduction != 0 || channels / reduction == 0)
    throw ConfigError("gate reduction " + std::to_string(reduction) + " must divide the channel count " +
                      std::to_string(channels));
  add_linear(store, prefix + ".gate.l1", channels / reduction, channels, seed);
  add_linear(store, prefix + ".gate.l2", channels, channels / reduction, seed);
}

Tensor apply_gate(const Tensor& x, const ParamStore& store, const std::string& prefix) {
  const auto p = prefix + ".gate";
  auto alpha = channel_gate_weights(channel_stats(x), store.get(p + ".l1.w"), store.get(p + ".l1.b"),
                                    store.get(p + ".l2.w"), store.get(p + ".l2.b"));
  return modulate(x, alpha);
}

}  // namespace fdcnet::eegsp
