#pragma once

#include <string>

#include "fdcnet/nn.hpp"
#include "fdcnet/params.hpp"
#include "fdcnet/tensor.hpp"

// EEG-specific transformer encoder: band-limited positional encoding,
// channel gating and mixed time/frequency attention heads.
namespace fdcnet::eegsp {

// Bands k = 4..45 Hz.
inline constexpr std::size_t kFirstBand = 4;
inline constexpr std::size_t kBandCount = 42;

// Fixed sinusoid table [pos_count x d_model]: column 2i holds
// sin(pos / 10000^(2i/d_model)), column 2i+1 the matching cos.
Tensor sinusoid_table(std::size_t pos_count, std::size_t d_model);

// sum_k softmax(alpha_logits)_k / sqrt(k), as a [1] tensor on the tape.
Tensor pe_envelope(const Tensor& alpha_logits);

// envelope(alpha) * sinusoid_table. Throws ShapeError if pos_count > max_positions.
Tensor band_limited_pe(const Tensor& alpha_logits, std::size_t pos_count, std::size_t d_model,
                       std::size_t max_positions);

// [B x C x T] -> [B x C], temporal mean.
Tensor channel_stats(const Tensor& x);

// sigmoid(W2 relu(W1 z + b1) + b2). w1 [C/r x C], w2 [C x C/r].
Tensor channel_gate_weights(const Tensor& z, const Tensor& w1, const Tensor& b1, const Tensor& w2,
                            const Tensor& b2);

// x [B x C x T] scaled per channel by alpha [B x C].
Tensor modulate(const Tensor& x, const Tensor& alpha);

// softmax(Q K^T / sqrt(d_h)), [B x T x T].
Tensor attention_weights(const Tensor& q, const Tensor& k);

Tensor attention_head_time(const Tensor& q, const Tensor& k, const Tensor& v);

// idct(attention(dct Q, dct K, dct V)) with the transforms along T. A non-null
// `forced_weights` [B x T x T] replaces the softmax weights.
Tensor attention_head_freq(const Tensor& q, const Tensor& k, const Tensor& v,
                           const Tensor* forced_weights = nullptr);

struct EncoderConfig {
  std::size_t d_model = 128;
  std::size_t n_layers = 2;
  std::size_t n_heads = 8;
  std::size_t freq_heads = 4;  // the remaining heads attend in time
  std::size_t ff_dim = 256;
  double dropout = 0.1;
  bool post_norm = true;
  bool band_pe = true;  // false: fixed sinusoid table
  std::size_t max_positions = 1024;

  void validate() const;
};

// Registers "<prefix>.pe.alpha_logits" (when band_pe) and
// "<prefix>.layers.N.*".
void init_encoder(ParamStore& store, const std::string& prefix, const EncoderConfig& cfg, std::uint64_t seed);

Tensor encoder_layer(const Tensor& x, const ParamStore& store, const std::string& prefix, const EncoderConfig& cfg,
                     const nn::Mode& mode);

// x_emb [B x T x d_model] -> same shape: add positional encoding, then the
// layer stack.
Tensor encoder_forward(const Tensor& x_emb, const ParamStore& store, const std::string& prefix,
                       const EncoderConfig& cfg, const nn::Mode& mode);

// Registers "<prefix>.gate.l1.{w,b}" [C/r x C] and "<prefix>.gate.l2.{w,b}" [C x C/r].
void init_gate(ParamStore& store, const std::string& prefix, std::size_t channels, std::size_t reduction,
               std::uint64_t seed);

// channel_stats -> channel_gate_weights -> modulate on a raw [B x C x T] batch.
Tensor apply_gate(const Tensor& x, const ParamStore& store, const std::string& prefix);

}  // namespace fdcnet::eegsp
