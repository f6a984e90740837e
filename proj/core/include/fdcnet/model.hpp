#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "fdcnet/classifier.hpp"
#include "fdcnet/eegsp.hpp"
#include "fdcnet/feedback.hpp"
#include "fdcnet/nn.hpp"
#include "fdcnet/params.hpp"

namespace fdcnet {

struct ModelConfig {
  std::size_t channels = 32;
  std::size_t d_model = 128;
  std::size_t n_layers = 2;
  std::size_t n_heads = 8;
  std::size_t freq_heads = 4;
  std::size_t ff_dim = 256;
  std::size_t gate_reduction = 4;
  std::size_t cls_hidden = 64;
  std::size_t t_fb = 2;
  std::size_t max_positions = 1024;
  double dropout = 0.1;
  bool post_norm = true;
  bool no_feedback = false;  // drop the classification -> denoising gate
  bool no_cross = false;     // drop the denoising -> classification injection
  bool no_eegsp = false;     // no channel gate, fixed PE, time heads only

  static ModelConfig full();
  // d_model 32, 1 layer, 4 heads, 8 channels.
  static ModelConfig desk();

  void validate() const;
  eegsp::EncoderConfig encoder() const;
  feedback::Options feedback() const;
};

class FdcNet {
 public:
  FdcNet(const ModelConfig& cfg, std::uint64_t seed);

  struct Output {
    Tensor x_hat;  // [B x C x T]
    Tensor h_den;  // final denoising latent [B x T x D]
    Tensor h_cls;  // final classification latent [B x T x D]
    classifier::Prediction pred;
  };

  // x_noisy [B x C x T].
  Output forward(const Tensor& x_noisy, const nn::Mode& mode);

  // Single-task paths without any cross-path exchange.
  Tensor shared_stem(const Tensor& x_noisy);
  Output denoise_only(const Tensor& x_noisy, const nn::Mode& mode);
  classifier::Prediction classify_only(const Tensor& x_noisy);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }

  // Parameters, buffers and "meta.*" config records.
  std::map<std::string, Tensor> records() const;
  static FdcNet from_records(const std::map<std::string, Tensor>& records);
  void save(const std::filesystem::path& file) const;
  static FdcNet load(const std::filesystem::path& file);

 private:
  Tensor encode(const Tensor& stem, const nn::Mode& mode);

  ModelConfig cfg_;
  ParamStore store_;
};

}  // namespace fdcnet
