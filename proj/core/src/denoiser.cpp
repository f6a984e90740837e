#include "fdcnet/denoiser.hpp"

#include <cmath>

#include "fdcnet/ops.hpp"

namespace fdcnet::denoiser {

using namespace fdcnet::ops;

void init_decoder(ParamStore& store, const std::string& prefix, std::size_t d_model, std::size_t channels,
                  std::uint64_t seed) {
  const auto p = prefix + ".dec";
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_model * kKernel));
  store.add(p + ".0.w", nn::uniform({d_model, d_model, kKernel}, bound, nn::path_seed(seed, p + ".0.w")));
  store.add(p + ".0.b", nn::uniform({d_model}, bound, nn::path_seed(seed, p + ".0.b")));
  store.add(p + ".bn.gamma", Tensor::full({d_model}, 1.0));
  store.add(p + ".bn.beta", Tensor::zeros({d_model}));
  store.add_buffer(p + ".bn.running_mean", Tensor::zeros({d_model}));
  store.add_buffer(p + ".bn.running_var", Tensor::full({d_model}, 1.0));
  store.add(p + ".1.w", Tensor::zeros({d_model, channels, kKernel}));
  store.add(p + ".1.b", Tensor::zeros({channels}));
}

Tensor decoder_output(const Tensor& h_den, ParamStore& store, const std::string& prefix, const nn::Mode& mode) {
  const auto p = prefix + ".dec";
  auto h = conv1d_transposed(swap_last2(h_den), store.get(p + ".0.w"), &store.get(p + ".0.b"), 1, kPadding);
  BatchNormState bn{store.buffers().at(p + ".bn.running_mean"), store.buffers().at(p + ".bn.running_var")};
  h = gelu(batch_norm(h, store.get(p + ".bn.gamma"), store.get(p + ".bn.beta"), bn, kBatchNormEps, mode.train));
  return conv1d_transposed(h, store.get(p + ".1.w"), &store.get(p + ".1.b"), 1, kPadding);
}

Tensor reconstruct(const Tensor& h_den, const Tensor& x_noisy, ParamStore& store, const std::string& prefix,
                   const nn::Mode& mode) {
  auto out = decoder_output(h_den, store, prefix, mode);
  if (out.shape() != x_noisy.shape())
    throw ShapeError("decoder produced " + shape_str(out.shape()) + " for input " + shape_str(x_noisy.shape()));
  return add(out, x_noisy);
}

Tensor denoise_loss(const Tensor& x_clean, const Tensor& x_hat) { return mse_loss(x_hat, x_clean); }

}  // namespace fdcnet::denoiser
