#pragma once

#include <string>

#include "fdcnet/nn.hpp"
#include "fdcnet/params.hpp"

namespace fdcnet::denoiser {

inline constexpr std::size_t kKernel = 7;
inline constexpr std::size_t kPadding = 3;
inline constexpr double kBatchNormEps = 1e-5;

// "<prefix>.dec.0" transposed conv d->d, "<prefix>.dec.bn", then
// "<prefix>.dec.1" transposed conv d->C. The last layer starts at zero, so a
// fresh model reproduces its input.
void init_decoder(ParamStore& store, const std::string& prefix, std::size_t d_model, std::size_t channels,
                  std::uint64_t seed);

// f_dec: [B x T x d] latent -> [B x C x T]. Train mode updates the batch-norm
// running statistics held in `store`.
Tensor decoder_output(const Tensor& h_den, ParamStore& store, const std::string& prefix, const nn::Mode& mode);

// x_hat = f_dec(h_den) + x_noisy
Tensor reconstruct(const Tensor& h_den, const Tensor& x_noisy, ParamStore& store, const std::string& prefix,
                   const nn::Mode& mode);

// Mean squared error.
Tensor denoise_loss(const Tensor& x_clean, const Tensor& x_hat);

}  // namespace fdcnet::denoiser
