#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "fdcnet/rng.hpp"
#include "fdcnet/tensor.hpp"

// Differentiable kernels. Every op records a tape node when an input requires
// grad (and recording is enabled). Shapes are validated up front and reported
// with ShapeError.
namespace fdcnet::ops {

// --- shape plumbing -------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape);

// Broadcasts `x` to `target`; ranks must match and every dim of x must be
// 1 or equal to the target dim.
Tensor expand(const Tensor& x, const Shape& target);

// [A x B x C] -> [A x C x B]
Tensor swap_last2(const Tensor& x);

// Columns [start, start + len) of the last axis.
Tensor slice_last(const Tensor& x, std::size_t start, std::size_t len);
Tensor concat_last(const std::vector<Tensor>& parts);

// --- elementwise ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);

enum class Activation { sigmoid, relu, gelu, softmax };

// "sigmoid" | "relu" | "gelu" | "softmax"; anything else is a ConfigError.
Activation parse_activation(std::string_view kind);
Tensor activation(const Tensor& x, Activation kind);

Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
// Exact erf form: x * Phi(x).
Tensor gelu(const Tensor& x);
// Row-wise over the last axis.
Tensor softmax_last(const Tensor& x);

// --- reductions -------------------------------------------------------------

Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
// Mean over one axis; the axis is removed from the shape.
Tensor mean_axis(const Tensor& x, std::size_t axis);

// --- linear algebra ---------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);

// Batched product of [B x m x k] and [B x k x n]; with transpose_b the second
// operand is [B x n x k].
Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b = false);

// y = x W^T + b over the last axis. w is [out x in], bias [out] or null.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor* bias = nullptr);

// --- convolution ------------------------------------------------------------

// Cross-correlation. x [B x Cin x T], w [Cout x Cin x K], bias [Cout] or null.
// T_out = (T + 2 padding - K) / stride + 1.
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor* bias, std::size_t stride,
              std::size_t padding);

// Adjoint of conv1d. x [B x Cin x T], w [Cin x Cout x K], bias [Cout] or null.
// T_out = (T - 1) stride - 2 padding + K.
Tensor conv1d_transposed(const Tensor& x, const Tensor& w, const Tensor* bias, std::size_t stride,
                         std::size_t padding);

// --- normalisation & regularisation ---------------------------------------

struct BatchNormState {
  Tensor running_mean;  // [C]
  Tensor running_var;   // [C]
  double momentum = 0.1;
};

// x [B x C x T]. Train mode normalises with batch statistics (biased variance)
// and updates the running buffers in place (unbiased variance); eval mode
// uses the running buffers.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state,
                  double eps, bool train);

// Normalises over the last axis.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// Inverted dropout; identity when !train or rate == 0.
Tensor dropout(const Tensor& x, double rate, bool train, Rng& rng);

// --- transforms -------------------------------------------------------------

// Orthonormal DCT-II / DCT-III along `axis` (default: last).
Tensor dct_forward(const Tensor& x, std::size_t axis);
Tensor dct_inverse(const Tensor& x, std::size_t axis);
inline Tensor dct_forward(const Tensor& x) { return dct_forward(x, x.ndim() - 1); }
inline Tensor dct_inverse(const Tensor& x) { return dct_inverse(x, x.ndim() - 1); }

// --- losses -----------------------------------------------------------------

// mean((a - b)^2)
Tensor mse_loss(const Tensor& a, const Tensor& b);

}  // namespace fdcnet::ops
