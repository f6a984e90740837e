#include "fdcnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "fdcnet/dct.hpp"

namespace fdcnet::ops {

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

void require_rank(const char* op, const Tensor& x, std::size_t rank) {
  if (x.ndim() != rank)
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_str(x.shape()));
}

// Views a shape as [outer, n, inner] around `axis`.
struct AxisSplit {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) throw ShapeError("axis out of range for " + shape_str(shape));
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

template <typename F>
Tensor unary(const char* op, const Tensor& x, F&& fwd_and_deriv) {
  const auto n = x.numel();
  std::vector<double> y(n);
  std::vector<double> dy(n);
  auto xs = x.data();
  for (std::size_t i = 0; i < n; ++i) fwd_and_deriv(xs[i], y[i], dy[i]);
  return record_op(op, x.shape(), std::move(y), {&x},
                   [x, dy = std::move(dy)](std::span<const double> g) {
                     auto gx = grad_sink(x);
                     for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * dy[i];
                   });
}

}  // namespace

// --- shape plumbing -------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  std::vector<double> y(x.data().begin(), x.data().end());
  return record_op("reshape", std::move(shape), std::move(y), {&x}, [x](std::span<const double> g) {
    auto gx = grad_sink(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
  });
}

Tensor expand(const Tensor& x, const Shape& target) {
  const auto& src = x.shape();
  if (src.size() != target.size())
    throw ShapeError("expand: rank mismatch " + shape_str(src) + " -> " + shape_str(target));
  for (std::size_t i = 0; i < src.size(); ++i)
    if (src[i] != 1 && src[i] != target[i])
      throw ShapeError("expand: cannot broadcast " + shape_str(src) + " -> " + shape_str(target));

  const auto rank = target.size();
  const auto n = shape_numel(target);
  // Source flat index for every target element.
  std::vector<std::size_t> map(n);
  std::vector<std::size_t> src_stride(rank, 1);
  for (std::size_t i = rank; i-- > 1;) src_stride[i - 1] = src_stride[i] * src[i];
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t s = 0;
    for (std::size_t d = 0; d < rank; ++d)
      if (src[d] != 1) s += idx[d] * src_stride[d];
    map[flat] = s;
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < target[d]) break;
      idx[d] = 0;
    }
  }
  std::vector<double> y(n);
  auto xs = x.data();
  for (std::size_t i = 0; i < n; ++i) y[i] = xs[map[i]];
  return record_op("expand", target, std::move(y), {&x},
                   [x, map = std::move(map)](std::span<const double> g) {
                     auto gx = grad_sink(x);
                     for (std::size_t i = 0; i < map.size(); ++i) gx[map[i]] += g[i];
                   });
}

Tensor swap_last2(const Tensor& x) {
  require_rank("swap_last2", x, 3);
  const auto a = x.dim(0), b = x.dim(1), c = x.dim(2);
  std::vector<double> y(x.numel());
  auto xs = x.data();
  for (std::size_t i = 0; i < a; ++i)
    for (std::size_t j = 0; j < b; ++j)
      for (std::size_t k = 0; k < c; ++k) y[(i * c + k) * b + j] = xs[(i * b + j) * c + k];
  return record_op("swap_last2", {a, c, b}, std::move(y), {&x}, [x, a, b, c](std::span<const double> g) {
    auto gx = grad_sink(x);
    for (std::size_t i = 0; i < a; ++i)
      for (std::size_t j = 0; j < b; ++j)
        for (std::size_t k = 0; k < c; ++k) gx[(i * b + j) * c + k] += g[(i * c + k) * b + j];
  });
}

Tensor slice_last(const Tensor& x, std::size_t start, std::size_t len) {
  const auto last = x.shape().back();
  if (len == 0 || start + len > last)
    throw ShapeError("slice_last: [" + std::to_string(start) + ", " + std::to_string(start + len) +
                     ") out of range for " + shape_str(x.shape()));
  const auto rows = x.numel() / last;
  std::vector<double> y(rows * len);
  auto xs = x.data();
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(xs.begin() + static_cast<std::ptrdiff_t>(r * last + start), len,
                y.begin() + static_cast<std::ptrdiff_t>(r * len));
  Shape shape = x.shape();
  shape.back() = len;
  return record_op("slice_last", std::move(shape), std::move(y), {&x},
                   [x, start, len, last, rows](std::span<const double> g) {
                     auto gx = grad_sink(x);
                     for (std::size_t r = 0; r < rows; ++r)
                       for (std::size_t j = 0; j < len; ++j) gx[r * last + start + j] += g[r * len + j];
                   });
}

Tensor concat_last(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_last: no inputs");
  Shape lead = parts[0].shape();
  lead.pop_back();
  std::size_t total = 0;
  for (const auto& p : parts) {
    Shape l = p.shape();
    l.pop_back();
    if (l != lead) throw ShapeError("concat_last: leading dims differ: " + shape_str(p.shape()));
    total += p.shape().back();
  }
  const auto rows = shape_numel(lead);
  std::vector<double> y(rows * total);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto w = p.shape().back();
    auto ps = p.data();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < w; ++j) y[r * total + offset + j] = ps[r * w + j];
    offset += w;
  }
  Shape shape = lead;
  shape.push_back(total);

  std::vector<const Tensor*> inputs;
  for (const auto& p : parts) inputs.push_back(&p);
  return record_op("concat_last", std::move(shape), std::move(y), inputs,
                   [parts, rows, total](std::span<const double> g) {
                     std::size_t off = 0;
                     for (const auto& p : parts) {
                       const auto w = p.shape().back();
                       auto gp = grad_sink(p);
                       if (!gp.empty())
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t j = 0; j < w; ++j) gp[r * w + j] += g[r * total + off + j];
                       off += w;
                     }
                   });
}

// --- elementwise ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> y(a.numel());
  auto as = a.data(), bs = b.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = as[i] + bs[i];
  return record_op("add", a.shape(), std::move(y), {&a, &b}, [a, b](std::span<const double> g) {
    for (const auto* t : {&a, &b}) {
      auto gt = grad_sink(*t);
      for (std::size_t i = 0; i < gt.size(); ++i) gt[i] += g[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> y(a.numel());
  auto as = a.data(), bs = b.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = as[i] - bs[i];
  return record_op("sub", a.shape(), std::move(y), {&a, &b}, [a, b](std::span<const double> g) {
    auto ga = grad_sink(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
    auto gb = grad_sink(b);
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<double> y(a.numel());
  auto as = a.data(), bs = b.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = as[i] * bs[i];
  return record_op("mul", a.shape(), std::move(y), {&a, &b}, [a, b](std::span<const double> g) {
    auto as = a.data(), bs = b.data();
    auto ga = grad_sink(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * bs[i];
    auto gb = grad_sink(b);
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * as[i];
  });
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> y(x.numel());
  auto xs = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xs[i] * factor;
  return record_op("scale", x.shape(), std::move(y), {&x}, [x, factor](std::span<const double> g) {
    auto gx = grad_sink(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * factor;
  });
}

Tensor add_scalar(const Tensor& x, double offset) {
  std::vector<double> y(x.numel());
  auto xs = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xs[i] + offset;
  return record_op("add_scalar", x.shape(), std::move(y), {&x}, [x](std::span<const double> g) {
    auto gx = grad_sink(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
  });
}

Activation parse_activation(std::string_view kind) {
  if (kind == "sigmoid") return Activation::sigmoid;
  if (kind == "relu") return Activation::relu;
  if (kind == "gelu") return Activation::gelu;
  if (kind == "softmax") return Activation::softmax;
  throw ConfigError("unknown activation kind '" + std::string(kind) + "'");
}

Tensor activation(const Tensor& x, Activation kind) {
  switch (kind) {
    case Activation::sigmoid: return sigmoid(x);
    case Activation::relu: return relu(x);
    case Activation::gelu: return gelu(x);
    case Activation::softmax: return softmax_last(x);
  }
  throw ConfigError("unknown activation kind");
}

Tensor sigmoid(const Tensor& x) {
  return unary("sigmoid", x, [](double v, double& y, double& dy) {
    // Split by sign so exp never overflows.
    if (v >= 0) {
      y = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      y = e / (1.0 + e);
    }
    dy = y * (1.0 - y);
  });
}

Tensor relu(const Tensor& x) {
  return unary("relu", x, [](double v, double& y, double& dy) {
    y = v > 0 ? v : 0.0;
    dy = v > 0 ? 1.0 : 0.0;
  });
}

Tensor gelu(const Tensor& x) {
  return unary("gelu", x, [](double v, double& y, double& dy) {
    const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
    const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
    y = v * cdf;
    dy = cdf + v * pdf;
  });
}

Tensor softmax_last(const Tensor& x) {
  const auto n = x.shape().back();
  const auto rows = x.numel() / n;
  std::vector<double> y(x.numel());
  auto xs = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xs.data() + r * n;
    double* out = y.data() + r * n;
    const double mx = *std::max_element(in, in + n);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += (out[j] = std::exp(in[j] - mx));
    const double inv = 1.0 / sum;
    for (std::size_t j = 0; j < n; ++j) out[j] *= inv;
  }
  std::vector<double> ys = y;
  return record_op("softmax", x.shape(), std::move(y), {&x},
                   [x, ys = std::move(ys), n, rows](std::span<const double> g) {
                     auto gx = grad_sink(x);
                     for (std::size_t r = 0; r < rows; ++r) {
                       double dot = 0.0;
                       for (std::size_t j = 0; j < n; ++j) dot += g[r * n + j] * ys[r * n + j];
                       for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += ys[r * n + j] * (g[r * n + j] - dot);
                     }
                   });
}

// --- reductions -------------------------------------------------------------

Tensor sum_all(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return record_op("sum_all", {1}, {s}, {&x}, [x](std::span<const double> g) {
    auto gx = grad_sink(x);
    for (auto& v : gx) v += g[0];
  });
}

Tensor mean_all(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  const double inv = 1.0 / static_cast<double>(x.numel());
  return record_op("mean_all", {1}, {s * inv}, {&x}, [x, inv](std::span<const double> g) {
    auto gx = grad_sink(x);
    for (auto& v : gx) v += g[0] * inv;
  });
}

Tensor mean_axis(const Tensor& x, std::size_t axis) {
  const auto s = split_at(x.shape(), axis);
  std::vector<double> y(s.outer * s.inner, 0.0);
  auto xs = x.data();
  const double inv = 1.0 / static_cast<double>(s.n);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t k = 0; k < s.n; ++k)
      for (std::size_t i = 0; i < s.inner; ++i) y[o * s.inner + i] += xs[(o * s.n + k) * s.inner + i];
  for (auto& v : y) v *= inv;
  Shape shape = x.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  if (shape.empty()) shape.push_back(1);
  return record_op("mean_axis", std::move(shape), std::move(y), {&x}, [x, s, inv](std::span<const double> g) {
    auto gx = grad_sink(x);
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t k = 0; k < s.n; ++k)
        for (std::size_t i = 0; i < s.inner; ++i) gx[(o * s.n + k) * s.inner + i] += g[o * s.inner + i] * inv;
  });
}

// --- linear algebra ---------------------------------------------------------

namespace {

// c[m x n] += a[m x k] * b[k x n], all row-major. Four rows of c are
// updated per pass over b.
__attribute__((target_clones("avx2", "default"))) void gemm_kernel(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    double* c0 = c + i * n;
    double* c1 = c0 + n;
    double* c2 = c1 + n;
    double* c3 = c2 + n;
    const double* a0 = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double v0 = a0[p], v1 = a0[k + p], v2 = a0[2 * k + p], v3 = a0[3 * k + p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double bv = bp[j];
        c0[j] += v0 * bv;
        c1[j] += v1 * bv;
        c2[j] += v2 * bv;
        c3[j] += v3 * bv;
      }
    }
  }
  for (; i < m; ++i) {
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void transpose(std::size_t rows, std::size_t cols, const double* src, std::vector<double>& dst) {
  dst.resize(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

// c[m x n] += a[m x k] * b[k x n]
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c) {
  gemm_kernel(m, k, n, a, b, c);
}

// c[m x n] += a[m x k] * b[n x k]^T
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c) {
  thread_local std::vector<double> bt;
  transpose(n, k, b, bt);
  gemm_kernel(m, k, n, a, bt.data(), c);
}

// c[m x n] += a[k x m]^T * b[k x n]
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b, double* c) {
  thread_local std::vector<double> at;
  transpose(k, m, a, at);
  gemm_kernel(m, k, n, at.data(), b, c);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    throw ShapeError("matmul: inner dims disagree " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::vector<double> y(m * n, 0.0);
  gemm_nn(m, k, n, a.data().data(), b.data().data(), y.data());
  return record_op("matmul", {m, n}, std::move(y), {&a, &b}, [a, b, m, k, n](std::span<const double> g) {
    if (auto ga = grad_sink(a); !ga.empty()) gemm_nt(m, n, k, g.data(), b.data().data(), ga.data());
    if (auto gb = grad_sink(b); !gb.empty()) gemm_tn(k, m, n, a.data().data(), g.data(), gb.data());
  });
}

Tensor bmm(const Tensor& a, const Tensor& b, bool transpose_b) {
  require_rank("bmm", a, 3);
  require_rank("bmm", b, 3);
  const auto batch = a.dim(0), m = a.dim(1), k = a.dim(2);
  const auto n = transpose_b ? b.dim(1) : b.dim(2);
  const auto bk = transpose_b ? b.dim(2) : b.dim(1);
  if (b.dim(0) != batch || bk != k)
    throw ShapeError("bmm: incompatible " + shape_str(a.shape()) + " x " + shape_str(b.shape()) +
                     (transpose_b ? "^T" : ""));
  std::vector<double> y(batch * m * n, 0.0);
  const double* as = a.data().data();
  const double* bs = b.data().data();
  for (std::size_t i = 0; i < batch; ++i) {
    if (transpose_b)
      gemm_nt(m, k, n, as + i * m * k, bs + i * n * k, y.data() + i * m * n);
    else
      gemm_nn(m, k, n, as + i * m * k, bs + i * k * n, y.data() + i * m * n);
  }
  return record_op("bmm", {batch, m, n}, std::move(y), {&a, &b},
                   [a, b, batch, m, k, n, transpose_b](std::span<const double> g) {
                     const double* as = a.data().data();
                     const double* bs = b.data().data();
                     auto ga = grad_sink(a);
                     auto gb = grad_sink(b);
                     for (std::size_t i = 0; i < batch; ++i) {
                       const double* gi = g.data() + i * m * n;
                       if (!ga.empty()) {
                         // dA = G B^T  (or G B when b was transposed)
                         if (transpose_b)
                           gemm_nn(m, n, k, gi, bs + i * n * k, ga.data() + i * m * k);
                         else
                           gemm_nt(m, n, k, gi, bs + i * k * n, ga.data() + i * m * k);
                       }
                       if (!gb.empty()) {
                         if (transpose_b)  // dB[n x k] = G^T A
                           gemm_tn(n, m, k, gi, as + i * m * k, gb.data() + i * n * k);
                         else  // dB[k x n] = A^T G
                           gemm_tn(k, m, n, as + i * m * k, gi, gb.data() + i * k * n);
                       }
                     }
                   });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor* bias) {
  require_rank("linear weight", w, 2);
  const auto out = w.dim(0), in = w.dim(1);
  if (x.shape().back() != in)
    throw ShapeError("linear: input " + shape_str(x.shape()) + " vs weight " + shape_str(w.shape()));
  if (bias && bias->shape() != Shape{out})
    throw ShapeError("linear: bias " + shape_str(bias->shape()) + " vs weight " + shape_str(w.shape()));
  const auto rows = x.numel() / in;
  std::vector<double> y(rows * out, 0.0);
  if (bias)
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(bias->data().begin(), bias->data().end(), y.begin() + static_cast<std::ptrdiff_t>(r * out));
  gemm_nt(rows, in, out, x.data().data(), w.data().data(), y.data());
  Shape shape = x.shape();
  shape.back() = out;

  const Tensor b = bias ? *bias : Tensor();
  const bool has_bias = bias != nullptr;
  auto backward_fn = [x, w, b, has_bias, rows, in, out](std::span<const double> g) {
    if (auto gx = grad_sink(x); !gx.empty()) gemm_nn(rows, out, in, g.data(), w.data().data(), gx.data());
    if (auto gw = grad_sink(w); !gw.empty()) gemm_tn(out, rows, in, g.data(), x.data().data(), gw.data());
    if (has_bias)
      if (auto gb = grad_sink(b); !gb.empty())
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t o = 0; o < out; ++o) gb[o] += g[r * out + o];
  };
  if (bias) return record_op("linear", std::move(shape), std::move(y), {&x, &w, bias}, backward_fn);
  return record_op("linear", std::move(shape), std::move(y), {&x, &w}, backward_fn);
}

// --- convolution ------------------------------------------------------------

namespace {

void check_conv_bias(const char* op, const Tensor* bias, std::size_t cout) {
  if (bias && bias->shape() != Shape{cout})
    throw ShapeError(std::string(op) + ": bias " + shape_str(bias->shape()) + " for " +
                     std::to_string(cout) + " output channels");
}

// For output position t and tap k the input index is t*stride + k - padding;
// returns the half-open range of t for which it lies inside [0, len).
std::pair<std::size_t, std::size_t> valid_range(std::size_t k, std::size_t stride, std::size_t padding,
                                                std::size_t len, std::size_t t_out) {
  // need t*stride + k >= padding  and  t*stride + k - padding < len
  std::size_t lo = 0;
  if (k < padding) lo = (padding - k + stride - 1) / stride;
  std::size_t hi = 0;
  if (len + padding > k) hi = (len + padding - k + stride - 1) / stride;
  hi = std::min(hi, t_out);
  return {std::min(lo, hi), hi};
}

struct ColGeom {
  std::size_t channels, len, K, stride, padding, nout;
};

// cols[(c*K + k) * nout + t] = src[c, t*stride + k - padding], zero outside.
void im2col(const double* src, double* cols, const ColGeom& g) {
  std::fill(cols, cols + g.channels * g.K * g.nout, 0.0);
  for (std::size_t c = 0; c < g.channels; ++c)
    for (std::size_t k = 0; k < g.K; ++k) {
      const auto [lo, hi] = valid_range(k, g.stride, g.padding, g.len, g.nout);
      double* row = cols + (c * g.K + k) * g.nout;
      const double* sc = src + c * g.len;
      for (std::size_t t = lo; t < hi; ++t) row[t] = sc[t * g.stride + k - g.padding];
    }
}

// Adjoint of im2col: dst[c, t*stride + k - padding] += cols[(c*K + k) * nout + t].
void col2im(const double* cols, double* dst, const ColGeom& g) {
  for (std::size_t c = 0; c < g.channels; ++c)
    for (std::size_t k = 0; k < g.K; ++k) {
      const auto [lo, hi] = valid_range(k, g.stride, g.padding, g.len, g.nout);
      const double* row = cols + (c * g.K + k) * g.nout;
      double* dc = dst + c * g.len;
      for (std::size_t t = lo; t < hi; ++t) dc[t * g.stride + k - g.padding] += row[t];
    }
}

void add_channel_bias(double* y, const Tensor& bias, std::size_t B, std::size_t C, std::size_t T) {
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < C; ++o) std::fill(y + (b * C + o) * T, y + (b * C + o + 1) * T, bias[o]);
}

void accumulate_channel_bias(std::span<double> gb, std::span<const double> g, std::size_t B, std::size_t C,
                             std::size_t T) {
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < C; ++o)
      for (std::size_t t = 0; t < T; ++t) gb[o] += g[(b * C + o) * T + t];
}

}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor* bias, std::size_t stride, std::size_t padding) {
  require_rank("conv1d input", x, 3);
  require_rank("conv1d weight", w, 3);
  if (stride == 0) throw ShapeError("conv1d: stride must be >= 1");
  const auto B = x.dim(0), cin = x.dim(1), T = x.dim(2);
  const auto cout = w.dim(0), K = w.dim(2);
  if (w.dim(1) != cin)
    throw ShapeError("conv1d: input " + shape_str(x.shape()) + " vs weight " + shape_str(w.shape()));
  if (K > T + 2 * padding)
    throw ShapeError("conv1d: kernel " + std::to_string(K) + " larger than padded input " +
                     std::to_string(T + 2 * padding));
  check_conv_bias("conv1d", bias, cout);
  const auto tout = (T + 2 * padding - K) / stride + 1;
  const ColGeom geom{cin, T, K, stride, padding, tout};
  const auto ck = cin * K;

  std::vector<double> y(B * cout * tout, 0.0);
  if (bias) add_channel_bias(y.data(), *bias, B, cout, tout);
  std::vector<double> cols(ck * tout);
  for (std::size_t b = 0; b < B; ++b) {
    im2col(x.data().data() + b * cin * T, cols.data(), geom);
    gemm_nn(cout, ck, tout, w.data().data(), cols.data(), y.data() + b * cout * tout);
  }

  const Tensor bt = bias ? *bias : Tensor();
  const bool has_bias = bias != nullptr;
  auto backward_fn = [x, w, bt, has_bias, B, cin, T, cout, tout, ck, geom](std::span<const double> g) {
    auto gx = grad_sink(x);
    auto gw = grad_sink(w);
    std::vector<double> cols(ck * tout);
    for (std::size_t b = 0; b < B; ++b) {
      const double* gb = g.data() + b * cout * tout;
      if (!gw.empty()) {
        im2col(x.data().data() + b * cin * T, cols.data(), geom);
        gemm_nt(cout, tout, ck, gb, cols.data(), gw.data());
      }
      if (!gx.empty()) {
        std::fill(cols.begin(), cols.end(), 0.0);
        gemm_tn(ck, cout, tout, w.data().data(), gb, cols.data());
        col2im(cols.data(), gx.data() + b * cin * T, geom);
      }
    }
    if (has_bias)
      if (auto gb = grad_sink(bt); !gb.empty()) accumulate_channel_bias(gb, g, B, cout, tout);
  };
  Shape shape{B, cout, tout};
  if (bias) return record_op("conv1d", std::move(shape), std::move(y), {&x, &w, bias}, backward_fn);
  return record_op("conv1d", std::move(shape), std::move(y), {&x, &w}, backward_fn);
}

Tensor conv1d_transposed(const Tensor& x, const Tensor& w, const Tensor* bias, std::size_t stride,
                         std::size_t padding) {
  require_rank("conv1d_transposed input", x, 3);
  require_rank("conv1d_transposed weight", w, 3);
  if (stride == 0) throw ShapeError("conv1d_transposed: stride must be >= 1");
  const auto B = x.dim(0), cin = x.dim(1), T = x.dim(2);
  const auto cout = w.dim(1), K = w.dim(2);
  if (w.dim(0) != cin)
    throw ShapeError("conv1d_transposed: input " + shape_str(x.shape()) + " vs weight " + shape_str(w.shape()));
  const auto full = (T - 1) * stride + K;
  if (full <= 2 * padding)
    throw ShapeError("conv1d_transposed: padding " + std::to_string(padding) + " consumes the whole output");
  check_conv_bias("conv1d_transposed", bias, cout);
  const auto tout = full - 2 * padding;
  // Output position t*stride + k - padding receives x[c,t] w[c,o,k]: the
  // column geometry of a conv1d over the output, read backwards.
  const ColGeom geom{cout, tout, K, stride, padding, T};
  const auto ok = cout * K;

  std::vector<double> y(B * cout * tout, 0.0);
  if (bias) add_channel_bias(y.data(), *bias, B, cout, tout);
  std::vector<double> cols(ok * T);
  for (std::size_t b = 0; b < B; ++b) {
    std::fill(cols.begin(), cols.end(), 0.0);
    gemm_tn(ok, cin, T, w.data().data(), x.data().data() + b * cin * T, cols.data());
    col2im(cols.data(), y.data() + b * cout * tout, geom);
  }

  const Tensor bt = bias ? *bias : Tensor();
  const bool has_bias = bias != nullptr;
  auto backward_fn = [x, w, bt, has_bias, B, cin, T, cout, tout, ok, geom](std::span<const double> g) {
    auto gx = grad_sink(x);
    auto gw = grad_sink(w);
    std::vector<double> cols(ok * T);
    for (std::size_t b = 0; b < B; ++b) {
      im2col(g.data() + b * cout * tout, cols.data(), geom);
      if (!gx.empty()) gemm_nn(cin, ok, T, w.data().data(), cols.data(), gx.data() + b * cin * T);
      if (!gw.empty()) gemm_nt(cin, T, ok, x.data().data() + b * cin * T, cols.data(), gw.data());
    }
    if (has_bias)
      if (auto gb = grad_sink(bt); !gb.empty()) accumulate_channel_bias(gb, g, B, cout, tout);
  };
  Shape shape{B, cout, tout};
  if (bias) return record_op("conv1d_transposed", std::move(shape), std::move(y), {&x, &w, bias}, backward_fn);
  return record_op("conv1d_transposed", std::move(shape), std::move(y), {&x, &w}, backward_fn);
}

// --- normalisation & regularisation ---------------------------------------

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state, double eps,
                  bool train) {
  require_rank("batch_norm", x, 3);
  const auto B = x.dim(0), C = x.dim(1), T = x.dim(2);
  for (const Tensor* p : {&gamma, &beta, static_cast<const Tensor*>(&state.running_mean), static_cast<const Tensor*>(&state.running_var)})
    if (p->shape() != Shape{C})
      throw ShapeError("batch_norm: parameter " + shape_str(p->shape()) + " for " + std::to_string(C) + " channels");
  const auto n = B * T;
  if (train && n < 2)
    throw DegenerateError("batch_norm: train mode needs B*T >= 2, got " + std::to_string(n));

  const double* xs = x.data().data();
  std::vector<double> mean(C, 0.0), inv_std(C, 0.0);
  if (train) {
    for (std::size_t c = 0; c < C; ++c) {
      double s = 0.0;
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t t = 0; t < T; ++t) s += xs[(b * C + c) * T + t];
      const double mu = s / static_cast<double>(n);
      double v = 0.0;
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t t = 0; t < T; ++t) {
          const double d = xs[(b * C + c) * T + t] - mu;
          v += d * d;
        }
      mean[c] = mu;
      inv_std[c] = 1.0 / std::sqrt(v / static_cast<double>(n) + eps);
      auto rm = state.running_mean.mutable_data();
      auto rv = state.running_var.mutable_data();
      rm[c] = (1.0 - state.momentum) * rm[c] + state.momentum * mu;
      rv[c] = (1.0 - state.momentum) * rv[c] + state.momentum * v / static_cast<double>(n - 1);
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = state.running_mean[c];
      inv_std[c] = 1.0 / std::sqrt(state.running_var[c] + eps);
    }
  }

  std::vector<double> xhat(x.numel()), y(x.numel());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t t = 0; t < T; ++t) {
        const auto i = (b * C + c) * T + t;
        xhat[i] = (xs[i] - mean[c]) * inv_std[c];
        y[i] = gamma[c] * xhat[i] + beta[c];
      }

  return record_op(
      "batch_norm", x.shape(), std::move(y), {&x, &gamma, &beta},
      [x, gamma, beta, xhat = std::move(xhat), inv_std, B, C, T, n, train](std::span<const double> g) {
        auto gg = grad_sink(gamma);
        auto gb = grad_sink(beta);
        auto gx = grad_sink(x);
        for (std::size_t c = 0; c < C; ++c) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t t = 0; t < T; ++t) {
              const auto i = (b * C + c) * T + t;
              sum_g += g[i];
              sum_gx += g[i] * xhat[i];
            }
          if (!gg.empty()) gg[c] += sum_gx;
          if (!gb.empty()) gb[c] += sum_g;
          if (gx.empty()) continue;
          const double k = gamma[c] * inv_std[c];
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t t = 0; t < T; ++t) {
              const auto i = (b * C + c) * T + t;
              gx[i] += train ? k * (g[i] - inv_n * sum_g - xhat[i] * inv_n * sum_gx) : k * g[i];
            }
        }
      });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const auto d = x.shape().back();
  if (gamma.shape() != Shape{d} || beta.shape() != Shape{d})
    throw ShapeError("layer_norm: parameters do not match last dim of " + shape_str(x.shape()));
  const auto rows = x.numel() / d;
  const double* xs = x.data().data();
  std::vector<double> xhat(x.numel()), y(x.numel()), inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xs + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<double>(d);
    double v = 0.0;
    for (std::size_t j = 0; j < d; ++j) v += (xr[j] - mu) * (xr[j] - mu);
    const double is = 1.0 / std::sqrt(v / static_cast<double>(d) + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (xr[j] - mu) * is;
      y[r * d + j] = gamma[j] * xhat[r * d + j] + beta[j];
    }
  }
  return record_op("layer_norm", x.shape(), std::move(y), {&x, &gamma, &beta},
                   [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), rows,
                    d](std::span<const double> g) {
                     auto gg = grad_sink(gamma);
                     auto gb = grad_sink(beta);
                     auto gx = grad_sink(x);
                     const double inv_d = 1.0 / static_cast<double>(d);
                     for (std::size_t r = 0; r < rows; ++r) {
                       double sum_h = 0.0, sum_hx = 0.0;
                       for (std::size_t j = 0; j < d; ++j) {
                         const auto i = r * d + j;
                         if (!gg.empty()) gg[j] += g[i] * xhat[i];
                         if (!gb.empty()) gb[j] += g[i];
                         const double h = g[i] * gamma[j];
                         sum_h += h;
                         sum_hx += h * xhat[i];
                       }
                       if (gx.empty()) continue;
                       for (std::size_t j = 0; j < d; ++j) {
                         const auto i = r * d + j;
                         gx[i] += inv_std[r] * (g[i] * gamma[j] - inv_d * sum_h - xhat[i] * inv_d * sum_hx);
                       }
                     }
                   });
}

Tensor dropout(const Tensor& x, double rate, bool train, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must lie in [0, 1)");
  if (!train || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.numel());
  for (auto& m : mask) m = rng.uniform() < rate ? 0.0 : keep_scale;
  std::vector<double> y(x.numel());
  auto xs = x.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xs[i] * mask[i];
  return record_op("dropout", x.shape(), std::move(y), {&x}, [x, mask = std::move(mask)](std::span<const double> g) {
    auto gx = grad_sink(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * mask[i];
  });
}

// --- transforms -------------------------------------------------------------

namespace {

// y[o,k,i] = sum_n M[k,n] x[o,n,i]  (forward)   or   sum_n M[n,k] x[o,n,i] (inverse)
void apply_dct(const double* x, double* y, const AxisSplit& s, bool inverse) {
  const auto basis = dct::basis(s.n);
  thread_local std::vector<double> mt;
  transpose(s.n, s.n, basis.data(), mt);
  std::fill(y, y + s.outer * s.n * s.inner, 0.0);
  if (s.inner == 1) {
    // rows of x are signals: Y = X M^T, or X M for the inverse
    gemm_kernel(s.outer, s.n, s.n, x, inverse ? basis.data() : mt.data(), y);
    return;
  }
  const double* m = inverse ? mt.data() : basis.data();
  for (std::size_t o = 0; o < s.outer; ++o)
    gemm_kernel(s.n, s.n, s.inner, m, x + o * s.n * s.inner, y + o * s.n * s.inner);
}

Tensor dct_op(const char* name, const Tensor& x, std::size_t axis, bool inverse) {
  const auto s = split_at(x.shape(), axis);
  std::vector<double> y(x.numel());
  apply_dct(x.data().data(), y.data(), s, inverse);
  return record_op(name, x.shape(), std::move(y), {&x}, [x, s, inverse](std::span<const double> g) {
    auto gx = grad_sink(x);
    // The basis is orthogonal: the adjoint of DCT-II is DCT-III and vice versa.
    std::vector<double> tmp(gx.size());
    apply_dct(g.data(), tmp.data(), s, !inverse);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += tmp[i];
  });
}

}  // namespace

Tensor dct_forward(const Tensor& x, std::size_t axis) { return dct_op("dct_forward", x, axis, false); }
Tensor dct_inverse(const Tensor& x, std::size_t axis) { return dct_op("dct_inverse", x, axis, true); }

// --- losses -----------------------------------------------------------------

Tensor mse_loss(const Tensor& a, const Tensor& b) {
  require_same_shape("mse_loss", a, b);
  const auto n = a.numel();
  auto as = a.data(), bs = b.data();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += (as[i] - bs[i]) * (as[i] - bs[i]);
  const double inv = 1.0 / static_cast<double>(n);
  return record_op("mse_loss", {1}, {s * inv}, {&a, &b}, [a, b, inv](std::span<const double> g) {
    auto as = a.data(), bs = b.data();
    const double k = 2.0 * inv * g[0];
    if (auto ga = grad_sink(a); !ga.empty())
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += k * (as[i] - bs[i]);
    if (auto gb = grad_sink(b); !gb.empty())
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= k * (as[i] - bs[i]);
  });
}

}  // namespace fdcnet::ops
