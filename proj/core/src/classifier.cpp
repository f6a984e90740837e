#include "fdcnet/classifier.hpp"

#include <algorithm>
#include <cmath>

#include "fdcnet/nn.hpp"
#include "fdcnet/ops.hpp"

namespace fdcnet::classifier {

using namespace fdcnet::ops;

void init_classifier(ParamStore& store, const std::string& prefix, std::size_t d_model, std::size_t hidden,
                     std::uint64_t seed) {
  auto add = [&](const std::string& name, Shape shape, double bound) {
    const auto path = prefix + "." + name;
    store.add(path, nn::uniform(std::move(shape), bound, nn::path_seed(seed, path)));
  };
  const double conv_bound = 1.0 / std::sqrt(static_cast<double>(d_model * kKernel));
  const double d_bound = 1.0 / std::sqrt(static_cast<double>(d_model));
  const double h_bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  add("conv.w", {d_model, d_model, kKernel}, conv_bound);
  add("conv.b", {d_model}, conv_bound);
  add("attn.w", {1, d_model}, d_bound);
  add("attn.b", {1}, d_bound);
  add("head.w1", {hidden, d_model}, d_bound);
  add("head.b1", {hidden}, d_bound);
  add("head.w2", {2, hidden}, h_bound);
  add("head.b2", {2}, h_bound);
}

Tensor conv_features(const Tensor& stem, const ParamStore& store, const std::string& prefix) {
  return swap_last2(gelu(conv1d(stem, store.get(prefix + ".conv.w"), &store.get(prefix + ".conv.b"), 1, kPadding)));
}

Pooled attention_pool(const Tensor& h, const Tensor& w, const Tensor& b) {
  if (h.ndim() != 3) throw ShapeError("attention_pool expects [B x T x d], got " + shape_str(h.shape()));
  const auto B = h.dim(0), T = h.dim(1), D = h.dim(2);
  auto weights = softmax_last(reshape(linear(h, w, &b), {B, T}));
  auto pooled = reshape(bmm(reshape(weights, {B, 1, T}), h), {B, D});
  return {pooled, weights};
}

Prediction classify_forward(const Tensor& h_cls, const ParamStore& store, const std::string& prefix) {
  auto pooled = attention_pool(h_cls, store.get(prefix + ".attn.w"), store.get(prefix + ".attn.b")).pooled;
  auto hidden = gelu(linear(pooled, store.get(prefix + ".head.w1"), &store.get(prefix + ".head.b1")));
  auto logits = linear(hidden, store.get(prefix + ".head.w2"), &store.get(prefix + ".head.b2"));
  return {logits, sigmoid(logits)};
}

ClassWeights class_weights(const std::vector<Label>& labels) {
  ClassWeights out;
  for (std::size_t c = 0; c < 2; ++c) {
    std::size_t pos = 0;
    for (const auto& l : labels) pos += l[c] != 0;
    if (pos == 0 || pos == labels.size())
      throw DegenerateError(std::string(c == 0 ? "valence" : "arousal") + " labels contain a single class");
    out.freq[c] = static_cast<double>(pos) / static_cast<double>(labels.size());
    out.w[c] = 1.0 / std::sqrt(out.freq[c]);
  }
  return out;
}

Tensor label_tensor(const std::vector<Label>& labels) {
  std::vector<double> v;
  v.reserve(labels.size() * 2);
  for (const auto& l : labels) {
    v.push_back(l[0]);
    v.push_back(l[1]);
  }
  return Tensor({labels.size(), 2}, std::move(v));
}

Tensor weighted_bce(const Tensor& p, const Tensor& y, const ClassWeights& w) {
  if (p.ndim() != 2 || p.dim(1) != 2 || p.shape() != y.shape())
    throw ShapeError("weighted_bce: p " + shape_str(p.shape()) + " vs y " + shape_str(y.shape()));
  const auto B = p.dim(0);
  double loss = 0.0;
  for (std::size_t i = 0; i < p.numel(); ++i) {
    if (!(p[i] >= 0.0 && p[i] <= 1.0))
      throw ContractError("weighted_bce: probability " + std::to_string(p[i]) + " outside [0, 1]");
    const double q = std::clamp(p[i], kProbClamp, 1.0 - kProbClamp);
    loss -= w.w[i % 2] * (y[i] * std::log(q) + (1.0 - y[i]) * std::log(1.0 - q));
  }
  loss /= static_cast<double>(B);
  return record_op("weighted_bce", {1}, {loss}, {&p, &y}, [p, y, w, B](std::span<const double> g) {
    auto gp = grad_sink(p);
    if (gp.empty()) return;
    for (std::size_t i = 0; i < p.numel(); ++i) {
      if (p[i] < kProbClamp || p[i] > 1.0 - kProbClamp) continue;
      gp[i] -= g[0] * w.w[i % 2] * (y[i] / p[i] - (1.0 - y[i]) / (1.0 - p[i])) / static_cast<double>(B);
    }
  });
}

double accuracy_4class(const Tensor& p, const Tensor& y, double threshold) {
  if (p.ndim() != 2 || p.dim(1) != 2 || p.shape() != y.shape())
    throw ShapeError("accuracy_4class: p " + shape_str(p.shape()) + " vs y " + shape_str(y.shape()));
  std::size_t hit = 0;
  for (std::size_t b = 0; b < p.dim(0); ++b) {
    const bool v = (p[2 * b] > threshold) == (y[2 * b] > 0.5);
    const bool a = (p[2 * b + 1] > threshold) == (y[2 * b + 1] > 0.5);
    hit += v && a;
  }
  return static_cast<double>(hit) / static_cast<double>(p.dim(0));
}

}  // namespace fdcnet::classifier
