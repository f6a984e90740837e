#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fdcnet/params.hpp"

namespace fdcnet::classifier {

inline constexpr std::size_t kKernel = 7;
inline constexpr std::size_t kPadding = 3;
inline constexpr double kProbClamp = 1e-7;

// conv.{w,b} d->d, attn.{w,b} [1 x d], head.{w1,b1} [hidden x d], head.{w2,b2} [2 x hidden].
void init_classifier(ParamStore& store, const std::string& prefix, std::size_t d_model, std::size_t hidden,
                     std::uint64_t seed);

// [B x d x T] stem output -> [B x T x d] via conv + GELU.
Tensor conv_features(const Tensor& stem, const ParamStore& store, const std::string& prefix);

struct Pooled {
  Tensor pooled;   // [B x d]
  Tensor weights;  // [B x T], rows sum to 1
};

// Softmax over T of (w . h_t + b), then the weighted temporal sum.
Pooled attention_pool(const Tensor& h, const Tensor& w, const Tensor& b);

struct Prediction {
  Tensor logits;  // [B x 2]
  Tensor p;       // sigmoid(logits), valence and arousal
};

Prediction classify_forward(const Tensor& h_cls, const ParamStore& store, const std::string& prefix);

using Label = std::array<std::uint8_t, 2>;  // valence, arousal

struct ClassWeights {
  std::array<double, 2> freq{0.5, 0.5};  // positive rate per dimension
  std::array<double, 2> w{1.0, 1.0};     // 1 / sqrt(freq)
};

// Throws DegenerateError if a dimension has a single class.
ClassWeights class_weights(const std::vector<Label>& labels);

// Labels as a [B x 2] tensor.
Tensor label_tensor(const std::vector<Label>& labels);

// mean_b sum_c -w_c [y log p + (1 - y) log(1 - p)] with p clamped to
// [1e-7, 1 - 1e-7]. p outside [0, 1] is a ContractError.
Tensor weighted_bce(const Tensor& p, const Tensor& y, const ClassWeights& w);

// Fraction of rows whose thresholded (valence, arousal) pair matches y.
double accuracy_4class(const Tensor& p, const Tensor& y, double threshold = 0.5);

}  // namespace fdcnet::classifier
