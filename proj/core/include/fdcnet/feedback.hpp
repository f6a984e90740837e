#pragma once

#include <string>

#include "fdcnet/classifier.hpp"
#include "fdcnet/params.hpp"

// Dual-path interaction between the denoising and classification latents.
namespace fdcnet::feedback {

// z = relu(x W_e^T + b_e). x [B x D], w_e [d x D]; D < 2d is a ConfigError.
Tensor feedback_embed(const Tensor& x, const Tensor& w_e, const Tensor& b_e);

// 1 + sigmoid(f W^T + b), each entry in (1, 2).
Tensor enhancement_multiplier(const Tensor& f, const Tensor& w, const Tensor& b);

// X * (1 + sigmoid(f W^T + b))
Tensor feature_enhance(const Tensor& x, const Tensor& f, const Tensor& w, const Tensor& b);

// sigmoid(y_pred W_f^T + b_f). y_pred [B x 2], w_f [D x 2] -> [B x D].
Tensor feedback_project(const Tensor& y_pred, const Tensor& w_f, const Tensor& b_f);

// h [B x T x D] times gate [B x D], the same at every t.
Tensor gate_latent(const Tensor& h, const Tensor& gate);

struct Options {
  std::size_t iterations = 2;  // T_fb
  bool feedback = true;        // classification -> denoising gate
  bool cross = true;           // denoising -> classification injection
};

// embed.{w,b} [d x D], enhance.{w,b} [d x d], lift.w [D x d] (zero) when
// cross; project.{w,b} [D x 2] when feedback and iterations > 1. d = D / 4.
void init_feedback(ParamStore& store, const std::string& prefix, std::size_t d_model, const Options& opt,
                   std::uint64_t seed);

struct DualPathState {
  Tensor h_den;  // [B x T x D]
  Tensor h_cls;  // [B x T x D]
  classifier::Prediction pred;
  Tensor message;  // last denoising -> classification message [B x d], if any
};

// One iteration t in [1, iterations]:
//   t > 1 and feedback: h_den <- h_den * feedback_project(p)
//   cross: phi = feature_enhance(z, z), z = feedback_embed(mean_T h_den);
//          h_cls <- h_cls + phi lift^T
//   pred <- classify(h_cls)
void dual_path_step(DualPathState& state, const ParamStore& store, const std::string& prefix,
                    const std::string& classifier_prefix, std::size_t t, const Options& opt);

struct LossParts {
  Tensor total;
  Tensor mse;
  Tensor cls;
};

// alpha * mse(x_hat, x_clean) + (1 - alpha) * weighted_bce(p, y, w)
LossParts joint_loss(const Tensor& x_clean, const Tensor& x_hat, const Tensor& p, const Tensor& y,
                     const classifier::ClassWeights& w, double alpha);

}  // namespace fdcnet::feedback
