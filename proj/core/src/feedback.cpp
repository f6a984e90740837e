#include "fdcnet/feedback.hpp"

#include <cmath>

#include "fdcnet/denoiser.hpp"
#include "fdcnet/nn.hpp"
#include "fdcnet/ops.hpp"

namespace fdcnet::feedback {

using namespace fdcnet::ops;

Tensor feedback_embed(const Tensor& x, const Tensor& w_e, const Tensor& b_e) {
  if (x.ndim() != 2 || w_e.ndim() != 2)
    throw ShapeError("feedback_embed: x " + shape_str(x.shape()) + ", W_e " + shape_str(w_e.shape()));
  if (w_e.dim(1) < 2 * w_e.dim(0))
    throw ConfigError("feedback_embed: input width " + std::to_string(w_e.dim(1)) +
                      " must be at least twice the embedding width " + std::to_string(w_e.dim(0)));
  return relu(linear(x, w_e, &b_e));
}

Tensor enhancement_multiplier(const Tensor& f, const Tensor& w, const Tensor& b) {
  return add_scalar(sigmoid(linear(f, w, &b)), 1.0);
}

Tensor feature_enhance(const Tensor& x, const Tensor& f, const Tensor& w, const Tensor& b) {
  auto m = enhancement_multiplier(f, w, b);
  if (m.shape() != x.shape())
    throw ShapeError("feature_enhance: X " + shape_str(x.shape()) + " vs multiplier " + shape_str(m.shape()));
  return mul(x, m);
}

Tensor feedback_project(const Tensor& y_pred, const Tensor& w_f, const Tensor& b_f) {
  if (y_pred.ndim() != 2 || y_pred.dim(1) != 2)
    throw ShapeError("feedback_project expects [B x 2], got " + shape_str(y_pred.shape()));
  return sigmoid(linear(y_pred, w_f, &b_f));
}

Tensor gate_latent(const Tensor& h, const Tensor& gate) {
  if (h.ndim() != 3 || gate.shape() != Shape{h.dim(0), h.dim(2)})
    throw ShapeError("gate_latent: h " + shape_str(h.shape()) + " vs gate " + shape_str(gate.shape()));
  return mul(h, expand(reshape(gate, {h.dim(0), 1, h.dim(2)}), h.shape()));
}

void init_feedback(ParamStore& store, const std::string& prefix, std::size_t d_model, const Options& opt,
                   std::uint64_t seed) {
  if (opt.iterations == 0) throw ConfigError("feedback iterations must be >= 1");
  const auto d = d_model / 4;
  if (d == 0) throw ConfigError("d_model must be >= 4 for the feedback embedding");
  auto add = [&](const std::string& name, Shape shape, double bound) {
    const auto path = prefix + "." + name;
    store.add(path, nn::uniform(std::move(shape), bound, nn::path_seed(seed, path)));
  };
  if (opt.cross) {
    const double bD = 1.0 / std::sqrt(static_cast<double>(d_model));
    const double bd = 1.0 / std::sqrt(static_cast<double>(d));
    add("embed.w", {d, d_model}, bD);
    add("embed.b", {d}, bD);
    add("enhance.w", {d, d}, bd);
    add("enhance.b", {d}, bd);
    store.add(prefix + ".lift.w", Tensor::zeros({d_model, d}));
  }
  if (opt.feedback && opt.iterations > 1) {
    const double b2 = 1.0 / std::sqrt(2.0);
    add("project.w", {d_model, 2}, b2);
    add("project.b", {d_model}, b2);
  }
}

void dual_path_step(DualPathState& s, const ParamStore& store, const std::string& prefix,
                    const std::string& classifier_prefix, std::size_t t, const Options& opt) {
  if (t < 1 || t > opt.iterations)
    throw ContractError("dual_path_step: iteration " + std::to_string(t) + " outside [1, " +
                        std::to_string(opt.iterations) + "]");
  if (t > 1 && opt.feedback)
    s.h_den = gate_latent(s.h_den, feedback_project(s.pred.p, store.get(prefix + ".project.w"),
                                                    store.get(prefix + ".project.b")));
  if (opt.cross) {
    auto z = feedback_embed(mean_axis(s.h_den, 1), store.get(prefix + ".embed.w"), store.get(prefix + ".embed.b"));
    s.message = feature_enhance(z, z, store.get(prefix + ".enhance.w"), store.get(prefix + ".enhance.b"));
    auto lifted = linear(s.message, store.get(prefix + ".lift.w"));
    const auto B = s.h_cls.dim(0), T = s.h_cls.dim(1), D = s.h_cls.dim(2);
    s.h_cls = add(s.h_cls, expand(reshape(lifted, {B, 1, D}), {B, T, D}));
  }
  s.pred = classifier::classify_forward(s.h_cls, store, classifier_prefix);
}

LossParts joint_loss(const Tensor& x_clean, const Tensor& x_hat, const Tensor& p, const Tensor& y,
                     const classifier::ClassWeights& w, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  LossParts out;
  out.mse = denoiser::denoise_loss(x_clean, x_hat);
  out.cls = classifier::weighted_bce(p, y, w);
  out.total = add(scale(out.mse, alpha), scale(out.cls, 1.0 - alpha));
  return out;
}

}  // namespace fdcnet::feedback
