#pragma once

// Model-level checks shared by the unit tests and the acceptance runner.

#include <chrono>
#include <cmath>

#include "fdcnet/feedback.hpp"
#include "fdcnet/model.hpp"
#include "gradcheck.hpp"

namespace fdcnet::testing {

inline ModelConfig tiny_config() {
  ModelConfig c;
  c.channels = 4;
  c.d_model = 16;
  c.n_layers = 2;
  c.n_heads = 4;
  c.freq_heads = 2;
  c.ff_dim = 32;
  c.cls_hidden = 8;
  c.dropout = 0.0;
  return c;
}

// Moves every parameter off its initial value, including the zero-initialised
// decoder output layer and feedback lift.
inline void perturb_parameters(FdcNet& net, std::uint64_t seed, double scale = 0.2) {
  Rng rng(seed);
  for (auto& [path, t] : net.store().params())
    for (auto& v : t.mutable_data()) v += scale * rng.normal();
}

struct ModelGradReport {
  std::vector<GradCheckResult> params;
  double seconds = 0.0;
  double worst() const { return worst_rel_err(params); }
};

// Central differences on the joint loss for every parameter of a tiny model
// (B=2, C=4, T=32, d_model=16). Gradient norms below 1e-6 are compared in
// absolute terms.
inline ModelGradReport model_gradient_suite(std::uint64_t seed = 1, double h = 1e-4) {
  const auto start = std::chrono::steady_clock::now();
  auto cfg = tiny_config();
  FdcNet net(cfg, seed);
  perturb_parameters(net, seed + 1);
  Rng rng(seed + 2);
  auto x_noisy = random_tensor({2, cfg.channels, 32}, rng, 1.0, false);
  auto x_clean = random_tensor({2, cfg.channels, 32}, rng, 1.0, false);
  auto y = Tensor({2, 2}, {1, 0, 0, 1});
  classifier::ClassWeights w;
  w.w = {1.2, 0.9};
  std::vector<Tensor> inputs;
  for (auto& [path, t] : net.store().params()) inputs.push_back(t);
  auto loss = [&] {
    auto out = net.forward(x_noisy, {true, nullptr});
    return feedback::joint_loss(x_clean, out.x_hat, out.pred.p, y, w, 0.6).total;
  };
  ModelGradReport report;
  report.params = grad_check(loss, inputs, h, 1e-6);
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

inline bool bit_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.numel(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

// With the cross-path messages switched off or zero, the joint forward must
// reproduce the two single-task forwards exactly.
inline bool ablation_equivalent(ModelConfig cfg, std::uint64_t seed) {
  FdcNet net(cfg, seed);
  // randomise everything except the (zero) message lift
  Rng rng(seed + 7);
  for (auto& [path, t] : net.store().params())
    if (path != "feedback.lift.w")
      for (auto& v : t.mutable_data()) v += 0.1 * rng.normal();
  auto x = random_tensor({3, cfg.channels, 64}, rng, 1.0, false);
  NoGradGuard guard;
  auto joint = net.forward(x, {});
  auto den = net.denoise_only(x, {});
  auto cls = net.classify_only(x);
  return bit_equal(joint.x_hat, den.x_hat) && bit_equal(joint.h_den, den.h_den) && bit_equal(joint.pred.p, cls.p) &&
         bit_equal(joint.pred.logits, cls.logits);
}

}  // namespace fdcnet::testing
