#pragma once

// Central finite-difference oracle. Independent of the tape: it only calls the
// forward function with perturbed leaf values.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "fdcnet/rng.hpp"
#include "fdcnet/tensor.hpp"

namespace fdcnet::testing {

struct GradCheckResult {
  std::string name;
  double rel_err = 0.0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||)
  double max_abs_err = 0.0;
  double analytic_norm = 0.0;
};

inline Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0, bool requires_grad = true) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.normal() * scale;
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

// `loss` must build a fresh scalar from the current values of `inputs`.
// `floor` bounds the denominator from below so that gradients which vanish by
// construction (a bias in front of a softmax or batch norm) compare their
// finite-difference noise against an absolute scale.
inline std::vector<GradCheckResult> grad_check(const std::function<Tensor()>& loss, std::vector<Tensor> inputs,
                                               double h = 1e-5, double floor = 1e-300) {
  for (auto& t : inputs) t.zero_grad();
  GradTape::active().clear();
  backward(loss());

  std::vector<GradCheckResult> results;
  for (auto& t : inputs) {
    GradCheckResult r;
    r.name = t.name();
    std::vector<double> analytic(t.numel(), 0.0);
    if (t.has_grad()) analytic.assign(t.grad().begin(), t.grad().end());
    std::vector<double> numeric(t.numel());
    {
      NoGradGuard guard;
      auto values = t.mutable_data();
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double keep = values[i];
        values[i] = keep + h;
        const double up = loss().item();
        values[i] = keep - h;
        const double down = loss().item();
        values[i] = keep;
        numeric[i] = (up - down) / (2.0 * h);
      }
    }
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      const double d = analytic[i] - numeric[i];
      diff2 += d * d;
      a2 += analytic[i] * analytic[i];
      n2 += numeric[i] * numeric[i];
      r.max_abs_err = std::max(r.max_abs_err, std::abs(d));
    }
    const double denom = std::max({std::sqrt(a2), std::sqrt(n2), floor});
    r.rel_err = (a2 == 0.0 && n2 == 0.0) ? 0.0 : std::sqrt(diff2) / denom;
    r.analytic_norm = std::sqrt(a2);
    results.push_back(r);
  }
  for (auto& t : inputs) t.zero_grad();
  return results;
}

inline double worst_rel_err(const std::vector<GradCheckResult>& rs) {
  double w = 0.0;
  for (const auto& r : rs) w = std::max(w, r.rel_err);
  return w;
}

}  // namespace fdcnet::testing
