#include "fdcnet/optim.hpp"

#include <cmath>

namespace fdcnet {

AdamW::AdamW(const std::map<std::string, Tensor>& params, AdamWConfig config) : config_(config) {
  if (config_.lr < 0 || config_.eps <= 0 || config_.weight_decay < 0 || config_.beta1 < 0 ||
      config_.beta1 >= 1 || config_.beta2 < 0 || config_.beta2 >= 1)
    throw ConfigError("invalid AdamW hyperparameters");
  for (const auto& [path, t] : params) {
    if (!t.requires_grad()) throw ContractError("parameter '" + path + "' does not require grad");
    slots_.push_back({path, t, std::vector<double>(t.numel(), 0.0), std::vector<double>(t.numel(), 0.0)});
  }
}

void AdamW::step() {
  for (const auto& s : slots_)
    if (!s.param.has_grad()) throw ContractError("missing gradient for parameter '" + s.path + "'");

  ++step_;
  const double t = static_cast<double>(step_);
  const double bc1 = 1.0 - std::pow(config_.beta1, t);
  const double bc2 = 1.0 - std::pow(config_.beta2, t);
  const double decay = 1.0 - config_.lr * config_.weight_decay;
  for (auto& s : slots_) {
    auto p = s.param.mutable_data();
    auto g = s.param.grad();
    for (std::size_t i = 0; i < p.size(); ++i) {
      s.m[i] = config_.beta1 * s.m[i] + (1.0 - config_.beta1) * g[i];
      s.v[i] = config_.beta2 * s.v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double m_hat = s.m[i] / bc1;
      const double v_hat = s.v[i] / bc2;
      p[i] = p[i] * decay - config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
      if (!std::isfinite(p[i]))
        throw NonFiniteError("non-finite value in parameter '" + s.path + "' after optimizer step " +
                             std::to_string(step_));
    }
  }
}

void AdamW::zero_grad() {
  for (auto& s : slots_) s.param.zero_grad();
}

const AdamW::Slot& AdamW::slot(const std::string& path) const {
  for (const auto& s : slots_)
    if (s.path == path) return s;
  throw ContractError("optimizer has no parameter '" + path + "'");
}

std::span<const double> AdamW::first_moment(const std::string& path) const { return slot(path).m; }
std::span<const double> AdamW::second_moment(const std::string& path) const { return slot(path).v; }

}  // namespace fdcnet
