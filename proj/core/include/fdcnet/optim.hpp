#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fdcnet/tensor.hpp"

namespace fdcnet {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Adaptive-moment optimizer with decoupled weight decay:
//   p <- p (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps)
class AdamW {
 public:
  // Tensors are held by handle; updates are visible through the caller's copies.
  AdamW(const std::map<std::string, Tensor>& params, AdamWConfig config);

  // ContractError naming the path when a registered parameter has no
  // gradient; NonFiniteError naming the path if an update leaves a
  // non-finite value.
  void step();
  void zero_grad();

  std::uint64_t step_count() const { return step_; }
  const AdamWConfig& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }

  std::span<const double> first_moment(const std::string& path) const;
  std::span<const double> second_moment(const std::string& path) const;

 private:
  struct Slot {
    std::string path;
    Tensor param;
    std::vector<double> m;
    std::vector<double> v;
  };
  const Slot& slot(const std::string& path) const;

  std::vector<Slot> slots_;
  AdamWConfig config_;
  std::uint64_t step_ = 0;
};

}  // namespace fdcnet
