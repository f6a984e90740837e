#pragma once

#include <cstdint>
#include <string_view>

#include "fdcnet/rng.hpp"
#include "fdcnet/tensor.hpp"

namespace fdcnet::nn {

// Forward-pass mode. `rng` drives dropout and must be set when train is true
// and dropout is active.
struct Mode {
  bool train = false;
  Rng* rng = nullptr;
};

// Per-path seed, so initial values do not depend on construction order.
std::uint64_t path_seed(std::uint64_t seed, std::string_view path);

// U(-bound, bound) entries.
Tensor uniform(Shape shape, double bound, std::uint64_t seed);

}  // namespace fdcnet::nn
