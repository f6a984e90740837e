#include "fdcnet/nn.hpp"

namespace fdcnet::nn {

std::uint64_t path_seed(std::uint64_t seed, std::string_view path) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : path) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return derive_seed(seed, h);
}

Tensor uniform(Shape shape, double bound, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return Tensor(std::move(shape), std::move(v));
}

}  // namespace fdcnet::nn
