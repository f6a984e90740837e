#include "fdcnet/dct.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <vector>

#include "fdcnet/errors.hpp"

namespace fdcnet::dct {

std::span<const double> basis(std::size_t n_points) {
  static std::mutex mu;
  static std::map<std::size_t, std::unique_ptr<std::vector<double>>> cache;
  if (n_points == 0) throw ShapeError("DCT length must be >= 1");

  std::lock_guard lock(mu);
  auto& slot = cache[n_points];
  if (!slot) {
    const double n = static_cast<double>(n_points);
    auto m = std::make_unique<std::vector<double>>(n_points * n_points);
    for (std::size_t k = 0; k < n_points; ++k) {
      const double s = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
      for (std::size_t i = 0; i < n_points; ++i)
        (*m)[k * n_points + i] =
            s * std::cos(std::numbers::pi * (static_cast<double>(i) + 0.5) * static_cast<double>(k) / n);
    }
    slot = std::move(m);
  }
  return *slot;
}

void forward(std::span<const double> in, std::span<double> out) {
  const auto n = in.size();
  if (out.size() != n) throw ShapeError("DCT output length mismatch");
  const auto b = basis(n);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    const double* row = b.data() + k * n;
    for (std::size_t i = 0; i < n; ++i) acc += row[i] * in[i];
    out[k] = acc;
  }
}

void inverse(std::span<const double> in, std::span<double> out) {
  const auto n = in.size();
  if (out.size() != n) throw ShapeError("DCT output length mismatch");
  const auto b = basis(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double c = in[k];
    const double* row = b.data() + k * n;
    for (std::size_t i = 0; i < n; ++i) out[i] += row[i] * c;
  }
}

}  // namespace fdcnet::dct
