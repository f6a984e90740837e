#pragma once

#include <cstddef>
#include <span>

namespace fdcnet::dct {

// Orthonormal DCT-II basis, row k holds s_k * cos(pi * (n + 1/2) * k / n_points)
// with s_0 = sqrt(1/N) and s_k = sqrt(2/N). Cached per length; the returned
// span stays valid for the life of the process.
std::span<const double> basis(std::size_t n_points);

// out[k] = sum_n B[k][n] in[n]   (DCT-II)
void forward(std::span<const double> in, std::span<double> out);

// out[n] = sum_k B[k][n] in[k]   (DCT-III, the inverse of forward)
void inverse(std::span<const double> in, std::span<double> out);

}  // namespace fdcnet::dct
