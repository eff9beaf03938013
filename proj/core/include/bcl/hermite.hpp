#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace bcl {

inline constexpr int kMaxDim = 4;

/// Values of the orthonormal probabilists' Hermite functions e_0..e_n at u,
/// orthonormal under N(0,1): e_{k+1} = (u e_k - sqrt(k) e_{k-1}) / sqrt(k+1).
void hermite_orthonormal(double u, int max_degree, std::span<double> out);

using MultiIndex = std::array<int16_t, kMaxDim>;

inline int total_degree(const MultiIndex& mi, int dim) {
  int s = 0;
  for (int k = 0; k < dim; ++k) s += mi[k];
  return s;
}

/// Multi-indices of dimension `dim` with total degree <= max_degree, graded
/// lexicographic (all degree-0 first, then degree-1, ...).
std::vector<MultiIndex> graded_multi_indices(int dim, int max_degree);

/// Number of multi-indices of dimension `dim` with total degree == degree,
/// i.e. C(degree + dim - 1, dim - 1).
uint64_t degree_count(int dim, int degree);

}  // namespace bcl
