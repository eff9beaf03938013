#include "bcl/hermite.hpp"

#include <cmath>
#include <stdexcept>

namespace bcl {

void hermite_orthonormal(double u, int max_degree, std::span<double> out) {
  if (static_cast<int>(out.size()) < max_degree + 1)
    throw std::invalid_argument("hermite_orthonormal: output span too small");
  out[0] = 1.0;
  if (max_degree == 0) return;
  out[1] = u;
  for (int k = 1; k < max_degree; ++k)
    out[k + 1] = (u * out[k] - std::sqrt(static_cast<double>(k)) * out[k - 1]) /
                 std::sqrt(static_cast<double>(k + 1));
}

std::vector<MultiIndex> graded_multi_indices(int dim, int max_degree) {
  if (dim < 1 || dim > kMaxDim)
    throw std::invalid_argument("graded_multi_indices: dim out of range");
  std::vector<MultiIndex> out;
  for (int deg = 0; deg <= max_degree; ++deg) {
    // enumerate compositions of deg into dim parts, lexicographic in the
    // first coordinates
    MultiIndex mi{};
    std::vector<int> parts(dim, 0);
    // recursive enumeration via explicit loop over first coord
    struct Rec {
      int dim;
      std::vector<MultiIndex>* out;
      void go(MultiIndex& mi, int pos, int remaining) {
        if (pos == dim - 1) {
          mi[pos] = static_cast<int16_t>(remaining);
          out->push_back(mi);
          return;
        }
        for (int v = remaining; v >= 0; --v) {
          mi[pos] = static_cast<int16_t>(v);
          go(mi, pos + 1, remaining - v);
        }
      }
    } rec{dim, &out};
    rec.go(mi, 0, deg);
  }
  return out;
}

uint64_t degree_count(int dim, int degree) {
  // C(degree + dim - 1, dim - 1)
  uint64_t num = 1, den = 1;
  for (int i = 1; i <= dim - 1; ++i) {
    num *= static_cast<uint64_t>(degree + i);
    den *= static_cast<uint64_t>(i);
  }
  return num / den;
}

}  // namespace bcl
