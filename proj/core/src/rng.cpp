#include "bcl/rng.hpp"

#include <cmath>

namespace bcl {

static inline uint64_t mix64(uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Rng Rng::stream(uint64_t seed, uint64_t stream_id) {
  return Rng(mix64(mix64(seed) ^ (0xD2B74407B1CE6E93ULL * (stream_id + 1))));
}

// Marsaglia-Tsang ziggurat tables, built once at startup. 128 layers for the
// normal, 256 for the exponential; classic rejection constants.
namespace {

struct NormalTables {
  uint32_t kn[128];
  double wn[128];
  double fn[128];
  NormalTables() {
    const double m1 = 2147483648.0;
    double dn = 3.442619855899, tn = dn;
    const double vn = 9.91256303526217e-3;
    double q = vn / std::exp(-0.5 * dn * dn);
    kn[0] = static_cast<uint32_t>((dn / q) * m1);
    kn[1] = 0;
    wn[0] = q / m1;
    wn[127] = dn / m1;
    fn[0] = 1.0;
    fn[127] = std::exp(-0.5 * dn * dn);
    for (int i = 126; i >= 1; --i) {
      dn = std::sqrt(-2.0 * std::log(vn / dn + std::exp(-0.5 * dn * dn)));
      kn[i + 1] = static_cast<uint32_t>((dn / tn) * m1);
      tn = dn;
      fn[i] = std::exp(-0.5 * dn * dn);
      wn[i] = dn / m1;
    }
  }
};

struct ExponentialTables {
  uint32_t ke[256];
  double we[256];
  double fe[256];
  ExponentialTables() {
    const double m2 = 4294967296.0;
    double de = 7.697117470131487, te = de;
    const double ve = 3.949659822581572e-3;
    double q = ve / std::exp(-de);
    ke[0] = static_cast<uint32_t>((de / q) * m2);
    ke[1] = 0;
    we[0] = q / m2;
    we[255] = de / m2;
    fe[0] = 1.0;
    fe[255] = std::exp(-de);
    for (int i = 254; i >= 1; --i) {
      de = -std::log(ve / de + std::exp(-de));
      ke[i + 1] = static_cast<uint32_t>((de / te) * m2);
      te = de;
      fe[i] = std::exp(-de);
      we[i] = de / m2;
    }
  }
};

const NormalTables nt;
const ExponentialTables et;

}  // namespace

double Rng::next_normal() {
  static constexpr double r = 3.442619855899;
  for (;;) {
    const uint64_t u = next_u64();
    const int32_t hz = static_cast<int32_t>(u >> 32);
    const uint32_t iz = static_cast<uint32_t>(hz) & 127u;
    const uint32_t ahz = hz < 0 ? static_cast<uint32_t>(-(int64_t)hz)
                                : static_cast<uint32_t>(hz);
    if (ahz < nt.kn[iz]) return hz * nt.wn[iz];
    if (iz == 0) {
      // tail beyond r
      double x, y;
      do {
        x = -std::log(next_unit()) / r;
        y = -std::log(next_unit());
      } while (y + y < x * x);
      return hz > 0 ? r + x : -(r + x);
    }
    const double x = hz * nt.wn[iz];
    if (nt.fn[iz] + next_unit() * (nt.fn[iz - 1] - nt.fn[iz]) <
        std::exp(-0.5 * x * x))
      return x;
  }
}

double Rng::next_exponential() {
  static constexpr double r = 7.697117470131487;
  for (;;) {
    const uint64_t u = next_u64();
    const uint32_t jz = static_cast<uint32_t>(u >> 32);
    const uint32_t iz = jz & 255u;
    if (jz < et.ke[iz]) return jz * et.we[iz];
    if (iz == 0) return r - std::log(next_unit());
    const double x = jz * et.we[iz];
    if (et.fe[iz] + next_unit() * (et.fe[iz - 1] - et.fe[iz]) < std::exp(-x))
      return x;
  }
}

}  // namespace bcl
