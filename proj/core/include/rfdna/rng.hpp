#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

namespace rfdna {

// splitmix64 step; used for seed expansion only.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Deterministic stream derivation: one master seed fans out to independent
// per-component seeds. Streams are identified by documented constant offsets
// (see harness.hpp) so runs are reproducible regardless of execution order.
inline uint64_t derive_seed(uint64_t master, uint64_t stream) {
  uint64_t s = master + 0x9e3779b97f4a7c15ull * (stream + 0x632be59bd9b4e019ull);
  return splitmix64(s);
}

// mt19937_64 is bit-reproducible across implementations by the standard; the
// std::*_distribution adapters are not, so uniforms and gaussians are derived
// from raw engine output here.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t bits() { return eng_(); }

  // [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // unbiased integer in [0, n)
  uint64_t below(uint64_t n) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return x % n;
  }

  // standard normal via Box-Muller, second value cached
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0,1]: keeps log() finite
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925287 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // circularly symmetric unit-variance complex normal (1/2 per component)
  std::complex<double> cgaussian() {
    const double re = gaussian();
    const double im = gaussian();
    return {re * 0.7071067811865475244, im * 0.7071067811865475244};
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace rfdna
