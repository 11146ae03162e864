#pragma once

// Rayleigh tap-delay-line channel: exponentially decaying tap power profile,
// per-preamble realizations, and SNR-calibrated complex AWGN.

#include <cstdint>
#include <limits>
#include <vector>

#include "rfdna/rng.hpp"
#include "rfdna/waveform.hpp"

namespace rfdna {

struct TapDelayLine {
  std::vector<cplx> coeffs;  // alpha_k
  std::vector<int> delays;   // tau_k in samples, strictly increasing, delays[0] = 0
};

struct ChannelConfig {
  int L = 5;                 // path count
  double t_rms_s = 1e-7;     // RMS delay spread T_r (default 2*T_s at 20 MHz)
  double t_sample_s = 5e-8;  // sampling period T_s
  uint64_t seed = 0;
};

// Per-component (real or imaginary) variance of tap k >= 1:
//   sigma^2 = 1/2 (1 - exp(-T_s/T_r)) exp(-k T_s/T_r)
double tap_variance(int k, double t_sample_s, double t_rms_s);

// One channel realization: alpha_k = A + jB, A,B ~ N(0, sigma^2(k)) iid,
// tau_k = k - 1.
TapDelayLine draw_tdl(const ChannelConfig& cfg, Rng& rng);

// y[n] = sum_k alpha_k x[n - tau_k]; output keeps the full convolution tail
// (length = len(x) + max tau).
ComplexSignal apply_channel(const ComplexSignal& x, const TapDelayLine& h);

// sentinel SNR meaning "no noise"
inline constexpr double kNoiselessSnrDb = std::numeric_limits<double>::infinity();

// Adds circularly symmetric complex Gaussian noise at the requested SNR,
// measured against the input's empirical power. Throws on zero-power input.
ComplexSignal add_awgn(const ComplexSignal& x, double snr_db, Rng& rng);

}  // namespace rfdna
