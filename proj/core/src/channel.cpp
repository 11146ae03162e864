#include "rfdna/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace rfdna {

double tap_variance(int k, double t_sample_s, double t_rms_s) {
  if (k < 1) throw std::invalid_argument("tap_variance: path index must be >= 1");
  if (!(t_sample_s > 0.0) || !(t_rms_s > 0.0)) {
    throw std::invalid_argument("tap_variance: time arguments must be positive");
  }
  const double ratio = t_sample_s / t_rms_s;
  return 0.5 * (1.0 - std::exp(-ratio)) * std::exp(-static_cast<double>(k) * ratio);
}

TapDelayLine draw_tdl(const ChannelConfig& cfg, Rng& rng) {
  if (cfg.L < 1) throw std::invalid_argument("draw_tdl: L must be >= 1");
  TapDelayLine h;
  h.coeffs.reserve(cfg.L);
  h.delays.reserve(cfg.L);
  for (int k = 1; k <= cfg.L; ++k) {
    const double sigma = std::sqrt(tap_variance(k, cfg.t_sample_s, cfg.t_rms_s));
    const double re = sigma * rng.gaussian();
    const double im = sigma * rng.gaussian();
    h.coeffs.emplace_back(re, im);
    h.delays.push_back(k - 1);
  }
  return h;
}

ComplexSignal apply_channel(const ComplexSignal& x, const TapDelayLine& h) {
  if (x.samples.empty()) throw std::invalid_argument("apply_channel: empty input");
  if (h.coeffs.size() != h.delays.size() || h.coeffs.empty()) {
    throw std::invalid_argument("apply_channel: malformed tap delay line");
  }
  const int n_in = static_cast<int>(x.samples.size());
  const int tau_max = h.delays.back();

  ComplexSignal y;
  y.sample_rate_hz = x.sample_rate_hz;
  y.samples.assign(static_cast<size_t>(n_in + tau_max), cplx{0.0, 0.0});
  for (size_t k = 0; k < h.coeffs.size(); ++k) {
    const cplx a = h.coeffs[k];
    const int tau = h.delays[k];
    for (int n = 0; n < n_in; ++n) {
      y.samples[static_cast<size_t>(n + tau)] += a * x.samples[static_cast<size_t>(n)];
    }
  }
  return y;
}

ComplexSignal add_awgn(const ComplexSignal& x, double snr_db, Rng& rng) {
  if (std::isinf(snr_db) && snr_db > 0.0) return x;  // noiseless sentinel

  double power = 0.0;
  for (const cplx& s : x.samples) power += std::norm(s);
  power /= static_cast<double>(x.samples.size());
  if (!(power > 0.0)) throw std::invalid_argument("add_awgn: zero-power input");

  const double snr_linear = std::pow(10.0, snr_db / 10.0);
  const double noise_power = power / snr_linear;
  const double sigma = std::sqrt(noise_power);  // per complex sample; 1/2 per component

  ComplexSignal y;
  y.sample_rate_hz = x.sample_rate_hz;
  y.samples.resize(x.samples.size());
  for (size_t n = 0; n < x.samples.size(); ++n) {
    y.samples[n] = x.samples[n] + sigma * rng.cgaussian();
  }
  return y;
}

}  // namespace rfdna
