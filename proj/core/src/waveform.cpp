#include "rfdna/waveform.hpp"

#include <cmath>
#include <stdexcept>

namespace rfdna {

namespace {

constexpr double kPi = 3.141592653589793238462643;

// 802.11a frequency-domain training sequences, subcarriers -26..26.
// Short training symbol: occupied on multiples of 4, scaled by sqrt(13/6).
std::array<cplx, 53> sts_freq() {
  std::array<cplx, 53> s{};
  const double a = std::sqrt(13.0 / 6.0);
  const cplx p{a, a}, m{-a, -a};
  auto set = [&](int k, cplx v) { s[k + 26] = v; };
  set(-24, p); set(-20, m); set(-16, p); set(-12, m); set(-8, m); set(-4, p);
  set(4, m); set(8, m); set(12, p); set(16, p); set(20, p); set(24, p);
  return s;
}

// Long training symbol: +-1 on all of -26..26 except DC.
std::array<cplx, 53> lts_freq() {
  static const int seq[53] = {
      1, 1, -1, -1, 1,  1, -1, 1, -1, 1,  1,  1,  1,  1,  1,  -1, -1, 1,
      1, -1, 1, -1, 1,  1, 1,  1, 0,  1,  -1, -1, 1,  1,  -1, 1,  -1, 1,
      -1, -1, -1, -1, -1, 1, 1, -1, -1, 1, -1, 1,  -1, 1,  1,  1,  1};
  std::array<cplx, 53> s{};
  for (int i = 0; i < 53; ++i) s[i] = cplx(seq[i], 0.0);
  return s;
}

// 64-point inverse DFT of a -26..26 subcarrier map, evaluated directly
// (preamble synthesis is a one-time cost; no FFT needed).
std::array<cplx, 64> idft64(const std::array<cplx, 53>& freq) {
  std::array<cplx, 64> out{};
  for (int n = 0; n < 64; ++n) {
    cplx acc{0.0, 0.0};
    for (int k = -26; k <= 26; ++k) {
      const cplx v = freq[k + 26];
      if (v == cplx{0.0, 0.0}) continue;
      const double ang = 2.0 * kPi * k * n / 64.0;
      acc += v * cplx{std::cos(ang), std::sin(ang)};
    }
    out[n] = acc;
  }
  return out;
}

}  // namespace

ComplexSignal synthesize_preamble(double sample_rate_hz) {
  if (sample_rate_hz != 20e6) {
    throw std::invalid_argument("synthesize_preamble: unsupported sample rate (only 20 MHz)");
  }
  const auto sts = idft64(sts_freq());
  const auto lts = idft64(lts_freq());

  ComplexSignal out;
  out.sample_rate_hz = sample_rate_hz;
  out.samples.reserve(320);
  // 10 short symbols = 160 samples of the period-16 STS waveform
  for (int n = 0; n < 160; ++n) out.samples.push_back(sts[n % 64]);
  // GI2: last 32 samples of the long symbol
  for (int n = 32; n < 64; ++n) out.samples.push_back(lts[n]);
  // two long symbols
  for (int rep = 0; rep < 2; ++rep) {
    for (int n = 0; n < 64; ++n) out.samples.push_back(lts[n]);
  }

  double power = 0.0;
  for (const cplx& s : out.samples) power += std::norm(s);
  power /= static_cast<double>(out.samples.size());
  const double scale = 1.0 / std::sqrt(power);
  for (cplx& s : out.samples) s *= scale;
  return out;
}

ComplexSignal apply_impairments(const ComplexSignal& x, const EmitterProfile& p) {
  // IQ imbalance as the image-leakage model y = a*x + b*conj(x) with
  // a = (1 + g e^{j phi})/2, b = (1 - g e^{j phi})/2; identity at g=1, phi=0.
  const double g = p.iq_gain_imbalance;
  const double phi = p.iq_phase_imbalance_rad;
  const cplx ge{g * std::cos(phi), g * std::sin(phi)};
  const cplx a = 0.5 * (cplx{1.0, 0.0} + ge);
  const cplx b = 0.5 * (cplx{1.0, 0.0} - ge);

  ComplexSignal out;
  out.sample_rate_hz = x.sample_rate_hz;
  out.samples.resize(x.samples.size());
  const double wcfo = 2.0 * kPi * p.residual_cfo_hz / x.sample_rate_hz;
  for (size_t n = 0; n < x.samples.size(); ++n) {
    cplx v = a * x.samples[n] + b * std::conj(x.samples[n]);
    v = v * (1.0 + p.pa_cubic_coeff * std::norm(v));
    v += p.dc_offset;
    const double ang = wcfo * static_cast<double>(n);
    v *= cplx{std::cos(ang), std::sin(ang)};
    out.samples[n] = v;
  }
  return out;
}

EmitterProfile draw_emitter_profile(int emitter_id, uint64_t seed) {
  Rng rng(seed);
  EmitterProfile p;
  p.emitter_id = emitter_id;
  p.seed = seed;
  p.iq_gain_imbalance = rng.uniform(0.95, 1.05);
  p.iq_phase_imbalance_rad = rng.uniform(-3.0, 3.0) * kPi / 180.0;
  const double dc_mag = rng.uniform(0.0, 0.02);
  const double dc_ang = rng.uniform(0.0, 2.0 * kPi);
  p.dc_offset = cplx{dc_mag * std::cos(dc_ang), dc_mag * std::sin(dc_ang)};
  p.residual_cfo_hz = rng.uniform(-300.0, 300.0);
  p.pa_cubic_coeff = rng.uniform(-0.05, 0.0);
  return p;
}

std::vector<EmitterProfile> draw_fleet(int n_emitters, uint64_t master_seed) {
  std::vector<EmitterProfile> fleet;
  fleet.reserve(n_emitters);
  for (int e = 0; e < n_emitters; ++e) {
    fleet.push_back(draw_emitter_profile(e, derive_seed(master_seed, static_cast<uint64_t>(e))));
  }
  return fleet;
}

IqNlTensor to_iqnl(const ComplexSignal& r) {
  IqNlTensor t;
  t.n = static_cast<int>(r.samples.size());
  t.rows.resize(4 * static_cast<size_t>(t.n));
  for (int i = 0; i < t.n; ++i) {
    const cplx& s = r.samples[i];
    const double mag = std::max(std::abs(s), kMagnitudeClamp);
    // atan2 on signed zeros would scatter a zero sample's phase over
    // {0, +-pi, +-pi/2}; a zero sample's phase is 0 by convention
    double ph = std::abs(s) == 0.0 ? 0.0 : std::atan2(s.imag(), s.real());
    if (ph == -kPi) ph = kPi;  // phase convention (-pi, pi]
    t.at(0, i) = s.real();
    t.at(1, i) = s.imag();
    t.at(2, i) = std::log(mag);
    t.at(3, i) = ph;
  }
  return t;
}

IqNlTensor minmax_normalize(const IqNlTensor& t, const RowStats& stats) {
  for (int row = 0; row < 4; ++row) {
    if (!(stats.max[row] > stats.min[row])) {
      throw std::invalid_argument("minmax_normalize: degenerate stats (max <= min) in row " +
                                  std::to_string(row));
    }
  }
  IqNlTensor out;
  out.n = t.n;
  out.rows.resize(t.rows.size());
  for (int row = 0; row < 4; ++row) {
    const double lo = stats.min[row];
    const double inv = 1.0 / (stats.max[row] - lo);
    for (int i = 0; i < t.n; ++i) {
      double v = (t.at(row, i) - lo) * inv;
      if (v < 0.0) v = 0.0;
      if (v > 1.0) v = 1.0;
      out.at(row, i) = v;
    }
  }
  return out;
}

void accumulate_row_stats(RowStats& stats, const IqNlTensor& t, bool first) {
  for (int row = 0; row < 4; ++row) {
    for (int i = 0; i < t.n; ++i) {
      const double v = t.at(row, i);
      if (first && i == 0) {
        stats.min[row] = v;
        stats.max[row] = v;
      } else {
        stats.min[row] = std::min(stats.min[row], v);
        stats.max[row] = std::max(stats.max[row], v);
      }
    }
  }
}

RowStats compute_row_stats(const std::vector<IqNlTensor>& tensors) {
  if (tensors.empty()) throw std::invalid_argument("compute_row_stats: empty tensor set");
  RowStats stats;
  bool first = true;
  for (const auto& t : tensors) {
    accumulate_row_stats(stats, t, first);
    first = false;
  }
  return stats;
}

}  // namespace rfdna
