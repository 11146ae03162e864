#pragma once

// 802.11a preamble synthesis, per-emitter impairments, and the 4xN IQ+NL
// signal representation fed to every classifier in the workbench.

#include <array>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "rfdna/rng.hpp"

namespace rfdna {

using cplx = std::complex<double>;

struct ComplexSignal {
  std::vector<cplx> samples;
  double sample_rate_hz = 0.0;
};

// Static hardware coloration of one transmitter. All fields are drawn once
// per emitter from its seed and then never change: a given device always
// imprints the same signature.
struct EmitterProfile {
  int emitter_id = 0;
  double iq_gain_imbalance = 1.0;     // linear ratio, (0, 2)
  double iq_phase_imbalance_rad = 0.0;
  cplx dc_offset{0.0, 0.0};
  double residual_cfo_hz = 0.0;
  double pa_cubic_coeff = 0.0;        // |c| < 1, y = x(1 + c|x|^2)
  uint64_t seed = 0;
};

// 4 x N real matrix: rows I, Q, ln-magnitude, phase.
struct IqNlTensor {
  int n = 0;
  std::vector<double> rows;  // 4*n, row-major

  double& at(int row, int col) { return rows[static_cast<size_t>(row) * n + col]; }
  double at(int row, int col) const { return rows[static_cast<size_t>(row) * n + col]; }
};

// Per-row min/max used for Min-Max normalization; frozen from training data.
struct RowStats {
  std::array<double, 4> min{};
  std::array<double, 4> max{};
};

// magnitudes below this are clamped before the log (ln 0 is undefined)
inline constexpr double kMagnitudeClamp = 1e-12;

// 10 short training symbols + guard interval + 2 long training symbols,
// 320 samples at 20 MHz, normalized to unit mean power.
// Only 20 MHz is supported; other rates are rejected.
ComplexSignal synthesize_preamble(double sample_rate_hz);

// gain/phase imbalance -> cubic PA nonlinearity -> DC offset -> CFO rotation.
// Deterministic; an all-identity profile returns the input unchanged.
ComplexSignal apply_impairments(const ComplexSignal& x, const EmitterProfile& p);

// Draw one emitter's impairment parameters from its seed. Ranges: gain
// U[0.95, 1.05], phase U[-3deg, 3deg], |dc| <= 0.02, |cfo| <= 300 Hz,
// cubic U[-0.05, 0].
EmitterProfile draw_emitter_profile(int emitter_id, uint64_t seed);

std::vector<EmitterProfile> draw_fleet(int n_emitters, uint64_t master_seed);

IqNlTensor to_iqnl(const ComplexSignal& r);

// Affine map of each row into [0,1] using the supplied statistics; values
// outside the stats range are clipped. Throws if a row has max <= min.
IqNlTensor minmax_normalize(const IqNlTensor& t, const RowStats& stats);

// Row-wise min/max over a set of tensors.
RowStats compute_row_stats(const std::vector<IqNlTensor>& tensors);
void accumulate_row_stats(RowStats& stats, const IqNlTensor& t, bool first);

// --- capture files -------------------------------------------------------
// header: magic "RFDNA1\0\0", LE u32 sample count, LE f64 sample rate,
// LE u32 emitter label; payload: interleaved LE f32 I,Q pairs.

struct CaptureMeta {
  uint32_t emitter_label = 0;
};

void write_capture(const std::string& path, const ComplexSignal& x, const CaptureMeta& meta);
ComplexSignal read_capture(const std::string& path, CaptureMeta* meta = nullptr);

}  // namespace rfdna
