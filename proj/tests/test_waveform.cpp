#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <vector>

#include "rfdna/waveform.hpp"

using namespace rfdna;

namespace {

double mean_power(const ComplexSignal& x) {
  double acc = 0.0;
  for (const auto& s : x.samples) acc += std::norm(s);
  return acc / static_cast<double>(x.samples.size());
}

std::filesystem::path temp_file(const char* stem) {
  return std::filesystem::temp_directory_path() / stem;
}

}  // namespace

TEST_SUITE("waveform") {

TEST_CASE("preamble has the standard length, rate, and unit mean power") {
  const auto x = synthesize_preamble(20e6);
  CHECK(x.samples.size() == 320);
  CHECK(x.sample_rate_hz == doctest::Approx(20e6));
  CHECK(mean_power(x) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("preamble rejects unsupported sample rates") {
  CHECK_THROWS_WITH_AS(synthesize_preamble(25e6),
                       "synthesize_preamble: unsupported sample rate (only 20 MHz)",
                       std::invalid_argument);
  CHECK_THROWS_AS(synthesize_preamble(0.0), std::invalid_argument);
}

TEST_CASE("preamble structure: short symbols repeat with period 16") {
  const auto x = synthesize_preamble(20e6);
  // ten identical short symbols occupy the first 160 samples
  for (int n = 0; n + 16 < 160; ++n) {
    CHECK(std::abs(x.samples[n + 16] - x.samples[n]) < 1e-12);
  }
}

TEST_CASE("preamble structure: long symbols repeat with period 64 after the guard") {
  const auto x = synthesize_preamble(20e6);
  for (int n = 192; n + 64 < 320; ++n) {
    CHECK(std::abs(x.samples[n + 64] - x.samples[n]) < 1e-12);
  }
  // the 32-sample guard interval is a cyclic prefix of the long symbol
  for (int i = 0; i < 32; ++i) {
    CHECK(std::abs(x.samples[160 + i] - x.samples[224 + i]) < 1e-12);
  }
}

TEST_CASE("identity impairment profile is a bit-for-bit no-op") {
  const auto x = synthesize_preamble(20e6);
  EmitterProfile p;  // all defaults: gain 1, phase 0, dc 0, cfo 0, cubic 0
  const auto y = apply_impairments(x, p);
  REQUIRE(y.samples.size() == x.samples.size());
  for (size_t i = 0; i < x.samples.size(); ++i) CHECK(y.samples[i] == x.samples[i]);
}

TEST_CASE("dc offset shifts the sample mean by exactly the offset") {
  const auto x = synthesize_preamble(20e6);
  EmitterProfile p;
  p.dc_offset = cplx(0.02, 0.0);
  const auto y = apply_impairments(x, p);
  cplx mx{0, 0}, my{0, 0};
  for (size_t i = 0; i < x.samples.size(); ++i) {
    mx += x.samples[i];
    my += y.samples[i];
  }
  const cplx shift = (my - mx) / static_cast<double>(x.samples.size());
  CHECK(std::abs(shift - cplx(0.02, 0.0)) < 1e-12);
}

TEST_CASE("cubic nonlinearity scales a constant-envelope signal uniformly") {
  ComplexSignal x;
  x.sample_rate_hz = 20e6;
  for (int n = 0; n < 64; ++n) {
    x.samples.push_back(std::polar(1.0, 0.1 * n));  // |x| = 1 everywhere
  }
  EmitterProfile p;
  p.pa_cubic_coeff = -0.05;
  const auto y = apply_impairments(x, p);
  for (size_t i = 0; i < x.samples.size(); ++i) {
    CHECK(std::abs(y.samples[i] - 0.95 * x.samples[i]) < 1e-12);
  }
}

TEST_CASE("gain/phase imbalance matches the direct-conversion model") {
  const auto x = synthesize_preamble(20e6);
  EmitterProfile p;
  p.iq_gain_imbalance = 0.9;
  p.iq_phase_imbalance_rad = 2.0 * std::numbers::pi / 180.0;
  const auto y = apply_impairments(x, p);
  const cplx ge = p.iq_gain_imbalance * std::exp(cplx(0.0, p.iq_phase_imbalance_rad));
  const cplx a = (1.0 + ge) / 2.0;
  const cplx b = (1.0 - ge) / 2.0;
  for (size_t i = 0; i < x.samples.size(); ++i) {
    CHECK(std::abs(y.samples[i] - (a * x.samples[i] + b * std::conj(x.samples[i]))) < 1e-12);
  }
}

TEST_CASE("cfo rotates sample n by 2*pi*f*n/fs") {
  const auto x = synthesize_preamble(20e6);
  EmitterProfile p;
  p.residual_cfo_hz = 250.0;
  const auto y = apply_impairments(x, p);
  for (size_t n = 0; n < x.samples.size(); ++n) {
    const double ph = 2.0 * std::numbers::pi * p.residual_cfo_hz * static_cast<double>(n) / 20e6;
    CHECK(std::abs(y.samples[n] - x.samples[n] * std::exp(cplx(0.0, ph))) < 1e-12);
  }
}

TEST_CASE("impairments are deterministic in the profile and input") {
  const auto x = synthesize_preamble(20e6);
  const auto p = draw_emitter_profile(3, 0xfeedULL);
  const auto y1 = apply_impairments(x, p);
  const auto y2 = apply_impairments(x, p);
  for (size_t i = 0; i < y1.samples.size(); ++i) CHECK(y1.samples[i] == y2.samples[i]);
}

TEST_CASE("profile draws stay inside the documented ranges and are seeded") {
  for (uint64_t s = 0; s < 200; ++s) {
    const auto p = draw_emitter_profile(static_cast<int>(s % 7), 0x1000 + s);
    CHECK(p.iq_gain_imbalance >= 0.95);
    CHECK(p.iq_gain_imbalance <= 1.05);
    CHECK(std::abs(p.iq_phase_imbalance_rad) <= 3.0 * std::numbers::pi / 180.0 + 1e-12);
    CHECK(std::abs(p.dc_offset) <= 0.02 + 1e-12);
    CHECK(std::abs(p.residual_cfo_hz) <= 300.0 + 1e-9);
    CHECK(p.pa_cubic_coeff >= -0.05);
    CHECK(p.pa_cubic_coeff <= 0.0);
  }
  const auto a = draw_emitter_profile(1, 42);
  const auto b = draw_emitter_profile(1, 42);
  CHECK(a.iq_gain_imbalance == b.iq_gain_imbalance);
  CHECK(a.dc_offset == b.dc_offset);
  CHECK(a.residual_cfo_hz == b.residual_cfo_hz);
}

TEST_CASE("fleet draw yields distinct per-emitter signatures") {
  const auto fleet = draw_fleet(8, 99);
  REQUIRE(fleet.size() == 8);
  for (int i = 0; i < 8; ++i) CHECK(fleet[i].emitter_id == i);
  for (size_t i = 0; i < fleet.size(); ++i) {
    for (size_t j = i + 1; j < fleet.size(); ++j) {
      const bool differ = fleet[i].iq_gain_imbalance != fleet[j].iq_gain_imbalance ||
                          fleet[i].dc_offset != fleet[j].dc_offset ||
                          fleet[i].residual_cfo_hz != fleet[j].residual_cfo_hz;
      CHECK(differ);
    }
  }
}

TEST_CASE("iq+nl columns match hand-computed values") {
  ComplexSignal x;
  x.sample_rate_hz = 20e6;
  x.samples = {cplx(1.0, 0.0), cplx(0.0, 1.0), cplx(std::numbers::e, 0.0)};
  const auto t = to_iqnl(x);
  REQUIRE(t.n == 3);
  // 1+0j -> I=1, Q=0, ln|.|=0, phase=0
  CHECK(t.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(t.at(1, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(t.at(2, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(t.at(3, 0) == doctest::Approx(0.0).epsilon(1e-12));
  // 0+1j -> I=0, Q=1, ln|.|=0, phase=pi/2
  CHECK(t.at(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(t.at(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(t.at(2, 1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(t.at(3, 1) == doctest::Approx(std::numbers::pi / 2).epsilon(1e-12));
  // e+0j -> ln|.| = 1
  CHECK(t.at(0, 2) == doctest::Approx(std::numbers::e).epsilon(1e-12));
  CHECK(t.at(2, 2) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("iq+nl clamps the magnitude before the log") {
  ComplexSignal x;
  x.sample_rate_hz = 20e6;
  x.samples = {cplx(0.0, 0.0)};
  const auto t = to_iqnl(x);
  CHECK(t.at(2, 0) == doctest::Approx(std::log(kMagnitudeClamp)).epsilon(1e-12));
  CHECK(std::isfinite(t.at(3, 0)));
}

TEST_CASE("min-max normalization maps the stats range onto [0,1] and clips") {
  IqNlTensor t;
  t.n = 3;
  t.rows.assign(12, 0.0);
  for (int r = 0; r < 4; ++r) {
    t.at(r, 0) = 0.0;
    t.at(r, 1) = 5.0;
    t.at(r, 2) = 10.0;
  }
  RowStats st;
  for (int r = 0; r < 4; ++r) {
    st.min[static_cast<size_t>(r)] = 0.0;
    st.max[static_cast<size_t>(r)] = 10.0;
  }
  const auto y = minmax_normalize(t, st);
  for (int r = 0; r < 4; ++r) {
    CHECK(y.at(r, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(y.at(r, 1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(y.at(r, 2) == doctest::Approx(1.0).epsilon(1e-12));
  }
  // out-of-range values clip to the boundary
  t.at(0, 1) = 12.0;
  t.at(1, 1) = -3.0;
  const auto z = minmax_normalize(t, st);
  CHECK(z.at(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(z.at(1, 1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("degenerate stats are rejected with the offending row named") {
  IqNlTensor t;
  t.n = 2;
  t.rows.assign(8, 1.0);
  RowStats st;
  for (int r = 0; r < 4; ++r) {
    st.min[static_cast<size_t>(r)] = 0.0;
    st.max[static_cast<size_t>(r)] = 1.0;
  }
  st.min[2] = 4.0;
  st.max[2] = 4.0;
  CHECK_THROWS_WITH_AS(minmax_normalize(t, st),
                       "minmax_normalize: degenerate stats (max <= min) in row 2",
                       std::invalid_argument);
}

TEST_CASE("row stats are the elementwise min/max over the set") {
  ComplexSignal a, b;
  a.sample_rate_hz = b.sample_rate_hz = 20e6;
  a.samples = {cplx(1.0, -2.0), cplx(0.5, 0.5)};
  b.samples = {cplx(-3.0, 4.0), cplx(2.0, 0.25)};
  const auto ta = to_iqnl(a);
  const auto tb = to_iqnl(b);
  const auto st = compute_row_stats({ta, tb});
  for (int r = 0; r < 4; ++r) {
    double lo = ta.at(r, 0), hi = ta.at(r, 0);
    for (const auto* t : {&ta, &tb}) {
      for (int c = 0; c < t->n; ++c) {
        lo = std::min(lo, t->at(r, c));
        hi = std::max(hi, t->at(r, c));
      }
    }
    CHECK(st.min[static_cast<size_t>(r)] == doctest::Approx(lo).epsilon(1e-15));
    CHECK(st.max[static_cast<size_t>(r)] == doctest::Approx(hi).epsilon(1e-15));
  }
  // incremental accumulation agrees with the batch computation
  RowStats inc;
  accumulate_row_stats(inc, ta, true);
  accumulate_row_stats(inc, tb, false);
  for (size_t r = 0; r < 4; ++r) {
    CHECK(inc.min[r] == st.min[r]);
    CHECK(inc.max[r] == st.max[r]);
  }
  CHECK_THROWS_AS(compute_row_stats({}), std::invalid_argument);
}

TEST_CASE("capture files round-trip at 32-bit precision") {
  const auto path = temp_file("rfdna_test_roundtrip.capt");
  auto x = synthesize_preamble(20e6);
  // quantize the reference to f32 so equality below is exact
  for (auto& s : x.samples) {
    s = cplx(static_cast<double>(static_cast<float>(s.real())),
             static_cast<double>(static_cast<float>(s.imag())));
  }
  CaptureMeta meta;
  meta.emitter_label = 7;
  write_capture(path.string(), x, meta);
  CHECK(std::filesystem::file_size(path) == 24 + 320 * 8);  // header + f32 I/Q pairs
  CaptureMeta got;
  const auto y = read_capture(path.string(), &got);
  CHECK(got.emitter_label == 7);
  CHECK(y.sample_rate_hz == x.sample_rate_hz);
  REQUIRE(y.samples.size() == x.samples.size());
  for (size_t i = 0; i < x.samples.size(); ++i) CHECK(y.samples[i] == x.samples[i]);
  std::filesystem::remove(path);
}

TEST_CASE("capture reader rejects truncated payloads") {
  const auto good = temp_file("rfdna_test_full.capt");
  const auto bad = temp_file("rfdna_test_trunc.capt");
  const auto x = synthesize_preamble(20e6);
  write_capture(good.string(), x, CaptureMeta{});
  {
    std::ifstream in(good, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    bytes.resize(24 + 100);  // header intact, payload cut short
    std::ofstream out(bad, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  CHECK_THROWS_AS(read_capture(bad.string()), std::runtime_error);
  try {
    read_capture(bad.string());
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("truncated payload") != std::string::npos);
  }
  std::filesystem::remove(good);
  std::filesystem::remove(bad);
}

TEST_CASE("capture reader rejects a bad magic and an empty signal") {
  const auto path = temp_file("rfdna_test_magic.capt");
  {
    std::ofstream out(path, std::ios::binary);
    const char junk[32] = "NOTACAPTUREFILE";
    out.write(junk, sizeof(junk));
  }
  CHECK_THROWS_AS(read_capture(path.string()), std::runtime_error);
  std::filesystem::remove(path);
  // the writer accepts a zero-length signal but the reader refuses it
  const auto epath = temp_file("rfdna_test_empty.capt");
  ComplexSignal empty;
  empty.sample_rate_hz = 20e6;
  write_capture(epath.string(), empty, CaptureMeta{});
  CHECK_THROWS_AS(read_capture(epath.string()), std::runtime_error);
  std::filesystem::remove(epath);
}

}  // TEST_SUITE
