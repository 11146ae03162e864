#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "rfdna/waveform.hpp"

namespace rfdna {

namespace {

constexpr char kMagic[8] = {'R', 'F', 'D', 'N', 'A', '1', '\0', '\0'};

// All multi-byte fields are little-endian on disk; the helpers below keep the
// format well-defined regardless of host endianness.
template <typename T>
void put_le(std::string& out, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(reinterpret_cast<char*>(buf), sizeof(T));
}

template <typename T>
T get_le(const unsigned char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

}  // namespace

void write_capture(const std::string& path, const ComplexSignal& x, const CaptureMeta& meta) {
  std::string buf;
  buf.reserve(24 + x.samples.size() * 8);
  buf.append(kMagic, 8);
  put_le<uint32_t>(buf, static_cast<uint32_t>(x.samples.size()));
  put_le<double>(buf, x.sample_rate_hz);
  put_le<uint32_t>(buf, meta.emitter_label);
  for (const cplx& s : x.samples) {
    put_le<float>(buf, static_cast<float>(s.real()));
    put_le<float>(buf, static_cast<float>(s.imag()));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("write_capture: cannot open " + path);
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw std::runtime_error("write_capture: write failed for " + path);
}

ComplexSignal read_capture(const std::string& path, CaptureMeta* meta) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("read_capture: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  if (buf.size() < 24 || std::memcmp(buf.data(), kMagic, 8) != 0) {
    throw std::runtime_error("read_capture: malformed header in " + path);
  }
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
  const uint32_t count = get_le<uint32_t>(p + 8);
  const double rate = get_le<double>(p + 12);
  const uint32_t label = get_le<uint32_t>(p + 20);

  if (count == 0) {
    throw std::runtime_error("read_capture: empty signal (count = 0) in " + path);
  }

  const size_t need = 24 + static_cast<size_t>(count) * 8;
  if (buf.size() < need) {
    throw std::runtime_error("read_capture: truncated payload in " + path);
  }
  if (buf.size() > need) {
    throw std::runtime_error("read_capture: payload length does not match header count in " + path);
  }
  if (!(rate > 0.0)) {
    throw std::runtime_error("read_capture: non-positive sample rate in " + path);
  }

  ComplexSignal x;
  x.sample_rate_hz = rate;
  x.samples.resize(count);
  for (uint32_t i = 0; i < count; ++i) {
    const float re = get_le<float>(p + 24 + 8 * static_cast<size_t>(i));
    const float im = get_le<float>(p + 24 + 8 * static_cast<size_t>(i) + 4);
    x.samples[i] = cplx{static_cast<double>(re), static_cast<double>(im)};
  }
  if (meta) meta->emitter_label = label;
  return x;
}

}  // namespace rfdna
