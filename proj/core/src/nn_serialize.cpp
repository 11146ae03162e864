#include "rfdna/nn/serialize.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace rfdna::nn {

namespace {

constexpr char kMagicPrefix[4] = {'R', 'F', 'N', 'N'};
constexpr char kVersion[4] = {'0', '0', '0', '1'};

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("model file truncated in header");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& os, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(os, bits);
}

}  // namespace

template <typename T>
void save_model(const Graph<T>& g, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os.write(kMagicPrefix, 4);
  os.write(kVersion, 4);
  const std::string desc = g.describe();
  put_u32(os, static_cast<uint32_t>(desc.size()));
  os.write(desc.data(), static_cast<std::streamsize>(desc.size()));
  for (const auto& p : g.params()) {
    for (const T v : p.value.data) put_f32(os, static_cast<float>(v));
  }
  if (!os) throw std::runtime_error("write failed for '" + path + "'");
}

template <typename T>
Graph<T> load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open model file '" + path + "'");
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagicPrefix, 4) != 0) {
    throw std::runtime_error("corrupted model file '" + path + "' (bad magic)");
  }
  if (std::memcmp(magic + 4, kVersion, 4) != 0) {
    throw std::runtime_error("model format version mismatch in '" + path + "': file has '" +
                             std::string(magic + 4, 4) + "', this build reads '" +
                             std::string(kVersion, 4) + "'");
  }
  const uint32_t desc_len = get_u32(is);
  std::string desc(desc_len, '\0');
  is.read(desc.data(), desc_len);
  if (!is) throw std::runtime_error("corrupted model file '" + path + "' (truncated description)");

  Graph<T> g = Graph<T>::from_description(desc);

  for (auto& p : g.params()) {
    for (T& v : p.value.data) {
      const uint32_t bits = [&] {
        unsigned char b[4];
        is.read(reinterpret_cast<char*>(b), 4);
        if (!is) {
          throw std::runtime_error("corrupted model file '" + path + "' (truncated parameters)");
        }
        return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
               (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
      }();
      float f;
      std::memcpy(&f, &bits, 4);
      v = static_cast<T>(f);
    }
  }
  is.peek();
  if (!is.eof()) {
    throw std::runtime_error("corrupted model file '" + path + "' (trailing bytes)");
  }
  return g;
}

template void save_model<float>(const Graph<float>&, const std::string&);
template void save_model<double>(const Graph<double>&, const std::string&);
template Graph<float> load_model<float>(const std::string&);
template Graph<double> load_model<double>(const std::string&);

}  // namespace rfdna::nn
