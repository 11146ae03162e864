#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace rfdna::nn {

// Dense row-major tensor. Leading dimension is the batch wherever a batch
// exists; per-sample shapes are (C, H, W) for image-like data and (D) for
// flat vectors.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(count(shape)), T(0));
  }

  static int64_t count(const std::vector<int>& s) {
    int64_t n = 1;
    for (int d : s) {
      if (d <= 0) throw std::invalid_argument("tensor: non-positive dimension");
      n *= d;
    }
    return n;
  }

  int64_t size() const { return static_cast<int64_t>(data.size()); }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }
};

// per-sample tensor -> batch of one (prepends a unit batch dimension)
template <typename T>
Tensor<T> with_batch_dim(Tensor<T> t) {
  t.shape.insert(t.shape.begin(), 1);
  return t;
}

inline std::string shape_str(const std::vector<int>& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

}  // namespace rfdna::nn
