#pragma once

// Model persistence. Layout: 8-byte magic "RFNN0001", little-endian uint32
// byte length of the textual layer description, the description itself
// (Graph::describe), then every parameter tensor as little-endian IEEE-754
// 32-bit floats in declaration order.

#include <string>

#include "rfdna/nn/graph.hpp"

namespace rfdna::nn {

template <typename T>
void save_model(const Graph<T>& g, const std::string& path);

template <typename T>
Graph<T> load_model(const std::string& path);

extern template void save_model<float>(const Graph<float>&, const std::string&);
extern template void save_model<double>(const Graph<double>&, const std::string&);
extern template Graph<float> load_model<float>(const std::string&);
extern template Graph<double> load_model<double>(const std::string&);

}  // namespace rfdna::nn
