#pragma once

// Hand-wired classifier for decision-rule tests. All parameters are zeroed
// except delta kernels that pass input element (0,0)/(0,1) through both conv
// stages, so after pooling the first hidden unit equals
//   v = max(x[0][0], x[0][1])
// and the logits are logit_c = c * v + bias[c]. The argmax as a function of v
// is then hand-computable, which lets the vote/confidence rules be tested
// against known outcomes instead of opaque trained weights.

#include <vector>

#include "rfdna/cgan.hpp"
#include "rfdna/waveform.hpp"

namespace rfdna::testutil {

inline Classifier<float> probe_classifier(int n_labels, int cols, const std::vector<double>& bias) {
  auto cls = build_classifier<float>(n_labels, 4, cols);
  auto& g = cls.net;
  g.init_params(1);
  for (auto& p : g.params()) p.value.fill(0.0f);
  {  // conv1 (16, 1*3*7): output channel 0 = center tap of input channel 0
    const auto& n = g.node(g.find("conv1"));
    g.params()[static_cast<size_t>(n.w_param)].value.data[1 * 7 + 3] = 1.0f;
  }
  {  // conv2 (32, 16*3*5): output channel 0 = center tap of channel 0
    const auto& n = g.node(g.find("conv2"));
    g.params()[static_cast<size_t>(n.w_param)].value.data[(0 * 3 + 1) * 5 + 2] = 1.0f;
  }
  {  // hidden (128, 32*4*(cols/2)): unit 0 picks flattened element 0
    const auto& n = g.node(g.find("hidden"));
    g.params()[static_cast<size_t>(n.w_param)].value.data[0] = 1.0f;
  }
  {  // prob (n_labels, 128): logit_c = c * hidden_0 + bias_c
    const auto& n = g.node(g.find("prob"));
    auto& w = g.params()[static_cast<size_t>(n.w_param)].value;
    auto& b = g.params()[static_cast<size_t>(n.b_param)].value;
    for (int c = 0; c < n_labels; ++c) {
      w.data[static_cast<size_t>(c) * 128] = static_cast<float>(c);
      b.data[static_cast<size_t>(c)] = static_cast<float>(bias[static_cast<size_t>(c)]);
    }
  }
  return cls;
}

// 4 x cols tensor that drives the probe classifier's v to the given value
inline IqNlTensor probe_plane(int cols, double v) {
  IqNlTensor t;
  t.n = cols;
  t.rows.assign(static_cast<size_t>(4 * cols), 0.0);
  t.at(0, 0) = v;
  t.at(0, 1) = v;
  return t;
}

}  // namespace rfdna::testutil
