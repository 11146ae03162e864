#pragma once

// Channel convolution matrix and MMSE equalization.

#include <Eigen/Dense>

#include "rfdna/channel.hpp"
#include "rfdna/waveform.hpp"

namespace rfdna {

// (N + max tau) x N banded Toeplitz matrix A with A(j + tau_k, j) = alpha_k;
// A x equals the noiseless channel convolution.
struct ConvMatrix {
  Eigen::MatrixXcd entries;
  int n_in = 0;   // N
  int n_out = 0;  // N + max tau
};

ConvMatrix conv_matrix(const TapDelayLine& h, int n);

// x_hat = A^H (A A^H + I/gamma)^{-1} r via a Hermitian positive-definite
// solve (no explicit inverse). gamma is the linear SNR; output length is N.
ComplexSignal mmse_equalize(const ComplexSignal& r, const ConvMatrix& A, double snr_linear);

}  // namespace rfdna
