#include "rfdna/mmse.hpp"

#include <stdexcept>

namespace rfdna {

ConvMatrix conv_matrix(const TapDelayLine& h, int n) {
  if (n < 1) throw std::invalid_argument("conv_matrix: signal length must be >= 1");
  if (h.coeffs.size() != h.delays.size() || h.coeffs.empty()) {
    throw std::invalid_argument("conv_matrix: malformed tap delay line");
  }
  ConvMatrix A;
  A.n_in = n;
  A.n_out = n + h.delays.back();
  A.entries = Eigen::MatrixXcd::Zero(A.n_out, A.n_in);
  for (size_t k = 0; k < h.coeffs.size(); ++k) {
    const int tau = h.delays[k];
    for (int j = 0; j < n; ++j) {
      A.entries(j + tau, j) = h.coeffs[k];
    }
  }
  return A;
}

ComplexSignal mmse_equalize(const ComplexSignal& r, const ConvMatrix& A, double snr_linear) {
  if (!(snr_linear > 0.0)) throw std::invalid_argument("mmse_equalize: snr_linear must be > 0");
  if (static_cast<int>(r.samples.size()) != A.n_out) {
    throw std::invalid_argument("mmse_equalize: received length " +
                                std::to_string(r.samples.size()) + " does not match matrix rows " +
                                std::to_string(A.n_out));
  }

  Eigen::Map<const Eigen::VectorXcd> rv(r.samples.data(), A.n_out);
  Eigen::MatrixXcd M = A.entries * A.entries.adjoint();
  M.diagonal().array() += 1.0 / snr_linear;

  Eigen::LLT<Eigen::MatrixXcd> llt(M);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("mmse_equalize: regularized system not positive definite");
  }
  const Eigen::VectorXcd x = A.entries.adjoint() * llt.solve(rv);

  ComplexSignal out;
  out.sample_rate_hz = r.sample_rate_hz;
  out.samples.assign(x.data(), x.data() + x.size());
  return out;
}

}  // namespace rfdna
