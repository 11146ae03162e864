#pragma once

// Nelder-Mead simplex minimizer and its application to multipath channel
// coefficient estimation with residual-power candidate selection.

#include <functional>
#include <vector>

#include "rfdna/channel.hpp"
#include "rfdna/waveform.hpp"

namespace rfdna {

struct NmOptions {
  double reflect = 1.0;
  double expand = 2.0;
  double contract = 0.5;
  double shrink = 0.5;
  double eps1 = 1e-8;   // tolerance on the vertex-value variance test
  double eps2 = 1e-8;   // tolerance on the mean squared vertex movement test
  int max_iters = 0;    // 0 -> 2000 * d
};

struct NmResult {
  std::vector<double> argmin;
  double value = 0.0;
  int iters = 0;
};

struct ChannelEstimate {
  std::vector<cplx> coeffs;
  std::vector<int> delays;
  double objective_value = 0.0;
  int candidate_index = -1;
};

// Minimizes f over d reals from a (d+1)-vertex simplex. Terminates when both
// convergence tests hold at the end of an iteration:
//   (1/d) sum_{i=1..d+1} (f(x_i) - fbar)^2 < eps1   and
//   (1/d) sum_{i=1..d}   |x_i moved this iteration|^2 < eps2,
// or when max_iters is reached. Throws on a degenerate simplex or a
// non-finite objective value.
NmResult nm_minimize(const std::function<double(const std::vector<double>&)>& f,
                     const std::vector<std::vector<double>>& initial_simplex,
                     const NmOptions& opts);

// Fits L complex taps (delays fixed at tau_k = k-1) so the weighted, delayed
// copies of `candidate` match `r` in the least-squares sense. The objective
// is split into real-part and imaginary-part problems over 2L reals each
// (Re/Im interleaved), solved independently, and the coefficient estimates
// averaged. objective_value is the full complex squared error at the average.
ChannelEstimate estimate_channel(const ComplexSignal& r, const ComplexSignal& candidate, int L,
                                 const NmOptions& opts);

// Residual-power selection: returns the estimate minimizing
// sum_m |r(m) - (h_c * x_c)(m)|^2; ties go to the lowest index.
// candidate_index is set on the returned estimate.
ChannelEstimate select_best(const ComplexSignal& r, const std::vector<ComplexSignal>& candidates,
                            const std::vector<ChannelEstimate>& estimates);

// The residual power of one (candidate, estimate) pair; exposed for tests.
double residual_power(const ComplexSignal& r, const ComplexSignal& candidate,
                      const ChannelEstimate& est);

}  // namespace rfdna
