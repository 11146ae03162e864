#pragma once

// Central-difference verification of the analytic gradients. Run on the
// float64 instantiation of Graph; float32 has too little headroom for the
// 1e-5 step. Dropout workspaces must be put in freeze-mask mode by the
// caller so the two perturbed forward passes see identical masks.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "rfdna/nn/graph.hpp"
#include "rfdna/rng.hpp"

namespace rfdna::nn {

struct GradCheckReport {
  double max_rel_err = 0.0;
  size_t n_checked = 0;
  int worst_param = -1;
  size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// loss_fn: pure function of the graph's current parameters (stage inputs,
// forward, reduce to a scalar). grad_fn: zero grads, forward + backward with
// the analytic seed, leaving gradients in graph.params(). max_checks > 0
// subsamples the parameter set deterministically; 0 checks everything.
inline GradCheckReport gradcheck(Graph<double>& g, const std::function<double()>& loss_fn,
                                 const std::function<void()>& grad_fn, double eps = 1e-5,
                                 size_t max_checks = 0, uint64_t select_seed = 7) {
  grad_fn();
  auto& params = g.params();
  std::vector<std::pair<int, size_t>> picks;
  size_t total = 0;
  for (const auto& p : params) total += p.value.data.size();
  if (max_checks == 0 || max_checks >= total) {
    for (size_t pi = 0; pi < params.size(); ++pi) {
      for (size_t j = 0; j < params[pi].value.data.size(); ++j) {
        picks.emplace_back(static_cast<int>(pi), j);
      }
    }
  } else {
    // spread the budget over every tensor, then fill randomly
    Rng rng(select_seed);
    const size_t per = std::max<size_t>(1, max_checks / params.size());
    for (size_t pi = 0; pi < params.size(); ++pi) {
      const size_t n = params[pi].value.data.size();
      for (size_t r = 0; r < per && r < n; ++r) {
        picks.emplace_back(static_cast<int>(pi), rng.below(n));
      }
    }
    while (picks.size() < max_checks) {
      const size_t pi = rng.below(params.size());
      picks.emplace_back(static_cast<int>(pi), rng.below(params[pi].value.data.size()));
    }
  }

  GradCheckReport rep;
  for (const auto& [pi, j] : picks) {
    const double analytic = params[static_cast<size_t>(pi)].grad.data[j];
    double& v = params[static_cast<size_t>(pi)].value.data[j];
    const double keep = v;
    v = keep + eps;
    const double lp = loss_fn();
    v = keep - eps;
    const double lm = loss_fn();
    v = keep;
    const double numeric = (lp - lm) / (2.0 * eps);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    const double rel = std::abs(analytic - numeric) / denom;
    ++rep.n_checked;
    if (rel > rep.max_rel_err) {
      rep.max_rel_err = rel;
      rep.worst_param = pi;
      rep.worst_index = j;
      rep.worst_analytic = analytic;
      rep.worst_numeric = numeric;
    }
  }
  return rep;
}

}  // namespace rfdna::nn
