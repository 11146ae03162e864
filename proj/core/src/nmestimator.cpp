#include "rfdna/nmestimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rfdna {

namespace {

double check_finite(double v) {
  if (!std::isfinite(v)) {
    throw std::runtime_error("nm_minimize: objective returned a non-finite value");
  }
  return v;
}

// rank check via Gaussian elimination on the edge matrix x_i - x_1
bool simplex_degenerate(const std::vector<std::vector<double>>& verts) {
  const size_t d = verts[0].size();
  std::vector<std::vector<double>> m(d, std::vector<double>(d));
  double scale = 0.0;
  for (size_t i = 0; i < d; ++i) {
    for (size_t j = 0; j < d; ++j) {
      m[i][j] = verts[i + 1][j] - verts[0][j];
      scale = std::max(scale, std::abs(m[i][j]));
    }
  }
  if (scale == 0.0) return true;
  const double tol = 1e-12 * scale;
  for (size_t col = 0; col < d; ++col) {
    size_t pivot = col;
    for (size_t row = col + 1; row < d; ++row) {
      if (std::abs(m[row][col]) > std::abs(m[pivot][col])) pivot = row;
    }
    if (std::abs(m[pivot][col]) < tol) return true;
    std::swap(m[col], m[pivot]);
    for (size_t row = col + 1; row < d; ++row) {
      const double f = m[row][col] / m[col][col];
      for (size_t j = col; j < d; ++j) m[row][j] -= f * m[col][j];
    }
  }
  return false;
}

}  // namespace

NmResult nm_minimize(const std::function<double(const std::vector<double>&)>& f,
                     const std::vector<std::vector<double>>& initial_simplex,
                     const NmOptions& opts) {
  if (initial_simplex.empty() || initial_simplex[0].empty()) {
    throw std::invalid_argument("nm_minimize: empty simplex");
  }
  const size_t d = initial_simplex[0].size();
  if (initial_simplex.size() != d + 1) {
    throw std::invalid_argument("nm_minimize: simplex must have d+1 vertices");
  }
  for (const auto& v : initial_simplex) {
    if (v.size() != d) throw std::invalid_argument("nm_minimize: inconsistent vertex dimension");
  }
  if (simplex_degenerate(initial_simplex)) {
    throw std::invalid_argument("nm_minimize: degenerate initial simplex");
  }

  const double rho = opts.reflect, chi = opts.expand, gamma = opts.contract, sigma = opts.shrink;
  const int max_iters = opts.max_iters > 0 ? opts.max_iters : 2000 * static_cast<int>(d);

  std::vector<std::vector<double>> verts = initial_simplex;
  std::vector<double> fv(d + 1);
  for (size_t i = 0; i <= d; ++i) fv[i] = check_finite(f(verts[i]));

  std::vector<size_t> order(d + 1);
  auto sort_verts = [&]() {
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return fv[a] < fv[b]; });
    std::vector<std::vector<double>> nv(d + 1);
    std::vector<double> nf(d + 1);
    for (size_t i = 0; i <= d; ++i) {
      nv[i] = std::move(verts[order[i]]);
      nf[i] = fv[order[i]];
    }
    verts = std::move(nv);
    fv = std::move(nf);
  };
  sort_verts();

  std::vector<double> centroid(d), xr(d), xe(d), xc(d);
  std::vector<std::vector<double>> prev(d);
  int iter = 0;
  while (iter < max_iters) {
    for (size_t i = 0; i < d; ++i) prev[i] = verts[i];

    // centroid of the d best vertices
    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (size_t i = 0; i < d; ++i) {
      for (size_t j = 0; j < d; ++j) centroid[j] += verts[i][j];
    }
    for (size_t j = 0; j < d; ++j) centroid[j] /= static_cast<double>(d);

    for (size_t j = 0; j < d; ++j) xr[j] = centroid[j] + rho * (centroid[j] - verts[d][j]);
    const double fr = check_finite(f(xr));

    bool do_shrink = false;
    if (fr < fv[0]) {
      // expand
      for (size_t j = 0; j < d; ++j) xe[j] = centroid[j] + rho * chi * (centroid[j] - verts[d][j]);
      const double fe = check_finite(f(xe));
      if (fe < fr) {
        verts[d] = xe;
        fv[d] = fe;
      } else {
        verts[d] = xr;
        fv[d] = fr;
      }
    } else if (fr < fv[d - 1]) {
      verts[d] = xr;
      fv[d] = fr;
    } else if (fr < fv[d]) {
      // outside contraction
      for (size_t j = 0; j < d; ++j) {
        xc[j] = centroid[j] + gamma * rho * (centroid[j] - verts[d][j]);
      }
      const double fc = check_finite(f(xc));
      if (fc <= fr) {
        verts[d] = xc;
        fv[d] = fc;
      } else {
        do_shrink = true;
      }
    } else {
      // inside contraction
      for (size_t j = 0; j < d; ++j) xc[j] = centroid[j] - gamma * (centroid[j] - verts[d][j]);
      const double fc = check_finite(f(xc));
      if (fc < fv[d]) {
        verts[d] = xc;
        fv[d] = fc;
      } else {
        do_shrink = true;
      }
    }
    if (do_shrink) {
      // v_i = x_1 + sigma (x_i - x_1) for all but the best vertex
      for (size_t i = 1; i <= d; ++i) {
        for (size_t j = 0; j < d; ++j) verts[i][j] = verts[0][j] + sigma * (verts[i][j] - verts[0][j]);
        fv[i] = check_finite(f(verts[i]));
      }
    }
    sort_verts();
    ++iter;  // count this iteration before the end-of-iteration tests

    // value-spread test
    double fbar = 0.0;
    for (size_t i = 0; i <= d; ++i) fbar += fv[i];
    fbar /= static_cast<double>(d + 1);
    double vspread = 0.0;
    for (size_t i = 0; i <= d; ++i) vspread += (fv[i] - fbar) * (fv[i] - fbar);
    vspread /= static_cast<double>(d);

    // vertex-movement test over the d best vertices
    double move = 0.0;
    for (size_t i = 0; i < d; ++i) {
      for (size_t j = 0; j < d; ++j) {
        const double dx = verts[i][j] - prev[i][j];
        move += dx * dx;
      }
    }
    move /= static_cast<double>(d);

    if (vspread < opts.eps1 && move < opts.eps2) break;
  }

  return NmResult{verts[0], fv[0], iter};
}

namespace {

// Least-squares objective over u in R^{2L} expressed as the quadratic form
// f(u) = u'Gu - 2h'u + c; algebraically identical to the per-sample squared
// error but O(L^2) per evaluation instead of O(N L).
struct QuadObjective {
  std::vector<double> G;  // 2L x 2L, row-major
  std::vector<double> h;
  double c = 0.0;
  int d = 0;

  double operator()(const std::vector<double>& u) const {
    double quad = 0.0, lin = 0.0;
    for (int i = 0; i < d; ++i) {
      double gi = 0.0;
      const double* row = &G[static_cast<size_t>(i) * d];
      for (int j = 0; j < d; ++j) gi += row[j] * u[j];
      quad += u[i] * gi;
      lin += h[i] * u[i];
    }
    return quad - 2.0 * lin + c;
  }
};

// columns(m, 2k) and (m, 2k+1) are the coefficients of (a_k, b_k) in the
// chosen part of sum_k alpha_k x(m - tau_k)
QuadObjective build_quad(const std::vector<std::vector<double>>& cols,
                         const std::vector<double>& target) {
  const int d = static_cast<int>(cols.size());
  const size_t n = target.size();
  QuadObjective q;
  q.d = d;
  q.G.assign(static_cast<size_t>(d) * d, 0.0);
  q.h.assign(d, 0.0);
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      double s = 0.0;
      for (size_t m = 0; m < n; ++m) s += cols[i][m] * cols[j][m];
      q.G[static_cast<size_t>(i) * d + j] = s;
      q.G[static_cast<size_t>(j) * d + i] = s;
    }
    double s = 0.0;
    for (size_t m = 0; m < n; ++m) s += cols[i][m] * target[m];
    q.h[i] = s;
  }
  for (double v : target) q.c += v * v;
  return q;
}

}  // namespace

ChannelEstimate estimate_channel(const ComplexSignal& r, const ComplexSignal& candidate, int L,
                                 const NmOptions& opts) {
  if (L < 1) throw std::invalid_argument("estimate_channel: L must be >= 1");
  if (candidate.samples.size() > r.samples.size()) {
    throw std::invalid_argument("estimate_channel: candidate longer than received signal");
  }
  const int n = static_cast<int>(r.samples.size());
  const int d = 2 * L;

  // shifted candidate copies x(m - tau_k), tau_k = k - 1
  std::vector<std::vector<double>> shifted_re(L, std::vector<double>(n, 0.0));
  std::vector<std::vector<double>> shifted_im(L, std::vector<double>(n, 0.0));
  for (int k = 0; k < L; ++k) {
    for (int m = k; m < n; ++m) {
      const int src = m - k;
      if (src >= static_cast<int>(candidate.samples.size())) continue;
      shifted_re[k][m] = candidate.samples[static_cast<size_t>(src)].real();
      shifted_im[k][m] = candidate.samples[static_cast<size_t>(src)].imag();
    }
  }

  // real part:  Re model = a_k Re x_k - b_k Im x_k
  // imag part:  Im model = a_k Im x_k + b_k Re x_k
  std::vector<std::vector<double>> cols_re(d), cols_im(d);
  for (int k = 0; k < L; ++k) {
    cols_re[2 * k] = shifted_re[k];
    cols_re[2 * k + 1].resize(n);
    for (int m = 0; m < n; ++m) cols_re[2 * k + 1][m] = -shifted_im[k][m];
    cols_im[2 * k] = shifted_im[k];
    cols_im[2 * k + 1] = shifted_re[k];
  }
  std::vector<double> target_re(n), target_im(n);
  for (int m = 0; m < n; ++m) {
    target_re[m] = r.samples[static_cast<size_t>(m)].real();
    target_im[m] = r.samples[static_cast<size_t>(m)].imag();
  }

  const QuadObjective f_re = build_quad(cols_re, target_re);
  const QuadObjective f_im = build_quad(cols_im, target_im);

  // origin vertex plus 0.1 perturbations along each coordinate
  std::vector<std::vector<double>> simplex(static_cast<size_t>(d) + 1, std::vector<double>(d, 0.0));
  for (int i = 0; i < d; ++i) simplex[static_cast<size_t>(i) + 1][i] = 0.1;

  const NmResult res_re = nm_minimize([&](const std::vector<double>& u) { return f_re(u); },
                                      simplex, opts);
  const NmResult res_im = nm_minimize([&](const std::vector<double>& u) { return f_im(u); },
                                      simplex, opts);

  ChannelEstimate est;
  est.coeffs.resize(L);
  est.delays.resize(L);
  for (int k = 0; k < L; ++k) {
    const double a = 0.5 * (res_re.argmin[2 * k] + res_im.argmin[2 * k]);
    const double b = 0.5 * (res_re.argmin[2 * k + 1] + res_im.argmin[2 * k + 1]);
    est.coeffs[k] = cplx{a, b};
    est.delays[k] = k;
  }

  // full complex squared error at the averaged estimate
  double obj = 0.0;
  for (int m = 0; m < n; ++m) {
    cplx model{0.0, 0.0};
    for (int k = 0; k < L; ++k) {
      model += est.coeffs[k] * cplx{shifted_re[k][m], shifted_im[k][m]};
    }
    obj += std::norm(r.samples[static_cast<size_t>(m)] - model);
  }
  est.objective_value = obj;
  return est;
}

double residual_power(const ComplexSignal& r, const ComplexSignal& candidate,
                      const ChannelEstimate& est) {
  TapDelayLine h{est.coeffs, est.delays};
  const ComplexSignal y = apply_channel(candidate, h);
  const size_t n = std::max(r.samples.size(), y.samples.size());
  double res = 0.0;
  for (size_t m = 0; m < n; ++m) {
    const cplx rm = m < r.samples.size() ? r.samples[m] : cplx{0.0, 0.0};
    const cplx ym = m < y.samples.size() ? y.samples[m] : cplx{0.0, 0.0};
    res += std::norm(rm - ym);
  }
  return res;
}

ChannelEstimate select_best(const ComplexSignal& r, const std::vector<ComplexSignal>& candidates,
                            const std::vector<ChannelEstimate>& estimates) {
  if (candidates.empty()) throw std::invalid_argument("select_best: empty candidate list");
  if (candidates.size() != estimates.size()) {
    throw std::invalid_argument("select_best: candidate/estimate list size mismatch");
  }
  size_t best = 0;
  double best_res = residual_power(r, candidates[0], estimates[0]);
  for (size_t i = 1; i < candidates.size(); ++i) {
    const double res = residual_power(r, candidates[i], estimates[i]);
    if (res < best_res) {
      best_res = res;
      best = i;
    }
  }
  ChannelEstimate out = estimates[best];
  out.candidate_index = static_cast<int>(best);
  return out;
}

}  // namespace rfdna
