// Copyright 2026 The ssid Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SSID_PEM_HPP
#define SSID_PEM_HPP

#include <stdexcept>
#include <vector>

#include "ssid/kalman.hpp"

namespace ssid {

/// Which LGSS blocks the M-step re-estimates; the remaining matrices
/// (including B, D and the initial-state moments) stay fixed.
struct PemOptions {
  bool update_A = true;
  bool update_C = true;
  bool update_Q = true;
  bool update_R = true;
  int iters = 50;
};

struct PemResult {
  std::vector<LgssSpec> trace;    // iterate after each iteration
  std::vector<double> logliks;    // Kalman log-likelihood at each iterate
  bool regularized = false;       // singular statistics hit the ridge
};

namespace detail {

// Inverse of a (near-)PSD moment matrix; falls back to a ridge when the
// factorization reports a non-positive pivot.
inline Mat moment_inverse(const Mat& S, bool* regularized) {
  Eigen::LDLT<Mat> ldlt(S);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive())
    return ldlt.solve(Mat::Identity(S.rows(), S.cols()));
  *regularized = true;
  double ridge = 1e-9 * (1.0 + S.trace() / S.rows());
  Mat Sr = S + ridge * Mat::Identity(S.rows(), S.cols());
  return Sr.ldlt().solve(Mat::Identity(S.rows(), S.cols()));
}

}  // namespace detail

/// Exact expectation-maximization for linear-Gaussian state-space models:
/// RTS-smoothed sufficient statistics and closed-form block updates. The
/// Kalman-evaluated log-likelihood is non-decreasing along the trace (up to
/// numerical tolerance), which the tests pin at 1e-9.
inline PemResult pem_lgss(LgssSpec spec, const Dataset<Vec>& data,
                          const PemOptions& opt = {}) {
  data.check();
  if (data.T() < 2) throw std::invalid_argument("pem_lgss needs T >= 2");
  const int n = spec.state_dim();
  const int T = data.T();
  PemResult res;

  for (int k = 0; k < opt.iters; ++k) {
    RtsResult rts = rts_smoother(spec, data);
    if (res.logliks.empty()) {
      // Trace starts with the initial iterate for the monotonicity record.
      res.trace.push_back(spec);
      res.logliks.push_back(rts.loglik);
    }

    auto mean = [&](int t) { return rts.smoothed[t].mean; };
    auto cov = [&](int t) { return rts.smoothed[t].cov; };
    auto second = [&](int t) {
      return Mat(rts.smoothed[t].cov + mean(t) * mean(t).transpose());
    };

    // Transition block: x_t = A x_{t-1} + B u_t + v_t, t = 2..T.
    Mat Sxx = Mat::Zero(n, n);   // sum E[x_{t-1} x_{t-1}']
    Mat Sxy = Mat::Zero(n, n);   // sum E[x_t x_{t-1}'] minus input part
    for (int t = 1; t < T; ++t) {
      Vec b = detail::apply_input(spec.B, data.inputs[t]);
      Sxx += second(t - 1);
      Sxy += rts.cross[t - 1] + mean(t) * mean(t - 1).transpose() -
             b * mean(t - 1).transpose();
    }
    Mat A = spec.A;
    if (opt.update_A) A = Sxy * detail::moment_inverse(Sxx, &res.regularized);
    if (opt.update_Q) {
      Mat Q = Mat::Zero(n, n);
      for (int t = 1; t < T; ++t) {
        Vec b = detail::apply_input(spec.B, data.inputs[t]);
        Mat C_t = rts.cross[t - 1];  // Cov(x_t, x_{t-1})
        Vec r = mean(t) - A * mean(t - 1) - b;
        Q += cov(t) - A * C_t.transpose() - C_t * A.transpose() +
             A * cov(t - 1) * A.transpose() + r * r.transpose();
      }
      Q /= (T - 1);
      spec.Q = 0.5 * (Q + Q.transpose());
    }
    if (opt.update_A) spec.A = A;

    // Observation block over the observed steps: y_t = C x_t + D u_t + e_t.
    int n_obs = 0;
    Mat Syx = Mat::Zero(spec.obs_dim(), n);
    Mat Sxx2 = Mat::Zero(n, n);
    for (int t = 0; t < T; ++t) {
      if (!data.observed(t)) continue;
      Vec y = *data.observations[t] - detail::apply_input(spec.D, data.inputs[t]);
      Syx += y * mean(t).transpose();
      Sxx2 += second(t);
      ++n_obs;
    }
    Mat C = spec.C;
    if (opt.update_C && n_obs > 0)
      C = Syx * detail::moment_inverse(Sxx2, &res.regularized);
    if (opt.update_R && n_obs > 0) {
      Mat R = Mat::Zero(spec.obs_dim(), spec.obs_dim());
      for (int t = 0; t < T; ++t) {
        if (!data.observed(t)) continue;
        Vec y = *data.observations[t] - detail::apply_input(spec.D, data.inputs[t]);
        Vec r = y - C * mean(t);
        R += r * r.transpose() + C * cov(t) * C.transpose();
      }
      R /= n_obs;
      spec.R = 0.5 * (R + R.transpose());
    }
    if (opt.update_C) spec.C = C;

    res.trace.push_back(spec);
    res.logliks.push_back(kalman_filter(spec, data).loglik);
  }
  return res;
}

}  // namespace ssid

#endif  // SSID_PEM_HPP
