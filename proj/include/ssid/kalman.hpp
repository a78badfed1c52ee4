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

#ifndef SSID_KALMAN_HPP
#define SSID_KALMAN_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "ssid/dataset.hpp"
#include "ssid/parameters.hpp"

namespace ssid {

/// Linear-Gaussian state-space specification:
///   x_t = A x_{t-1} + B u_t + v_t,  v_t ~ N(0, Q)
///   y_t = C x_t + D u_t + e_t,      e_t ~ N(0, R)
///   x_1 ~ N(mu1, Sigma1)
struct LgssSpec {
  Mat A, B, C, D, Q, R;
  Vec mu1;
  Mat Sigma1;

  int state_dim() const { return static_cast<int>(A.rows()); }
  int obs_dim() const { return static_cast<int>(C.rows()); }

  static LgssSpec scalar(double a, double c, double q, double r, double mu1,
                         double sig1, double b = 0.0, double d = 0.0) {
    LgssSpec s;
    s.A = Mat::Constant(1, 1, a);
    s.B = Mat::Constant(1, 1, b);
    s.C = Mat::Constant(1, 1, c);
    s.D = Mat::Constant(1, 1, d);
    s.Q = Mat::Constant(1, 1, q);
    s.R = Mat::Constant(1, 1, r);
    s.mu1 = Vec::Constant(1, mu1);
    s.Sigma1 = Mat::Constant(1, 1, sig1);
    return s;
  }
};

struct GaussianBelief {
  Vec mean;
  Mat cov;
};

struct KalmanResult {
  std::vector<GaussianBelief> predicted;  // p(x_t | y_{1:t-1})
  std::vector<GaussianBelief> filtered;   // p(x_t | y_{1:t})
  double loglik = 0.0;
};

inline Vec input_or_zero(const Dataset<Vec>& data, int t, int dim) {
  if (t < data.T() && data.inputs[t].size() > 0) return data.inputs[t];
  return Vec::Zero(dim);
}

inline double mvn_logpdf(const Vec& x, const Vec& mean, const Mat& cov) {
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("covariance not positive definite");
  Vec r = llt.matrixL().solve(x - mean);
  double logdet = 0.0;
  for (int i = 0; i < cov.rows(); ++i) logdet += std::log(llt.matrixL()(i, i));
  return -0.5 * x.size() * std::log(2.0 * M_PI) - logdet - 0.5 * r.squaredNorm();
}

/// Exact filtering moments and log-likelihood for an LGSS. Missing
/// observations skip the update step. Joseph-form covariance update.
inline KalmanResult kalman_filter(const LgssSpec& spec,
                                  const Dataset<Vec>& data) {
  const int n = spec.state_dim();
  const int ub = static_cast<int>(spec.B.cols());
  KalmanResult res;
  Vec m = spec.mu1;
  Mat P = spec.Sigma1;
  for (int t = 0; t < data.T(); ++t) {
    if (t > 0) {
      Vec u = input_or_zero(data, t, ub);
      m = spec.A * m + spec.B * u;
      P = spec.A * P * spec.A.transpose() + spec.Q;
      P = 0.5 * (P + P.transpose());
    }
    res.predicted.push_back({m, P});
    if (data.observations[t]) {
      Vec ud = input_or_zero(data, t, static_cast<int>(spec.D.cols()));
      Vec yhat = spec.C * m + spec.D * ud;
      Mat S = spec.C * P * spec.C.transpose() + spec.R;
      S = 0.5 * (S + S.transpose());
      Eigen::LLT<Mat> llt(S);
      if (llt.info() != Eigen::Success)
        throw std::runtime_error("singular innovation covariance at step " +
                                 std::to_string(t + 1));
      res.loglik += mvn_logpdf(*data.observations[t], yhat, S);
      Mat K = P * spec.C.transpose() * llt.solve(Mat::Identity(S.rows(), S.cols()));
      m = m + K * (*data.observations[t] - yhat);
      Mat IKC = Mat::Identity(n, n) - K * spec.C;
      P = IKC * P * IKC.transpose() + K * spec.R * K.transpose();
      P = 0.5 * (P + P.transpose());
    }
    res.filtered.push_back({m, P});
  }
  return res;
}

struct RtsResult {
  std::vector<GaussianBelief> smoothed;
  /// cross[t] = Cov(x_{t+1}, x_t | y_{1:T}), for t = 0..T-2.
  std::vector<Mat> cross;
  double loglik = 0.0;
};

/// Fixed-interval Rauch-Tung-Striebel smoothing moments and pairwise
/// cross-covariances.
inline RtsResult rts_smoother(const LgssSpec& spec, const Dataset<Vec>& data) {
  KalmanResult kf = kalman_filter(spec, data);
  const int T = data.T();
  RtsResult res;
  res.loglik = kf.loglik;
  res.smoothed.resize(T);
  res.cross.resize(T > 0 ? T - 1 : 0);
  res.smoothed[T - 1] = kf.filtered[T - 1];
  for (int t = T - 2; t >= 0; --t) {
    const Mat& Pf = kf.filtered[t].cov;
    const Mat& Pp = kf.predicted[t + 1].cov;
    Mat G = Pf * spec.A.transpose() *
            Pp.ldlt().solve(Mat::Identity(Pp.rows(), Pp.cols()));
    res.smoothed[t].mean =
        kf.filtered[t].mean + G * (res.smoothed[t + 1].mean - kf.predicted[t + 1].mean);
    res.smoothed[t].cov =
        Pf + G * (res.smoothed[t + 1].cov - Pp) * G.transpose();
    res.smoothed[t].cov = 0.5 * (res.smoothed[t].cov + res.smoothed[t].cov.transpose());
    res.cross[t] = res.smoothed[t + 1].cov * G.transpose();
  }
  return res;
}

}  // namespace ssid

#endif  // SSID_KALMAN_HPP
