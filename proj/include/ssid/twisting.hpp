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

#ifndef SSID_TWISTING_HPP
#define SSID_TWISTING_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ssid/kalman.hpp"
#include "ssid/models/lgss.hpp"
#include "ssid/models/watertank.hpp"
#include "ssid/smc.hpp"

namespace ssid {

/// Mean maps, Jacobians and noise covariances of a (possibly nonlinear)
/// Gaussian-noise model at a fixed theta; the linearization interface the
/// extended Kalman machinery works against.
struct EkfStructure {
  int nx = 0, ny = 0;
  std::function<Vec(const Vec& x, const Vec& u, int t)> f;   // state mean
  std::function<Mat(const Vec& x, const Vec& u, int t)> F;   // df/dx
  std::function<Mat(int t)> Q;
  std::function<Vec(const Vec& x, const Vec& u, int t)> h;   // observation mean
  std::function<Mat(const Vec& x, const Vec& u, int t)> H;   // dh/dx
  std::function<Mat(int t)> R;
  Vec mu1;
  Mat Sigma1;
};

inline EkfStructure lgss_ekf_structure(const LgssSpec& s) {
  EkfStructure e;
  e.nx = s.state_dim();
  e.ny = s.obs_dim();
  e.f = [s](const Vec& x, const Vec& u, int) {
    return Vec(s.A * x + detail::apply_input(s.B, u));
  };
  e.F = [s](const Vec&, const Vec&, int) { return s.A; };
  e.Q = [s](int) { return s.Q; };
  e.h = [s](const Vec& x, const Vec& u, int) {
    return Vec(s.C * x + detail::apply_input(s.D, u));
  };
  e.H = [s](const Vec&, const Vec&, int) { return s.C; };
  e.R = [s](int) { return s.R; };
  e.mu1 = s.mu1;
  e.Sigma1 = s.Sigma1;
  return e;
}

/// Linearization interface of the water-tank model at a fixed theta. The
/// fixed initial state is represented by a tight Gaussian.
inline EkfStructure watertank_ekf_structure(const ParameterVector& th, Vec x1) {
  EkfStructure e;
  e.nx = 2;
  e.ny = 1;
  e.f = [th](const Vec& x, const Vec& u, int) {
    return watertank_mean(x, u, th);
  };
  e.F = [th](const Vec& x, const Vec&, int) { return watertank_jacobian(x, th); };
  e.Q = [q = th.get("sigv2")](int) { return Mat(q * Mat::Identity(2, 2)); };
  e.h = [](const Vec& x, const Vec&, int) { return scalar_vec(tank_cap(x[1])); };
  e.H = [](const Vec& x, const Vec&, int) {
    Mat H(1, 2);
    H << 0.0, (x[1] > 0.0 && x[1] < kTankHeight) ? 1.0 : 0.0;
    return H;
  };
  e.R = [r = th.get("sige2")](int) { return Mat(Mat::Constant(1, 1, r)); };
  e.mu1 = std::move(x1);
  e.Sigma1 = 1e-6 * Mat::Identity(2, 2);
  return e;
}

/// Per-step quadratic log twisting potentials,
///   log psi_t(x) = -1/2 x' a_t x + b_t' x + c_t,
/// approximating ln p(y_{t+1:T} | x_t). The final entry is identically zero
/// (psi_T == 1).
struct TwistTables {
  std::vector<Mat> a;
  std::vector<Vec> b;
  std::vector<double> c;

  int T() const { return static_cast<int>(c.size()); }

  double log_psi(const Vec& x, int t) const {
    return -0.5 * x.dot(a[t] * x) + b[t].dot(x) + c[t];
  }

  TwistingPotential<Vec> potential() const {
    return {[tab = *this](const Vec& x, int t) { return tab.log_psi(x, t); }};
  }
};

namespace detail {

// Observation factor at step t linearized around x0, in information form
// exp(-1/2 x'Lx + eta'x + kappa).
struct InfoForm {
  Mat L;
  Vec eta;
  double kappa;
};

inline InfoForm linearized_obs_info(const EkfStructure& e, const Vec& y,
                                    const Vec& x0, const Vec& u, int t) {
  Mat C = e.H(x0, u, t);
  Mat R = e.R(t);
  Eigen::LLT<Mat> llt(R);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("observation covariance not positive definite");
  Vec ytil = y - e.h(x0, u, t) + C * x0;
  Mat Rinv_C = llt.solve(C);
  double logdetR = 0.0;
  for (int i = 0; i < R.rows(); ++i)
    logdetR += 2.0 * std::log(llt.matrixL()(i, i));
  InfoForm info;
  info.L = C.transpose() * Rinv_C;
  info.eta = Rinv_C.transpose() * ytil;
  info.kappa = -0.5 * (e.ny * std::log(2.0 * M_PI) + logdetR) -
               0.5 * ytil.dot(llt.solve(ytil));
  return info;
}

}  // namespace detail

/// Backward information-form recursion for the twisting potentials,
/// linearized along the forward extended-Kalman filtered means. Exact on
/// LGSS, where the matched proposal then gives a zero-variance logZ.
inline TwistTables ekf_twisting(const EkfStructure& e, const Dataset<Vec>& data) {
  if (!e.f || !e.F || !e.h || !e.H)
    throw std::invalid_argument("ekf_twisting requires mean maps and Jacobians");
  const int T = data.T();
  const int n = e.nx;

  // Forward EKF pass: linearization points.
  std::vector<Vec> means(T);
  Vec m = e.mu1;
  Mat P = e.Sigma1;
  for (int t = 0; t < T; ++t) {
    if (t > 0) {
      Mat F = e.F(m, data.inputs[t], t);
      m = e.f(m, data.inputs[t], t);
      P = F * P * F.transpose() + e.Q(t);
      P = 0.5 * (P + P.transpose());
    }
    if (data.observed(t)) {
      Mat C = e.H(m, data.inputs[t], t);
      Mat S = C * P * C.transpose() + e.R(t);
      Mat K = P * C.transpose() * S.ldlt().solve(Mat::Identity(S.rows(), S.cols()));
      m = m + K * (*data.observations[t] - e.h(m, data.inputs[t], t));
      Mat IKC = Mat::Identity(n, n) - K * C;
      P = IKC * P * IKC.transpose() + K * e.R(t) * K.transpose();
    }
    means[t] = m;
  }

  TwistTables tab;
  tab.a.assign(T, Mat::Zero(n, n));
  tab.b.assign(T, Vec::Zero(n));
  tab.c.assign(T, 0.0);

  for (int t = T - 2; t >= 0; --t) {
    // Factor over x_{t+1}: observation (if present) times psi_{t+1}.
    Mat L = tab.a[t + 1];
    Vec eta = tab.b[t + 1];
    double kappa = tab.c[t + 1];
    if (data.observed(t + 1)) {
      auto info = detail::linearized_obs_info(e, *data.observations[t + 1],
                                              means[t + 1], data.inputs[t + 1],
                                              t + 1);
      L += info.L;
      eta += info.eta;
      kappa += info.kappa;
    }

    // Transition mean linearized at the filtered mean of step t:
    // f(x) ~ A x + c_lin.
    Mat A = e.F(means[t], data.inputs[t + 1], t + 1);
    Vec c_lin = e.f(means[t], data.inputs[t + 1], t + 1) - A * means[t];
    Mat Q = e.Q(t + 1);
    Mat Qi = Q.llt().solve(Mat::Identity(n, n));

    // Gaussian integral of exp(-1/2 x'Lx + eta'x + kappa) against
    // N(x; A z + c_lin, Q), as a quadratic in z.
    Mat S = Qi + L;
    Mat M = S.llt().solve(Mat::Identity(n, n));
    Mat G = Qi - Qi * M * Qi;
    G = 0.5 * (G + G.transpose());
    Vec d = Qi * M * eta;
    double logdet_IQL = 0.0;
    {
      Eigen::PartialPivLU<Mat> lu(Mat::Identity(n, n) + Q * L);
      logdet_IQL = std::log(std::abs(lu.determinant()));
    }
    tab.a[t] = A.transpose() * G * A;
    tab.a[t] = 0.5 * (tab.a[t] + tab.a[t].transpose());
    tab.b[t] = A.transpose() * (d - G * c_lin);
    tab.c[t] = kappa + 0.5 * eta.dot(M * eta) - 0.5 * logdet_IQL -
               0.5 * c_lin.dot(G * c_lin) + d.dot(c_lin);
  }
  return tab;
}

/// Proposal matched to the twisted target: transition x observation
/// (linearized at the propagated mean) x psi_t, a Gaussian per particle.
/// With exact tables (LGSS) every weight is constant across particles and
/// the logZ estimator has zero variance.
inline Proposal<Vec> make_twisted_proposal(const EkfStructure& e,
                                           const TwistTables& tab,
                                           const Dataset<Vec>& data) {
  Proposal<Vec> q;
  q.tag = Proposal<Vec>::Tag::kLocallyOptimalApprox;

  auto posterior = [e, tab, data](const Vec& prior_mean, const Mat& prior_cov,
                                  const Vec& u, int t) {
    const int n = e.nx;
    Mat prec = prior_cov.llt().solve(Mat::Identity(n, n));
    Vec eta = prec * prior_mean;
    prec += tab.a[t];
    eta += tab.b[t];
    if (data.observed(t)) {
      auto info = detail::linearized_obs_info(e, *data.observations[t],
                                              prior_mean, u, t);
      prec += info.L;
      eta += info.eta;
    }
    Mat cov = prec.llt().solve(Mat::Identity(n, n));
    cov = 0.5 * (cov + cov.transpose());
    return GaussianBelief{cov * eta, cov};
  };

  q.init_sampler = [e, posterior](const ParameterVector&, RandomStream& rng) {
    auto g = posterior(e.mu1, e.Sigma1, Vec(0), 0);
    return mvn_sample(g.mean, g.cov, rng);
  };
  q.init_logpdf = [e, posterior](const Vec& x, const ParameterVector&) {
    auto g = posterior(e.mu1, e.Sigma1, Vec(0), 0);
    return mvn_logpdf(x, g.mean, g.cov);
  };
  q.sampler = [e, posterior](const Vec& xp, const Vec& u, int t,
                             const ParameterVector&, RandomStream& rng) {
    auto g = posterior(e.f(xp, u, t), e.Q(t), u, t);
    return mvn_sample(g.mean, g.cov, rng);
  };
  q.logpdf = [e, posterior](const Vec& x, const Vec& xp, const Vec& u, int t,
                            const ParameterVector&) {
    auto g = posterior(e.f(xp, u, t), e.Q(t), u, t);
    return mvn_logpdf(x, g.mean, g.cov);
  };
  return q;
}

}  // namespace ssid

#endif  // SSID_TWISTING_HPP
