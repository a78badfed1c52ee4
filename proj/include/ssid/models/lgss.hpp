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

#ifndef SSID_MODELS_LGSS_HPP
#define SSID_MODELS_LGSS_HPP

#include <cmath>
#include <functional>

#include "ssid/kalman.hpp"
#include "ssid/model.hpp"

namespace ssid {

inline Vec mvn_sample(const Vec& mean, const Mat& cov, RandomStream& rng) {
  Eigen::LLT<Mat> llt(cov);
  Vec z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = draw_normal(rng);
  return mean + llt.matrixL() * z;
}

namespace detail {

inline Vec apply_input(const Mat& M, const Vec& u) {
  return u.size() > 0 ? Vec(M * u) : Vec(Vec::Zero(M.rows()));
}

}  // namespace detail

/// Linear-Gaussian state-space model whose matrices are rebuilt from theta
/// by `build` on every density evaluation.
inline StateSpaceModel<Vec> make_lgss(
    std::function<LgssSpec(const ParameterVector&)> build) {
  StateSpaceModel<Vec> m;
  m.initial_sampler = [build](const ParameterVector& th, RandomStream& rng) {
    LgssSpec s = build(th);
    return mvn_sample(s.mu1, s.Sigma1, rng);
  };
  m.initial_logpdf = [build](const Vec& x, const ParameterVector& th) {
    LgssSpec s = build(th);
    return mvn_logpdf(x, s.mu1, s.Sigma1);
  };
  m.transition_sampler = [build](const Vec& xp, const Vec& u, int /*t*/,
                                 const ParameterVector& th, RandomStream& rng) {
    LgssSpec s = build(th);
    return mvn_sample(s.A * xp + detail::apply_input(s.B, u), s.Q, rng);
  };
  m.transition_logpdf = [build](const Vec& x, const Vec& xp, const Vec& u,
                                int /*t*/, const ParameterVector& th) {
    LgssSpec s = build(th);
    return mvn_logpdf(x, s.A * xp + detail::apply_input(s.B, u), s.Q);
  };
  m.observation_logpdf = [build](const Vec& y, const Vec& x, const Vec& u,
                                 int /*t*/, const ParameterVector& th) {
    LgssSpec s = build(th);
    return mvn_logpdf(y, s.C * x + detail::apply_input(s.D, u), s.R);
  };
  m.observation_sampler = [build](const Vec& x, const Vec& u, int /*t*/,
                                  const ParameterVector& th, RandomStream& rng) {
    LgssSpec s = build(th);
    return mvn_sample(s.C * x + detail::apply_input(s.D, u), s.R, rng);
  };
  return m;
}

/// theta for the scalar model x_t = a x_{t-1} + v, y_t = c x_t + e with
/// process variance q and measurement variance r. mu1 and sigma1 are fixed.
inline ParameterVector scalar_lgss_theta(double a, double c, double q, double r) {
  ParameterVector th;
  th.add("a", a);
  th.add("c", c);
  th.add("q", q, {0.0, std::numeric_limits<double>::infinity()});
  th.add("r", r, {0.0, std::numeric_limits<double>::infinity()});
  return th;
}

inline LgssSpec scalar_lgss_spec(const ParameterVector& th, double mu1 = 0.0,
                                 double sig1 = 1.0) {
  return LgssSpec::scalar(th.get("a"), th.get("c"), th.get("q"), th.get("r"),
                          mu1, sig1);
}

/// Scalar LGSS with analytic first and second parameter derivatives of the
/// transition and observation log-densities (layout: a, c, q, r).
inline StateSpaceModel<Vec> make_scalar_lgss(double mu1 = 0.0, double sig1 = 1.0) {
  auto build = [mu1, sig1](const ParameterVector& th) {
    return scalar_lgss_spec(th, mu1, sig1);
  };
  StateSpaceModel<Vec> m = make_lgss(build);
  m.state_dim = 1;
  m.param_names = {"a", "c", "q", "r"};

  GradLogs<Vec, Vec> g;
  g.grad_initial = [](const Vec&, const ParameterVector& th) {
    return Vec::Zero(th.size());
  };
  g.grad_transition = [](const Vec& x, const Vec& xp, const Vec&, int,
                         const ParameterVector& th) {
    double a = th.get("a"), q = th.get("q");
    double e = x[0] - a * xp[0];
    Vec grad = Vec::Zero(th.size());
    grad[th.index_of("a")] = e * xp[0] / q;
    grad[th.index_of("q")] = -0.5 / q + 0.5 * e * e / (q * q);
    return grad;
  };
  g.hess_transition = [](const Vec& x, const Vec& xp, const Vec&, int,
                         const ParameterVector& th) {
    double a = th.get("a"), q = th.get("q");
    double e = x[0] - a * xp[0];
    Mat h = Mat::Zero(th.size(), th.size());
    auto ia = th.index_of("a"), iq = th.index_of("q");
    h(ia, ia) = -xp[0] * xp[0] / q;
    h(ia, iq) = h(iq, ia) = -e * xp[0] / (q * q);
    h(iq, iq) = 0.5 / (q * q) - e * e / (q * q * q);
    return h;
  };
  g.grad_observation = [](const Vec& y, const Vec& x, const Vec&, int,
                          const ParameterVector& th) {
    double c = th.get("c"), r = th.get("r");
    double e = y[0] - c * x[0];
    Vec grad = Vec::Zero(th.size());
    grad[th.index_of("c")] = e * x[0] / r;
    grad[th.index_of("r")] = -0.5 / r + 0.5 * e * e / (r * r);
    return grad;
  };
  g.hess_observation = [](const Vec& y, const Vec& x, const Vec&, int,
                          const ParameterVector& th) {
    double c = th.get("c"), r = th.get("r");
    double e = y[0] - c * x[0];
    Mat h = Mat::Zero(th.size(), th.size());
    auto ic = th.index_of("c"), ir = th.index_of("r");
    h(ic, ic) = -x[0] * x[0] / r;
    h(ic, ir) = h(ir, ic) = -e * x[0] / (r * r);
    h(ir, ir) = 0.5 / (r * r) - e * e / (r * r * r);
    return h;
  };
  m.grad_logs = g;
  return m;
}

}  // namespace ssid

#endif  // SSID_MODELS_LGSS_HPP
