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

#ifndef SSID_ESTIMATORS_HPP
#define SSID_ESTIMATORS_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ssid/models/watertank.hpp"
#include "ssid/smc.hpp"
#include "ssid/twisting.hpp"

namespace ssid {

/// Unbiased (in exp) log-likelihood estimate from a bootstrap sweep, or a
/// twisted sweep when a potential is supplied.
template <class State, class Obs>
double estimate_loglik(const StateSpaceModel<State, Obs>& model,
                       const Dataset<Obs>& data, const ParameterVector& theta,
                       int N, RandomStream rng,
                       const TwistingPotential<State>* twist = nullptr) {
  if (data.T() == 0) throw std::invalid_argument("empty dataset");
  return smc_run(model, data, theta, bootstrap_proposal(model), N, rng, twist,
                 ResamplingPolicy{ResamplingScheme::kMultinomial})
      .logz;
}

struct ScoreResult {
  double loglik = 0.0;
  Vec gradient;
  Mat hessian;
};

/// Particle estimate of the log-likelihood, its gradient, and its Hessian in
/// one bootstrap sweep, using per-particle inline accumulators propagated
/// through the ancestor lineage.
///
/// The per-step Hessian aggregate is
///   B_t = sum_j [phi_t^j + gamma_t^j gamma_t^j'] w_t^j - v_t v_t',
/// the sign of the v v' term being fixed so that the total matches finite
/// differences of the exact log-likelihood on LGSS (the information-identity
/// form; verified in the tests).
template <class State, class Obs>
ScoreResult score_and_hessian(const StateSpaceModel<State, Obs>& model,
                              const Dataset<Obs>& data,
                              const ParameterVector& theta, int N,
                              RandomStream rng) {
  if (!model.grad_logs)
    throw std::invalid_argument("model supplies no log-density derivatives");
  const auto& gl = *model.grad_logs;
  const int p = static_cast<int>(theta.size());

  auto ens = smc_run(model, data, theta, bootstrap_proposal(model), N, rng,
                     static_cast<const TwistingPotential<State>*>(nullptr),
                     ResamplingPolicy{ResamplingScheme::kMultinomial});
  const int T = ens.T();

  std::vector<Vec> alpha(N, Vec::Zero(p)), alpha_prev(N, Vec::Zero(p));
  std::vector<Mat> beta(N, Mat::Zero(p, p)), beta_prev(N, Mat::Zero(p, p));

  ScoreResult out;
  out.loglik = ens.logz;
  out.gradient = Vec::Zero(p);
  out.hessian = Mat::Zero(p, p);

  for (int t = 0; t < T; ++t) {
    Vec v = Vec::Zero(p);
    std::vector<Vec> gamma(N);
    std::vector<Mat> phi(N);
    for (int j = 0; j < N; ++j) {
      Vec g = Vec::Zero(p);
      Mat h = Mat::Zero(p, p);
      if (t == 0) {
        g += gl.grad_initial(ens.particles[0][j], theta);
      } else {
        int a = ens.ancestors[t][j];
        const State& xp = ens.particles[t - 1][a];
        g += gl.grad_transition(ens.particles[t][j], xp, data.inputs[t], t, theta) +
             alpha_prev[a];
        h += gl.hess_transition(ens.particles[t][j], xp, data.inputs[t], t, theta) +
             beta_prev[a];
      }
      if (data.observed(t)) {
        g += gl.grad_observation(*data.observations[t], ens.particles[t][j],
                                 data.inputs[t], t, theta);
        h += gl.hess_observation(*data.observations[t], ens.particles[t][j],
                                 data.inputs[t], t, theta);
      }
      gamma[j] = g;
      phi[j] = 0.5 * (h + h.transpose());
      v += ens.norm_weights[t][j] * g;
    }
    Mat B = -v * v.transpose();
    for (int j = 0; j < N; ++j)
      B += ens.norm_weights[t][j] * (phi[j] + gamma[j] * gamma[j].transpose());
    for (int j = 0; j < N; ++j) {
      alpha[j] = gamma[j] - v;
      beta[j] = phi[j] - B;
    }
    out.gradient += v;
    out.hessian += B;
    std::swap(alpha, alpha_prev);
    std::swap(beta, beta_prev);
  }
  out.hessian = 0.5 * (out.hessian + out.hessian.transpose());
  return out;
}

/// Noise-free mean-map rollout of an LGSS.
inline std::vector<Vec> simulate_output(const LgssSpec& s,
                                        const std::vector<Vec>& inputs) {
  std::vector<Vec> yhat;
  Vec x = s.mu1;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    if (t > 0) x = s.A * x + detail::apply_input(s.B, inputs[t]);
    yhat.push_back(s.C * x + detail::apply_input(s.D, inputs[t]));
  }
  return yhat;
}

/// Noise-free rollout of the water-tank mean maps with the level caps
/// applied, starting from x1.
inline std::vector<Vec> watertank_simulate_output(const ParameterVector& theta,
                                                  const std::vector<Vec>& inputs,
                                                  const Vec& x1) {
  std::vector<Vec> yhat;
  Vec x = x1;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    if (t > 0) x = watertank_mean(x, inputs[t], theta);
    yhat.push_back(scalar_vec(tank_cap(x[1])));
  }
  return yhat;
}

/// Root-mean-square simulation error sqrt(1/T sum ||y - yhat||^2).
inline double e_rms(const std::vector<Vec>& y, const std::vector<Vec>& yhat) {
  if (y.size() != yhat.size() || y.empty())
    throw std::invalid_argument("e_rms requires equal nonempty lengths");
  double s = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) s += (y[t] - yhat[t]).squaredNorm();
  return std::sqrt(s / y.size());
}

/// e_rms against the observed entries of a dataset only.
inline double e_rms(const Dataset<Vec>& data, const std::vector<Vec>& yhat) {
  if (static_cast<int>(yhat.size()) != data.T())
    throw std::invalid_argument("e_rms requires equal lengths");
  double s = 0.0;
  int n = 0;
  for (int t = 0; t < data.T(); ++t)
    if (data.observed(t)) {
      s += (*data.observations[t] - yhat[t]).squaredNorm();
      ++n;
    }
  if (n == 0) throw std::invalid_argument("no observations to score");
  return std::sqrt(s / n);
}

struct AcfSeries {
  std::vector<double> rho;  // lags 0..L
  double iact = 1.0;
};

/// Sample autocorrelation with biased normalization; IACT = 1 + 2 sum rho_k
/// truncated at the first negative value.
inline AcfSeries acf(const std::vector<double>& series, int max_lag) {
  const int n = static_cast<int>(series.size());
  if (n <= max_lag || max_lag < 0)
    throw std::invalid_argument("series shorter than max_lag");
  double mean = 0.0;
  for (double x : series) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : series) var += (x - mean) * (x - mean);
  if (var == 0.0) throw std::invalid_argument("constant series has no acf");
  AcfSeries out;
  for (int k = 0; k <= max_lag; ++k) {
    double c = 0.0;
    for (int t = 0; t + k < n; ++t)
      c += (series[t] - mean) * (series[t + k] - mean);
    out.rho.push_back(c / var);
  }
  out.iact = 1.0;
  for (int k = 1; k <= max_lag && out.rho[k] > 0.0; ++k)
    out.iact += 2.0 * out.rho[k];
  return out;
}

}  // namespace ssid

#endif  // SSID_ESTIMATORS_HPP
