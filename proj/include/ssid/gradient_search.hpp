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

#ifndef SSID_GRADIENT_SEARCH_HPP
#define SSID_GRADIENT_SEARCH_HPP

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssid/estimators.hpp"

namespace ssid {

struct GradientSearchConfig {
  int max_iters = 100;
  double init_step = 1.0;
  double c1 = 1e-4;          // Armijo sufficient-increase constant
  int max_backtracks = 8;
  double backtrack = 0.5;    // step shrink factor per backtrack
  bool newton = true;        // scale by the clipped Hessian when possible
  int noise_window = 10;     // running-std window for the Armijo slack
};

/// One accepted-or-rejected outer iteration of the search.
struct SearchIterate {
  int iter = 0;
  ParameterVector theta;  // iterate after this iteration
  double logz = 0.0;      // objective estimate at the iterate
  double step = 0.0;      // accepted step length (0 when rejected)
  bool accepted = false;
};

struct SearchState {
  ParameterVector theta;
  std::vector<SearchIterate> trace;
  bool aborted = false;  // non-finite gradient encountered
};

namespace detail {

// logZ estimate that treats particle-system collapse as -inf, so the line
// search rejects any step leading into a degenerate region.
template <class State, class Obs>
double guarded_loglik(const StateSpaceModel<State, Obs>& model,
                      const Dataset<Obs>& data, const ParameterVector& theta,
                      int N, RandomStream rng) {
  try {
    return estimate_loglik(model, data, theta, N, rng);
  } catch (const DegeneracyError&) {
    return -std::numeric_limits<double>::infinity();
  }
}

// Ascent direction from gradient g and Hessian H on the unconstrained scale,
// restricted to the free (non-point-mass) coordinates: Newton with the
// spectrum clipped to at most -1e-6; plain gradient when clipping would
// discard more than half of the free spectrum or Newton is off.
inline Vec ascent_direction(const Vec& g, const Mat& H, bool newton,
                            const std::vector<int>& free_idx) {
  if (!newton || free_idx.empty()) return g;
  const int F = static_cast<int>(free_idx.size());
  Vec gf(F);
  Mat Hf(F, F);
  for (int i = 0; i < F; ++i) {
    gf[i] = g[free_idx[i]];
    for (int j = 0; j < F; ++j) Hf(i, j) = H(free_idx[i], free_idx[j]);
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (Hf + Hf.transpose()));
  const Vec& ev = es.eigenvalues();
  int clipped = 0;
  for (int i = 0; i < ev.size(); ++i)
    if (ev[i] > -1e-6) ++clipped;
  if (2 * clipped > ev.size()) return g;
  Vec df = Vec::Zero(F);
  for (int i = 0; i < ev.size(); ++i) {
    double lam = std::min(ev[i], -1e-6);
    Vec v = es.eigenvectors().col(i);
    df += v * (gf.dot(v) / -lam);
  }
  Vec d = Vec::Zero(g.size());
  for (int i = 0; i < F; ++i) d[free_idx[i]] = df[i];
  return d;
}

}  // namespace detail

/// Stochastic ascent on the particle log-likelihood estimate. Directions come
/// from score_and_hessian mapped to the unconstrained parameter scale; a step
/// is accepted under a noise-slack Armijo rule with common random numbers
/// across the two compared evaluations.
template <class State, class Obs>
SearchState gradient_search(const StateSpaceModel<State, Obs>& model,
                            const Dataset<Obs>& data,
                            const ParameterVector& theta0, int N,
                            const GradientSearchConfig& config,
                            RandomStream rng) {
  if (!model.grad_logs)
    throw std::invalid_argument("gradient_search requires model.grad_logs");
  SearchState state;
  state.theta = theta0;
  const int P = static_cast<int>(theta0.size());
  double init_step = config.init_step;
  // Running estimate of Var(logZ) at a fixed iterate, from paired
  // evaluations with independent seeds each iteration.
  double noise_var = 0.0;
  int noise_samples = 0;

  for (int k = 0; k < config.max_iters; ++k) {
    RandomStream iter_rng = rng.split(static_cast<std::uint64_t>(k));
    ScoreResult score = score_and_hessian(model, data, state.theta, N,
                                          iter_rng.split(1));

    // Chain rule onto the unconstrained scale eta: g_eta = J g, with
    // J = diag(dvalue/deta); curvature gets the full transform correction.
    Vec g(P);
    Mat H(P, P);
    for (int i = 0; i < P; ++i) {
      double ji = state.theta.dvalue_deta(i);
      g[i] = score.gradient[i] * ji;
      for (int j = 0; j < P; ++j)
        H(i, j) = score.hessian(i, j) * ji * state.theta.dvalue_deta(j);
      H(i, i) += score.gradient[i] * state.theta.d2value_deta2(i);
    }
    if (!g.allFinite()) {
      state.aborted = true;
      break;
    }
    std::vector<int> free_idx;
    for (int i = 0; i < P; ++i)
      if (state.theta.dvalue_deta(i) != 0.0) free_idx.push_back(i);
    Vec d = detail::ascent_direction(g, H, config.newton, free_idx);

    // Noise slack: twice the running standard deviation of the objective
    // estimate at a fixed iterate, measured from an independent replicate.
    RandomStream crn = iter_rng.split(2);  // shared by both compared evaluations
    double base = detail::guarded_loglik(model, data, state.theta, N, crn);
    double replicate =
        detail::guarded_loglik(model, data, state.theta, N, iter_rng.split(3));
    if (std::isfinite(base) && std::isfinite(replicate)) {
      double v = 0.5 * (base - replicate) * (base - replicate);
      noise_var = (noise_var * noise_samples + v) / (noise_samples + 1);
      if (noise_samples < config.noise_window) ++noise_samples;
    }
    double kappa = 2.0 * std::sqrt(noise_var);

    SearchIterate it;
    it.iter = k;
    double alpha = init_step;
    Vec eta0 = state.theta.to_unconstrained();
    for (int b = 0; b <= config.max_backtracks; ++b) {
      ParameterVector cand = state.theta;
      cand.from_unconstrained(Vec(eta0 + alpha * d));
      double trial = detail::guarded_loglik(model, data, cand, N, crn);
      if (std::isfinite(trial) &&
          trial >= base + config.c1 * alpha * g.dot(d) - kappa) {
        state.theta = cand;
        it.accepted = true;
        it.step = alpha;
        it.logz = trial;
        break;
      }
      alpha *= config.backtrack;
    }
    if (!it.accepted) {
      init_step *= config.backtrack;  // shrink future initial steps
      it.logz = base;
    }
    it.theta = state.theta;
    state.trace.push_back(it);
  }
  return state;
}

/// Trace CSV: iter, theta components, logZ estimate, step length, accepted.
inline void write_search_trace_csv(const SearchState& state,
                                   const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace: " + path);
  out << "iter";
  if (!state.trace.empty())
    for (const auto& name : state.trace.front().theta.names())
      out << ',' << name;
  out << ",logz,step,accepted\n";
  char buf[64];
  for (const auto& it : state.trace) {
    out << it.iter;
    for (std::size_t i = 0; i < it.theta.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.12g", it.theta.get(i));
      out << ',' << buf;
    }
    std::snprintf(buf, sizeof buf, "%.12g,%.12g,%d", it.logz, it.step,
                  it.accepted ? 1 : 0);
    out << ',' << buf << '\n';
  }
}

}  // namespace ssid

#endif  // SSID_GRADIENT_SEARCH_HPP
