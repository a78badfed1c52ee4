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

#ifndef SSID_MH_HPP
#define SSID_MH_HPP

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssid/estimators.hpp"
#include "ssid/prior.hpp"

namespace ssid {

/// Metropolis-Hastings accept/reject. Delta combines the target ratio with
/// the proposal correction; a -inf proposed target always rejects.
inline bool mh_accept(double log_target_new, double log_target_old,
                      double log_q_forward, double log_q_backward,
                      RandomStream& rng) {
  if (!std::isfinite(log_target_old))
    throw std::invalid_argument("mh_accept requires a finite current target");
  if (log_target_new == -std::numeric_limits<double>::infinity()) return false;
  double delta =
      (log_target_new - log_target_old) + (log_q_backward - log_q_forward);
  if (delta >= 0.0) return true;
  return std::log(draw_uniform(rng)) < delta;
}

/// Gaussian random-walk proposal on the unconstrained parameter scale.
/// With adapt set, chains may re-estimate the covariance during burn-in
/// (and only then, to preserve invariance afterwards).
struct RandomWalkProposal {
  Mat cov;
  bool adapt = false;

  static RandomWalkProposal isotropic(int dim, double scale) {
    return RandomWalkProposal{scale * scale * Mat::Identity(dim, dim), false};
  }
};

/// MCMC output. Trajectories are kept only by the particle-Gibbs samplers.
template <class State = Vec>
struct ChainTrace {
  std::vector<ParameterVector> samples;
  std::vector<std::vector<State>> trajectories;  // may be empty
  std::vector<double> log_values;  // logZ or log-target per iteration
  std::vector<char> accepted;
  std::uint64_t seed = 0;
  int burn_in = 0;  // default M/10

  std::size_t size() const { return samples.size(); }

  /// Post-burn-in values of one parameter.
  std::vector<double> component(const std::string& name) const {
    std::vector<double> out;
    for (std::size_t m = burn_in; m < samples.size(); ++m)
      out.push_back(samples[m].get(name));
    return out;
  }
};

namespace detail {

// Indices the chain actually moves: parameters without a point-mass prior.
inline std::vector<int> free_indices(const ParameterVector& theta,
                                     const Prior& prior) {
  std::vector<int> idx;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const std::string& name = theta.names()[i];
    if (prior.has(name) && is_point_mass(prior.marginal(name))) continue;
    if (theta.bounds(i).lo == theta.bounds(i).hi) continue;
    idx.push_back(static_cast<int>(i));
  }
  return idx;
}

// log |d theta / d eta| over the free coordinates: the Jacobian correction
// that makes an unconstrained-scale random walk target the density in theta.
inline double log_transform_jacobian(const ParameterVector& theta,
                                     const std::vector<int>& free_idx) {
  double s = 0.0;
  for (int i : free_idx) s += std::log(std::abs(theta.dvalue_deta(i)));
  return s;
}

inline Mat chol_lower(const Mat& cov) {
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("proposal covariance not positive definite");
  return llt.matrixL();
}

// Step only the free coordinates, leaving the others bit-identical (a full
// unconstrained round trip would perturb them in the last ulp, which a
// point-mass prior rejects).
inline ParameterVector step_free_coords(const ParameterVector& theta,
                                        const std::vector<int>& free_idx,
                                        const Vec& step) {
  ParameterVector cand = theta;
  for (std::size_t i = 0; i < free_idx.size(); ++i) {
    int j = free_idx[i];
    double eta = theta.to_unconstrained(j, theta.get(j)) + step[i];
    cand.set(j, cand.from_unconstrained(j, eta));
  }
  return cand;
}

// Haario-style adapted covariance from past unconstrained samples.
inline Mat adapted_cov(const std::vector<Vec>& etas, int dim) {
  Vec mean = Vec::Zero(dim);
  for (const Vec& e : etas) mean += e;
  mean /= etas.size();
  Mat cov = Mat::Zero(dim, dim);
  for (const Vec& e : etas) cov += (e - mean) * (e - mean).transpose();
  cov /= (etas.size() - 1);
  return Mat(2.38 * 2.38 / dim * cov + 1e-8 * Mat::Identity(dim, dim));
}

}  // namespace detail

/// Random-walk Metropolis-Hastings against an exact log-target over theta
/// (prior and likelihood combined by the caller). The walk lives on the
/// unconstrained scale; the transform Jacobian is accounted for, so the
/// samples follow the target density in theta.
inline ChainTrace<> mh_chain(
    const std::function<double(const ParameterVector&)>& log_target,
    const Prior& prior, RandomWalkProposal proposal,
    const ParameterVector& theta0, int M, RandomStream rng) {
  std::vector<int> free_idx = detail::free_indices(theta0, prior);
  const int F = static_cast<int>(free_idx.size());
  if (F == 0) throw std::invalid_argument("no free parameters to sample");
  if (proposal.cov.rows() != F)
    throw std::invalid_argument("proposal covariance dimension mismatch");

  ChainTrace<> trace;
  trace.burn_in = M / 10;
  ParameterVector theta = theta0;
  double cur = log_target(theta) + detail::log_transform_jacobian(theta, free_idx);
  if (!std::isfinite(cur))
    throw std::invalid_argument("log target not finite at the initial point");
  Mat L = detail::chol_lower(proposal.cov);
  std::vector<Vec> adapt_history;

  for (int m = 0; m < M; ++m) {
    RandomStream step_rng = rng.split(static_cast<std::uint64_t>(m));
    Vec z(F);
    for (int i = 0; i < F; ++i) z[i] = draw_normal(step_rng);
    ParameterVector cand = detail::step_free_coords(theta, free_idx, L * z);
    double prop =
        log_target(cand) + detail::log_transform_jacobian(cand, free_idx);
    bool acc = mh_accept(prop, cur, 0.0, 0.0, step_rng);
    if (acc) {
      theta = cand;
      cur = prop;
    }
    trace.samples.push_back(theta);
    trace.log_values.push_back(cur);
    trace.accepted.push_back(acc ? 1 : 0);

    if (proposal.adapt && m < trace.burn_in) {
      Vec e = theta.to_unconstrained();
      Vec ef(F);
      for (int i = 0; i < F; ++i) ef[i] = e[free_idx[i]];
      adapt_history.push_back(ef);
      if (adapt_history.size() >= 20 && adapt_history.size() % 20 == 0)
        L = detail::chol_lower(detail::adapted_cov(adapt_history, F));
    }
  }
  return trace;
}

/// Particle marginal Metropolis-Hastings: random-walk MH on theta where the
/// intractable likelihood is replaced by the unbiased SMC estimate, which is
/// carried with the chain state and recomputed only for proposed points.
/// Particle-system collapse at a proposal counts as likelihood zero.
template <class State, class Obs>
ChainTrace<> pmmh(const StateSpaceModel<State, Obs>& model,
                  const Dataset<Obs>& data, const Prior& prior,
                  RandomWalkProposal proposal, const ParameterVector& theta0,
                  int N, int M, RandomStream rng) {
  std::vector<int> free_idx = detail::free_indices(theta0, prior);
  const int F = static_cast<int>(free_idx.size());
  if (F == 0) throw std::invalid_argument("no free parameters to sample");
  if (proposal.cov.rows() != F)
    throw std::invalid_argument("proposal covariance dimension mismatch");

  auto loglik = [&](const ParameterVector& th, RandomStream r) {
    try {
      return estimate_loglik(model, data, th, N, r);
    } catch (const DegeneracyError&) {
      return -std::numeric_limits<double>::infinity();
    }
  };

  ChainTrace<> trace;
  trace.burn_in = M / 10;
  ParameterVector theta = theta0;
  double cur_prior =
      prior.logpdf(theta) + detail::log_transform_jacobian(theta, free_idx);
  double cur_ll = loglik(theta, rng.split(0xf00dull));
  if (!std::isfinite(cur_prior + cur_ll))
    throw std::invalid_argument("posterior not finite at the initial point");
  Mat L = detail::chol_lower(proposal.cov);
  std::vector<Vec> adapt_history;

  for (int m = 0; m < M; ++m) {
    RandomStream step_rng = rng.split(static_cast<std::uint64_t>(m) + 1);
    Vec z(F);
    for (int i = 0; i < F; ++i) z[i] = draw_normal(step_rng);
    ParameterVector cand = detail::step_free_coords(theta, free_idx, L * z);

    double cand_prior =
        prior.logpdf(cand) + detail::log_transform_jacobian(cand, free_idx);
    bool acc = false;
    if (std::isfinite(cand_prior)) {
      // The likelihood estimate is computed once per proposed point and
      // becomes part of the chain state on acceptance.
      double cand_ll = loglik(cand, step_rng.split(1));
      acc = mh_accept(cand_prior + cand_ll, cur_prior + cur_ll, 0.0, 0.0,
                      step_rng);
      if (acc) {
        theta = cand;
        cur_prior = cand_prior;
        cur_ll = cand_ll;
      }
    }
    trace.samples.push_back(theta);
    trace.log_values.push_back(cur_ll);
    trace.accepted.push_back(acc ? 1 : 0);

    if (proposal.adapt && m < trace.burn_in) {
      Vec e = theta.to_unconstrained();
      Vec ef(F);
      for (int i = 0; i < F; ++i) ef[i] = e[free_idx[i]];
      adapt_history.push_back(ef);
      if (adapt_history.size() >= 20 && adapt_history.size() % 20 == 0)
        L = detail::chol_lower(detail::adapted_cov(adapt_history, F));
    }
  }
  return trace;
}

/// One JSONL record per iteration: m, theta map, logZ (or log-target),
/// accepted flag.
template <class State>
void write_chain_jsonl(const ChainTrace<State>& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write chain: " + path);
  char buf[64];
  for (std::size_t m = 0; m < trace.size(); ++m) {
    out << "{\"m\":" << m << ",\"theta\":{";
    const auto& th = trace.samples[m];
    for (std::size_t i = 0; i < th.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", th.get(i));
      out << (i ? "," : "") << '"' << th.names()[i] << "\":" << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", trace.log_values[m]);
    out << "},\"logz\":" << buf
        << ",\"accepted\":" << (trace.accepted[m] ? "true" : "false") << "}\n";
  }
}

}  // namespace ssid

#endif  // SSID_MH_HPP
