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

#ifndef SSID_SMC_HPP
#define SSID_SMC_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "ssid/model.hpp"
#include "ssid/resampling.hpp"

namespace ssid {

/// Proposal distribution q_t. The bootstrap tag marks proposals equal to the
/// model transition, in which case the transition density cancels out of the
/// weights and sample-only models are supported.
template <class State, class Obs = Vec>
struct Proposal {
  enum class Tag { kBootstrap, kCustom, kLocallyOptimalApprox };
  Tag tag = Tag::kBootstrap;

  std::function<State(const ParameterVector&, RandomStream&)> init_sampler;
  std::function<double(const State&, const ParameterVector&)> init_logpdf;
  std::function<State(const State& x_prev, const Vec& u, int t,
                      const ParameterVector&, RandomStream&)>
      sampler;
  std::function<double(const State& x, const State& x_prev, const Vec& u,
                       int t, const ParameterVector&)>
      logpdf;
};

template <class State, class Obs>
Proposal<State, Obs> bootstrap_proposal(const StateSpaceModel<State, Obs>& model) {
  Proposal<State, Obs> q;
  q.tag = Proposal<State, Obs>::Tag::kBootstrap;
  q.init_sampler = model.initial_sampler;
  q.init_logpdf = model.initial_logpdf;
  q.sampler = model.transition_sampler;
  q.logpdf = model.transition_logpdf;
  return q;
}

/// Per-step log twisting potential. By convention log_psi(x, T-1) == 0, so
/// twisting never changes the final target, only the sequence leading to it.
template <class State>
struct TwistingPotential {
  std::function<double(const State& x, int t)> log_psi;
};

enum class ResamplingScheme { kMultinomial, kSystematic };

struct ResamplingPolicy {
  ResamplingScheme scheme = ResamplingScheme::kSystematic;
  /// When set, resample only if ESS drops below ess_fraction * N.
  bool adaptive = false;
  double ess_fraction = 0.5;
};

struct StepDiagnostic {
  int step;
  double ess;
  double logz_increment;
  bool resampled;
};

/// Weighted particle system over all steps of a sweep, with ancestor
/// lineages and the running normalizing-constant estimate.
template <class State>
struct ParticleEnsemble {
  std::vector<std::vector<State>> particles;      // [t][i]
  std::vector<std::vector<double>> log_weights;   // [t][i], unnormalized
  std::vector<std::vector<double>> norm_weights;  // [t][i], sums to 1
  std::vector<std::vector<int>> ancestors;        // [t][i], ancestors[0] unused
  std::vector<char> resampled;                    // [t]
  std::vector<double> logz_steps;                 // per-step increments
  double logz = 0.0;

  int T() const { return static_cast<int>(particles.size()); }
  int N() const { return particles.empty() ? 0 : static_cast<int>(particles[0].size()); }

  /// Traces particle i's full lineage back from the final step.
  std::vector<State> trajectory(int i) const {
    std::vector<State> traj(T());
    int idx = i;
    for (int t = T() - 1; t >= 0; --t) {
      traj[t] = particles[t][idx];
      if (t > 0) idx = ancestors[t][idx];
    }
    return traj;
  }

  std::vector<StepDiagnostic> diagnostics() const {
    std::vector<StepDiagnostic> out;
    for (int t = 0; t < T(); ++t)
      out.push_back({t + 1, effective_sample_size(norm_weights[t]),
                     logz_steps[t], resampled[t] != 0});
    return out;
  }
};

namespace detail {

inline std::vector<int> draw_ancestors(const std::vector<double>& weights,
                                       ResamplingScheme scheme,
                                       RandomStream& rng) {
  return scheme == ResamplingScheme::kMultinomial
             ? resample_multinomial(weights, rng)
             : resample_systematic(weights, rng);
}

// Stream ids carved out of the step index so that per-particle draws and the
// resampling draw never collide.
inline std::uint64_t propagate_stream(int t) { return 2 * static_cast<std::uint64_t>(t); }
inline std::uint64_t resample_stream(int t) { return 2 * static_cast<std::uint64_t>(t) + 1; }

}  // namespace detail

/// Generic SMC sweep (optionally twisted) targeting
/// p(x_{1:T}, y_{1:T} | theta). exp(logz) is an unbiased estimate of
/// p(y_{1:T} | theta) for any twisting potential and proposal.
template <class State, class Obs>
ParticleEnsemble<State> smc_run(
    const StateSpaceModel<State, Obs>& model, const Dataset<Obs>& data,
    const ParameterVector& theta, const Proposal<State, Obs>& proposal, int N,
    RandomStream rng, const TwistingPotential<State>* twist = nullptr,
    ResamplingPolicy policy = {}) {
  if (N < 2) throw std::invalid_argument("particle count must be at least 2");
  data.check();
  const int T = data.T();
  const bool bootstrap = proposal.tag == Proposal<State, Obs>::Tag::kBootstrap;

  ParticleEnsemble<State> ens;
  ens.particles.resize(T);
  ens.log_weights.resize(T);
  ens.norm_weights.resize(T);
  ens.ancestors.resize(T);
  ens.resampled.assign(T, 0);
  ens.logz_steps.resize(T);

  std::vector<double> log_weights(N);
  std::vector<double> prev_norm(N, 1.0 / N);
  // True once the weights carry information to resample on.
  bool informative = false;

  for (int t = 0; t < T; ++t) {
    RandomStream prop_rng = rng.split(detail::propagate_stream(t));
    auto& xs = ens.particles[t];
    xs.resize(N);

    bool do_resample = false;
    if (t > 0 && informative) {
      do_resample = !policy.adaptive ||
                    effective_sample_size(prev_norm) < policy.ess_fraction * N;
    }
    if (do_resample) {
      RandomStream res_rng = rng.split(detail::resample_stream(t));
      ens.ancestors[t] = detail::draw_ancestors(prev_norm, policy.scheme, res_rng);
      std::fill(prev_norm.begin(), prev_norm.end(), 1.0 / N);
      ens.resampled[t] = 1;
      informative = false;
    } else if (t > 0) {
      ens.ancestors[t].resize(N);
      for (int i = 0; i < N; ++i) ens.ancestors[t][i] = i;
    }

    const bool observed = data.observed(t);
    for (int i = 0; i < N; ++i) {
      RandomStream prng = prop_rng.split(i);
      double inc = 0.0;
      if (t == 0) {
        xs[i] = proposal.init_sampler(theta, prng);
        if (!bootstrap)
          inc += model.initial_logpdf(xs[i], theta) -
                 proposal.init_logpdf(xs[i], theta);
      } else {
        const State& xp = ens.particles[t - 1][ens.ancestors[t][i]];
        xs[i] = proposal.sampler(xp, data.inputs[t], t, theta, prng);
        if (!bootstrap)
          inc += model.transition_logpdf(xs[i], xp, data.inputs[t], t, theta) -
                 proposal.logpdf(xs[i], xp, data.inputs[t], t, theta);
        if (twist) inc -= twist->log_psi(xp, t - 1);
      }
      if (observed)
        inc += model.observation_logpdf(*data.observations[t], xs[i],
                                        data.inputs[t], t, theta);
      if (twist) inc += twist->log_psi(xs[i], t);
      log_weights[i] = std::log(prev_norm[i]) + inc;
    }
    if (observed || twist || !bootstrap) informative = true;

    try {
      ens.logz_steps[t] = logsumexp_normalize(log_weights, ens.norm_weights[t]);
    } catch (const DegeneracyError&) {
      throw DegeneracyError(t);
    }
    ens.log_weights[t] = log_weights;
    ens.logz += ens.logz_steps[t];
    prev_norm = ens.norm_weights[t];
  }
  return ens;
}

struct BootstrapPfResult {
  ParticleEnsemble<Vec> ensemble;
  std::vector<Vec> filter_means;
  double logz = 0.0;
};

/// Bootstrap particle filter: propose from the transition, weight by the
/// observation density. Multinomial resampling every observed step.
template <class Obs>
BootstrapPfResult bootstrap_pf(const StateSpaceModel<Vec, Obs>& model,
                               const Dataset<Obs>& data,
                               const ParameterVector& theta, int N,
                               RandomStream rng,
                               ResamplingPolicy policy = {ResamplingScheme::kMultinomial}) {
  BootstrapPfResult out;
  out.ensemble =
      smc_run(model, data, theta, bootstrap_proposal(model), N, rng,
              static_cast<const TwistingPotential<Vec>*>(nullptr), policy);
  out.logz = out.ensemble.logz;
  for (int t = 0; t < out.ensemble.T(); ++t) {
    Vec mean = Vec::Zero(out.ensemble.particles[t][0].size());
    for (int i = 0; i < out.ensemble.N(); ++i)
      mean += out.ensemble.norm_weights[t][i] * out.ensemble.particles[t][i];
    out.filter_means.push_back(mean);
  }
  return out;
}

template <class State>
struct CsmcResult {
  std::vector<State> reference;  // the newly drawn trajectory
  ParticleEnsemble<State> ensemble;
};

/// Conditional SMC: the reference trajectory occupies slot N-1 and survives
/// every resampling step; the output trajectory is drawn from the final
/// weights. With ancestor_sampling, the reference's ancestor is redrawn each
/// resampling step proportionally to w_{t-1}^i p(x'_t | x_{t-1}^i), which
/// requires a tractable transition density.
///
/// Multinomial resampling is forced; the kernel leaves
/// p(x_{1:T} | y_{1:T}, theta) invariant.
template <class State, class Obs>
CsmcResult<State> csmc_run(const StateSpaceModel<State, Obs>& model,
                           const Dataset<Obs>& data,
                           const ParameterVector& theta,
                           const std::vector<State>& reference, int N,
                           RandomStream rng, bool ancestor_sampling = false) {
  if (N < 2) throw std::invalid_argument("particle count must be at least 2");
  data.check();
  if (static_cast<int>(reference.size()) != data.T())
    throw std::invalid_argument("reference length differs from dataset");
  if (ancestor_sampling && !model.has_transition_density())
    throw std::invalid_argument(
        "ancestor sampling requires a tractable transition density");
  const int T = data.T();
  const int ref = N - 1;

  CsmcResult<State> res;
  auto& ens = res.ensemble;
  ens.particles.resize(T);
  ens.log_weights.resize(T);
  ens.norm_weights.resize(T);
  ens.ancestors.resize(T);
  ens.resampled.assign(T, 0);
  ens.logz_steps.resize(T);

  std::vector<double> log_weights(N);
  std::vector<double> prev_norm(N, 1.0 / N);
  bool informative = false;

  for (int t = 0; t < T; ++t) {
    RandomStream prop_rng = rng.split(detail::propagate_stream(t));
    auto& xs = ens.particles[t];
    xs.resize(N);

    if (t > 0 && informative) {
      RandomStream res_rng = rng.split(detail::resample_stream(t));
      ens.ancestors[t] =
          resample_multinomial(prev_norm, res_rng);
      if (ancestor_sampling) {
        std::vector<double> as_logw(N);
        for (int i = 0; i < N; ++i)
          as_logw[i] = std::log(prev_norm[i]) +
                       model.transition_logpdf(reference[t],
                                               ens.particles[t - 1][i],
                                               data.inputs[t], t, theta);
        std::vector<double> as_norm;
        logsumexp_normalize(as_logw, as_norm);
        ens.ancestors[t][ref] = draw_categorical(as_norm, res_rng);
      } else {
        ens.ancestors[t][ref] = ref;
      }
      std::fill(prev_norm.begin(), prev_norm.end(), 1.0 / N);
      ens.resampled[t] = 1;
      informative = false;
    } else if (t > 0) {
      ens.ancestors[t].resize(N);
      for (int i = 0; i < N; ++i) ens.ancestors[t][i] = i;
    }

    const bool observed = data.observed(t);
    for (int i = 0; i < N; ++i) {
      if (i == ref) {
        xs[i] = reference[t];
      } else {
        RandomStream prng = prop_rng.split(i);
        xs[i] = t == 0 ? model.initial_sampler(theta, prng)
                       : model.transition_sampler(
                             ens.particles[t - 1][ens.ancestors[t][i]],
                             data.inputs[t], t, theta, prng);
      }
      double inc = observed ? model.observation_logpdf(*data.observations[t],
                                                       xs[i], data.inputs[t],
                                                       t, theta)
                            : 0.0;
      log_weights[i] = std::log(prev_norm[i]) + inc;
    }
    if (observed) informative = true;

    try {
      ens.logz_steps[t] = logsumexp_normalize(log_weights, ens.norm_weights[t]);
    } catch (const DegeneracyError&) {
      throw DegeneracyError(t);
    }
    ens.log_weights[t] = log_weights;
    ens.logz += ens.logz_steps[t];
    prev_norm = ens.norm_weights[t];
  }

  RandomStream draw_rng = rng.split(0xdadull);
  int j = draw_categorical(ens.norm_weights[T - 1], draw_rng);
  res.reference = ens.trajectory(j);
  return res;
}

/// Writes one JSONL record per step: step, ESS, logZ increment, resampled.
template <class State>
void dump_diagnostics(const ParticleEnsemble<State>& ens, std::ostream& out) {
  for (const auto& d : ens.diagnostics()) {
    out << "{\"step\":" << d.step << ",\"ess\":" << d.ess
        << ",\"logz_increment\":" << d.logz_increment
        << ",\"resampled\":" << (d.resampled ? "true" : "false") << "}\n";
  }
}

}  // namespace ssid

#endif  // SSID_SMC_HPP
