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

#ifndef SSID_MODEL_HPP
#define SSID_MODEL_HPP

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssid/dataset.hpp"
#include "ssid/parameters.hpp"
#include "ssid/prior.hpp"
#include "ssid/random.hpp"

namespace ssid {

/// First- and second-order parameter derivatives of the model's
/// log-densities, laid out in the order of ParameterVector::names().
template <class State, class Obs>
struct GradLogs {
  std::function<Vec(const State& x1, const ParameterVector&)> grad_initial;
  std::function<Vec(const State& x, const State& x_prev, const Vec& u, int t,
                    const ParameterVector&)>
      grad_transition;
  std::function<Mat(const State& x, const State& x_prev, const Vec& u, int t,
                    const ParameterVector&)>
      hess_transition;
  std::function<Vec(const Obs& y, const State& x, const Vec& u, int t,
                    const ParameterVector&)>
      grad_observation;
  std::function<Mat(const Obs& y, const State& x, const Vec& u, int t,
                    const ParameterVector&)>
      hess_observation;
};

/// The probabilistic model contract: initial, transition and observation
/// densities/samplers, parameterized by a named parameter vector.
///
/// Models with intractable transition or initial densities leave the
/// corresponding logpdf unset ("sample-only"); algorithms that require the
/// density check availability and raise a capability error.
template <class State, class Obs = Vec>
struct StateSpaceModel {
  int state_dim = 0;
  std::vector<std::string> param_names;

  std::function<State(const ParameterVector&, RandomStream&)> initial_sampler;
  std::function<double(const State&, const ParameterVector&)> initial_logpdf;

  std::function<State(const State& x_prev, const Vec& u, int t,
                      const ParameterVector&, RandomStream&)>
      transition_sampler;
  std::function<double(const State& x, const State& x_prev, const Vec& u,
                       int t, const ParameterVector&)>
      transition_logpdf;

  std::function<double(const Obs& y, const State& x, const Vec& u, int t,
                       const ParameterVector&)>
      observation_logpdf;
  std::function<Obs(const State& x, const Vec& u, int t,
                    const ParameterVector&, RandomStream&)>
      observation_sampler;

  std::optional<GradLogs<State, Obs>> grad_logs;

  bool has_transition_density() const {
    return static_cast<bool>(transition_logpdf);
  }
  bool has_initial_density() const { return static_cast<bool>(initial_logpdf); }
};

/// ln p(x_1 | theta) + sum_t ln p(y_t | x_t, theta)
///                   + sum_{t>=2} ln p(x_t | x_{t-1}, theta).
/// Unobserved steps contribute no observation term.
template <class State, class Obs>
double log_joint(const StateSpaceModel<State, Obs>& model,
                 const std::vector<State>& traj, const Dataset<Obs>& data,
                 const ParameterVector& theta) {
  if (static_cast<int>(traj.size()) != data.T())
    throw std::invalid_argument("trajectory length differs from dataset");
  if (!model.has_transition_density() || !model.has_initial_density())
    throw std::invalid_argument("log_joint requires tractable densities");
  double total = model.initial_logpdf(traj[0], theta);
  for (int t = 0; t < data.T() && total > kNegInf; ++t) {
    if (data.observations[t])
      total += model.observation_logpdf(*data.observations[t], traj[t],
                                        data.inputs[t], t, theta);
    if (t >= 1)
      total += model.transition_logpdf(traj[t], traj[t - 1], data.inputs[t], t,
                                       theta);
  }
  return total;
}

/// Simulates a full trajectory and observation sequence from the model.
template <class State, class Obs>
std::pair<std::vector<State>, std::vector<Obs>> simulate(
    const StateSpaceModel<State, Obs>& model, const std::vector<Vec>& inputs,
    const ParameterVector& theta, RandomStream& rng) {
  std::vector<State> traj;
  std::vector<Obs> obs;
  const int T = static_cast<int>(inputs.size());
  traj.reserve(T);
  obs.reserve(T);
  for (int t = 0; t < T; ++t) {
    traj.push_back(t == 0 ? model.initial_sampler(theta, rng)
                          : model.transition_sampler(traj[t - 1], inputs[t], t,
                                                     theta, rng));
    obs.push_back(model.observation_sampler(traj[t], inputs[t], t, theta, rng));
  }
  return {std::move(traj), std::move(obs)};
}

}  // namespace ssid

#endif  // SSID_MODEL_HPP
