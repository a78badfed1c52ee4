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

#include <cmath>

#include <doctest.h>

#include "ssid/estimators.hpp"
#include "ssid/twisting.hpp"

using namespace ssid;

namespace {

Dataset<Vec> simulate_data(const StateSpaceModel<Vec>& model,
                           const ParameterVector& th, int T,
                           std::uint64_t seed, double input_amp = 0.0) {
  RandomStream rng(seed, 111);
  std::vector<Vec> inputs;
  for (int t = 0; t < T; ++t)
    inputs.push_back(input_amp == 0.0
                         ? Vec(0)
                         : scalar_vec(input_amp * std::sin(0.07 * t) +
                                      input_amp));
  auto [traj, obs] = simulate(model, inputs, th, rng);
  Dataset<Vec> data;
  data.inputs = inputs;
  for (auto& y : obs) data.observations.push_back(y);
  return data;
}

}  // namespace

TEST_CASE("twist tables terminate at zero (psi_T == 1)") {
  ParameterVector th = scalar_lgss_theta(0.7, 1.0, 0.3, 0.2);
  LgssSpec s = scalar_lgss_spec(th);
  auto model = make_scalar_lgss();
  Dataset<Vec> data = simulate_data(model, th, 7, 1);
  TwistTables tab = ekf_twisting(lgss_ekf_structure(s), data);
  REQUIRE(tab.T() == 7);
  CHECK(tab.a[6].norm() == 0.0);
  CHECK(tab.b[6].norm() == 0.0);
  CHECK(tab.c[6] == 0.0);
}

TEST_CASE("on LGSS the twist equals the exact backward likelihood") {
  // log psi_t(x) must equal ln p(y_{t+1:T} | x_t), checked by running a
  // Kalman filter started from a point mass at x.
  ParameterVector th = scalar_lgss_theta(0.85, 1.1, 0.4, 0.3);
  LgssSpec s = scalar_lgss_spec(th, 0.3, 1.2);
  auto model = make_scalar_lgss(0.3, 1.2);
  Dataset<Vec> data = simulate_data(model, th, 6, 2);
  TwistTables tab = ekf_twisting(lgss_ekf_structure(s), data);

  for (int t = 0; t < 5; ++t) {
    for (double x : {-1.0, 0.2, 1.7}) {
      LgssSpec cond = s;
      cond.mu1 = scalar_vec(s.A(0, 0) * x);
      cond.Sigma1 = s.Q;
      Dataset<Vec> tail = data.slice(t + 1, 6);
      double exact = kalman_filter(cond, tail).loglik;
      CHECK(tab.log_psi(scalar_vec(x), t) == doctest::Approx(exact).epsilon(1e-9));
    }
  }
}

TEST_CASE("matched-proposal twisted filter has zero-variance logZ on LGSS") {
  ParameterVector th = scalar_lgss_theta(0.9, 1.0, 0.5, 0.4);
  LgssSpec s = scalar_lgss_spec(th);
  auto model = make_scalar_lgss();
  Dataset<Vec> data = simulate_data(model, th, 20, 3);
  double exact = kalman_filter(s, data).loglik;

  EkfStructure e = lgss_ekf_structure(s);
  TwistTables tab = ekf_twisting(e, data);
  auto twist = tab.potential();
  auto proposal = make_twisted_proposal(e, tab, data);

  for (int N : {5, 50}) {
    for (std::uint64_t seed : {10u, 11u, 12u}) {
      auto ens = smc_run(model, data, th, proposal, N, RandomStream(seed, 0),
                         &twist);
      CHECK(std::abs(ens.logz - exact) < 1e-6);
    }
  }
}

TEST_CASE("zero-variance survives missing observations") {
  ParameterVector th = scalar_lgss_theta(0.8, 1.0, 0.3, 0.5);
  LgssSpec s = scalar_lgss_spec(th);
  auto model = make_scalar_lgss();
  Dataset<Vec> data = simulate_data(model, th, 12, 4);
  for (int t : {2, 3, 8}) data.observations[t] = std::nullopt;
  double exact = kalman_filter(s, data).loglik;
  EkfStructure e = lgss_ekf_structure(s);
  TwistTables tab = ekf_twisting(e, data);
  auto twist = tab.potential();
  auto proposal = make_twisted_proposal(e, tab, data);
  auto ens = smc_run(model, data, th, proposal, 8, RandomStream(5, 0), &twist);
  CHECK(std::abs(ens.logz - exact) < 1e-6);
}

TEST_CASE("weights-only twisting reduces logZ variance on the tanks") {
  ParameterVector th = watertank_theta_estimate();
  Vec x1(2);
  x1 << 6.0, 5.0;
  auto model = watertank_model(x1);
  StateSpaceModel<Vec> sim_model = model;
  Dataset<Vec> data;
  {
    RandomStream rng(7, 0);
    std::vector<Vec> inputs;
    for (int t = 0; t < 60; ++t)
      inputs.push_back(scalar_vec(2.0 + 1.5 * std::sin(0.09 * t)));
    auto [traj, obs] = simulate(sim_model, inputs, th, rng);
    data.inputs = inputs;
    for (auto& y : obs) data.observations.push_back(y);
  }
  EkfStructure e = watertank_ekf_structure(th, x1);
  TwistTables tab = ekf_twisting(e, data);
  auto twist = tab.potential();

  auto variance = [&](int N, const TwistingPotential<Vec>* tw) {
    std::vector<double> z;
    for (std::uint64_t s = 0; s < 30; ++s)
      z.push_back(smc_run(model, data, th, bootstrap_proposal(model), N,
                          RandomStream(100 + s, 0), tw)
                      .logz);
    double m = 0, v = 0;
    for (double x : z) m += x;
    m /= z.size();
    for (double x : z) v += (x - m) * (x - m);
    return v / (z.size() - 1);
  };
  double var_twisted = variance(20, &twist);
  double var_boot = variance(20, nullptr);
  CHECK(var_twisted < var_boot);
}

TEST_CASE("ekf_twisting demands the linearization interface") {
  EkfStructure e;  // empty
  Dataset<Vec> data;
  data.inputs = {Vec(0)};
  data.observations = {scalar_vec(0.0)};
  CHECK_THROWS_AS(ekf_twisting(e, data), std::invalid_argument);
}
