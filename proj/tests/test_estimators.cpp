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

#include <algorithm>
#include <cmath>

#include <doctest.h>

#include "ssid/estimators.hpp"
#include "ssid/kalman.hpp"
#include "ssid/models/lgss.hpp"

using namespace ssid;

namespace {

Dataset<Vec> lgss_data(const ParameterVector& th, int T, std::uint64_t seed) {
  auto model = make_scalar_lgss();
  RandomStream rng(seed, 222);
  auto [traj, obs] = simulate(model, std::vector<Vec>(T, Vec(0)), th, rng);
  Dataset<Vec> data;
  data.inputs.assign(T, Vec(0));
  for (auto& y : obs) data.observations.push_back(y);
  return data;
}

double kalman_at(const Dataset<Vec>& data, ParameterVector th) {
  return kalman_filter(scalar_lgss_spec(th), data).loglik;
}

// Central finite differences of the Kalman-exact log-likelihood on the
// constrained scale.
Vec fd_gradient(const Dataset<Vec>& data, const ParameterVector& th) {
  Vec g(th.size());
  for (std::size_t i = 0; i < th.size(); ++i) {
    double h = 1e-5 * (1.0 + std::abs(th.get(i)));
    ParameterVector up = th, dn = th;
    up.set(i, th.get(i) + h);
    dn.set(i, th.get(i) - h);
    g[i] = (kalman_at(data, up) - kalman_at(data, dn)) / (2.0 * h);
  }
  return g;
}

Mat fd_hessian(const Dataset<Vec>& data, const ParameterVector& th) {
  Mat H(th.size(), th.size());
  for (std::size_t i = 0; i < th.size(); ++i) {
    double h = 1e-4 * (1.0 + std::abs(th.get(i)));
    ParameterVector up = th, dn = th;
    up.set(i, th.get(i) + h);
    dn.set(i, th.get(i) - h);
    Vec gu = fd_gradient(data, up), gd = fd_gradient(data, dn);
    H.row(i) = ((gu - gd) / (2.0 * h)).transpose();
  }
  return Mat(0.5 * (H + H.transpose()));
}

}  // namespace

TEST_CASE("estimate_loglik matches the Kalman value in expectation") {
  ParameterVector th = scalar_lgss_theta(0.8, 1.0, 0.5, 0.4);
  Dataset<Vec> data = lgss_data(th, 12, 1);
  double exact = kalman_at(data, th);
  const int runs = 300;
  double sum = 0, sumsq = 0;
  for (int r = 0; r < runs; ++r) {
    double z = std::exp(
        estimate_loglik(make_scalar_lgss(), data, th, 100, RandomStream(r, 0)) -
        exact);
    sum += z;
    sumsq += z * z;
  }
  double mean = sum / runs;
  double se = std::sqrt((sumsq / runs - mean * mean) / (runs - 1));
  CHECK(std::abs(mean - 1.0) < 3 * se);

  Dataset<Vec> empty;
  CHECK_THROWS_AS(
      estimate_loglik(make_scalar_lgss(), empty, th, 10, RandomStream(0, 0)),
      std::invalid_argument);
}

TEST_CASE("particle score matches finite differences of the Kalman loglik") {
  ParameterVector th = scalar_lgss_theta(0.7, 1.0, 0.6, 0.5);
  Dataset<Vec> data = lgss_data(th, 40, 2);
  Vec fd = fd_gradient(data, th);

  Vec avg = Vec::Zero(4);
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s)
    avg += score_and_hessian(make_scalar_lgss(), data, th, 2000,
                             RandomStream(40 + s, 0))
               .gradient;
  avg /= seeds;
  // The process-noise variance is the benchmark component: 5% relative
  // error. The full vector gets a looser Monte Carlo band.
  int iq = static_cast<int>(th.index_of("q"));
  CHECK(std::abs(avg[iq] - fd[iq]) < 0.05 * std::abs(fd[iq]));
  for (int i = 0; i < 4; ++i)
    CHECK(std::abs(avg[i] - fd[i]) < 0.15 * std::max(1.0, std::abs(fd[i])));
}

TEST_CASE("score error decreases with the particle count") {
  ParameterVector th = scalar_lgss_theta(0.7, 1.0, 0.6, 0.5);
  Dataset<Vec> data = lgss_data(th, 40, 2);
  int iq = static_cast<int>(th.index_of("q"));
  double fdq = fd_gradient(data, th)[iq];

  auto median_err = [&](int N) {
    std::vector<double> errs;
    for (int s = 0; s < 20; ++s)
      errs.push_back(std::abs(score_and_hessian(make_scalar_lgss(), data, th, N,
                                                RandomStream(40 + s, 0))
                                  .gradient[iq] -
                              fdq));
    std::sort(errs.begin(), errs.end());
    return errs[errs.size() / 2];
  };
  double e100 = median_err(100), e400 = median_err(400), e1600 = median_err(1600);
  CHECK(e400 < e100);
  CHECK(e1600 < e400);
}

TEST_CASE("zero-sensitivity parameter has zero gradient component") {
  // With zero input the tank inflow constant k5 never enters any density,
  // so its score component is exactly zero.
  ParameterVector th = watertank_theta_init();
  Vec x1(2);
  x1 << 6.0, 5.0;
  auto model = watertank_model(x1);
  Dataset<Vec> data;
  {
    RandomStream rng(9, 0);
    std::vector<Vec> inputs(25, scalar_vec(0.0));
    auto [traj, obs] = simulate(model, inputs, th, rng);
    data.inputs = inputs;
    for (auto& y : obs) data.observations.push_back(y);
  }
  ScoreResult r = score_and_hessian(model, data, th, 200, RandomStream(12, 0));
  CHECK(r.gradient[th.index_of("k5")] == 0.0);
  CHECK(std::abs(r.gradient[th.index_of("k1")]) > 0.0);
}

TEST_CASE("particle Hessian matches finite differences of the Kalman loglik") {
  // This pins the sign of the v v' term in the per-step aggregate.
  ParameterVector th = scalar_lgss_theta(0.7, 1.0, 0.6, 0.5);
  Dataset<Vec> data = lgss_data(th, 40, 3);
  Mat fd = fd_hessian(data, th);

  Mat avg = Mat::Zero(4, 4);
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    ScoreResult r =
        score_and_hessian(make_scalar_lgss(), data, th, 2000, RandomStream(70 + s, 0));
    CHECK((r.hessian - r.hessian.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    avg += r.hessian;
  }
  avg /= seeds;
  double scale = fd.cwiseAbs().maxCoeff();
  CHECK((avg - fd).cwiseAbs().maxCoeff() < 0.15 * scale);
}

TEST_CASE("T=1 score collapses to the weighted one-step gradient") {
  ParameterVector th = scalar_lgss_theta(0.7, 1.0, 0.6, 0.5);
  Dataset<Vec> data = lgss_data(th, 1, 4);
  auto model = make_scalar_lgss();
  ScoreResult r = score_and_hessian(model, data, th, 500, RandomStream(5, 0));
  // Only c and r can have nonzero one-step gradients (a, q enter from t=2).
  CHECK(r.gradient[th.index_of("a")] == 0.0);
  CHECK(r.gradient[th.index_of("q")] == 0.0);
  CHECK(std::isfinite(r.gradient[th.index_of("c")]));
}

TEST_CASE("score requires grad_logs") {
  ParameterVector th = scalar_lgss_theta(0.7, 1.0, 0.6, 0.5);
  Dataset<Vec> data = lgss_data(th, 5, 5);
  auto model = make_scalar_lgss();
  model.grad_logs.reset();
  CHECK_THROWS_AS(score_and_hessian(model, data, th, 10, RandomStream(0, 0)),
                  std::invalid_argument);
}

TEST_CASE("simulate_output on LGSS is the deterministic rollout") {
  LgssSpec s = LgssSpec::scalar(0.5, 2.0, 0.3, 0.2, 1.0, 1.0, 1.0, 0.5);
  std::vector<Vec> inputs = {scalar_vec(1.0), scalar_vec(2.0), scalar_vec(0.0)};
  auto yhat = simulate_output(s, inputs);
  // x1=1, x2=0.5*1+2=2.5, x3=1.25; y=2x+0.5u
  CHECK(yhat[0][0] == doctest::Approx(2.0 + 0.5));
  CHECK(yhat[1][0] == doctest::Approx(5.0 + 1.0));
  CHECK(yhat[2][0] == doctest::Approx(2.5));
}

TEST_CASE("empty water tanks stay empty under zero input") {
  ParameterVector th = watertank_theta_estimate();
  std::vector<Vec> inputs(10, scalar_vec(0.0));
  Vec x1 = Vec::Zero(2);
  auto yhat = watertank_simulate_output(th, inputs, x1);
  for (const auto& y : yhat) CHECK(y[0] == 0.0);
}

TEST_CASE("e_rms examples") {
  auto v = [](std::initializer_list<double> xs) {
    std::vector<Vec> out;
    for (double x : xs) out.push_back(scalar_vec(x));
    return out;
  };
  CHECK(e_rms(v({1.0, 2.0}), v({1.0, 2.0})) == 0.0);
  CHECK(e_rms(v({1.0, 2.0, 3.0}), v({1.5, 2.5, 3.5})) == doctest::Approx(0.5));
  CHECK(e_rms(v({1.0, 2.0}), v({0.0, 0.0})) == doctest::Approx(std::sqrt(2.5)));
  CHECK_THROWS_AS(e_rms(v({1.0}), v({1.0, 2.0})), std::invalid_argument);

  // Metric properties on random triples.
  RandomStream rng(6, 0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<Vec> a, b, c;
    for (int t = 0; t < 5; ++t) {
      a.push_back(scalar_vec(draw_normal(rng)));
      b.push_back(scalar_vec(draw_normal(rng)));
      c.push_back(scalar_vec(draw_normal(rng)));
    }
    CHECK(e_rms(a, b) >= 0.0);
    CHECK(e_rms(a, c) <= e_rms(a, b) + e_rms(b, c) + 1e-12);
  }
}

TEST_CASE("acf: iid noise, AR(1), and error cases") {
  RandomStream rng(7, 0);
  std::vector<double> iid;
  for (int t = 0; t < 100000; ++t) iid.push_back(draw_normal(rng));
  AcfSeries a = acf(iid, 10);
  CHECK(a.rho[0] == 1.0);
  for (int k = 1; k <= 10; ++k) CHECK(std::abs(a.rho[k]) < 0.02);

  std::vector<double> ar1 = {0.0};
  for (int t = 1; t < 100000; ++t)
    ar1.push_back(0.9 * ar1.back() + draw_normal(rng));
  AcfSeries b = acf(ar1, 5);
  CHECK(b.rho[1] == doctest::Approx(0.9).epsilon(0.012));
  CHECK(b.iact > 1.0);
  for (double r : b.rho) CHECK(std::abs(r) <= 1.0 + 1e-12);

  CHECK_THROWS_AS(acf(std::vector<double>(100, 3.0), 5), std::invalid_argument);
  CHECK_THROWS_AS(acf({1.0, 2.0}, 5), std::invalid_argument);
}

TEST_CASE("loglik variance shrinks with more particles on the tanks") {
  ParameterVector th = watertank_theta_estimate();
  Vec x1(2);
  x1 << 6.0, 5.0;
  auto model = watertank_model(x1);
  Dataset<Vec> data;
  {
    RandomStream rng(8, 0);
    std::vector<Vec> inputs;
    for (int t = 0; t < 40; ++t)
      inputs.push_back(scalar_vec(2.0 + 1.5 * std::sin(0.09 * t)));
    auto [traj, obs] = simulate(model, inputs, th, rng);
    data.inputs = inputs;
    for (auto& y : obs) data.observations.push_back(y);
  }
  auto variance = [&](int N) {
    std::vector<double> z;
    for (std::uint64_t s = 0; s < 25; ++s)
      z.push_back(estimate_loglik(model, data, th, N, RandomStream(300 + s, 0)));
    double m = 0, v = 0;
    for (double x : z) m += x;
    m /= z.size();
    for (double x : z) v += (x - m) * (x - m);
    return v / (z.size() - 1);
  };
  double v10 = variance(10), v100 = variance(100), v1000 = variance(1000);
  CHECK(v100 < v10);
  CHECK(v1000 < v100);
}
