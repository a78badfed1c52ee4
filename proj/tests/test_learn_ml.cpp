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
#include <cstdio>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "ssid/gradient_search.hpp"
#include "ssid/pem.hpp"
#include "ssid/psaem.hpp"

using namespace ssid;

namespace {

Dataset<Vec> lgss_data(const ParameterVector& th, int T, std::uint64_t seed) {
  auto model = make_scalar_lgss();
  RandomStream rng(seed, 77);
  auto [traj, obs] = simulate(model, std::vector<Vec>(T, Vec(0)), th, rng);
  Dataset<Vec> data;
  data.inputs.assign(T, Vec(0));
  for (auto& y : obs) data.observations.push_back(y);
  return data;
}

// Scalar LGSS with only q free; a, c, r frozen by point-mass bounds.
ParameterVector theta_q_only(double a, double c, double q, double r) {
  ParameterVector th;
  th.add("a", a, {a, a});
  th.add("c", c, {c, c});
  th.add("q", q, {0.0, std::numeric_limits<double>::infinity()});
  th.add("r", r, {r, r});
  return th;
}

double grid_ml_q(const Dataset<Vec>& data, const ParameterVector& th_base) {
  double best_q = 0, best = -std::numeric_limits<double>::infinity();
  for (int i = 1; i <= 2000; ++i) {
    double q = 0.002 * i;
    ParameterVector th = th_base;
    th.set("q", q);
    double ll = kalman_filter(scalar_lgss_spec(th), data).loglik;
    if (ll > best) {
      best = ll;
      best_q = q;
    }
  }
  return best_q;
}

}  // namespace

TEST_CASE("gradient_search recovers the process-noise variance") {
  ParameterVector truth = scalar_lgss_theta(0.8, 1.0, 0.5, 0.3);
  Dataset<Vec> data = lgss_data(truth, 150, 1);
  ParameterVector th0 = theta_q_only(0.8, 1.0, 3.0, 0.3);  // far-off start
  double q_star = grid_ml_q(data, th0);

  GradientSearchConfig cfg;
  cfg.max_iters = 60;
  cfg.init_step = 0.5;
  SearchState state =
      gradient_search(make_scalar_lgss(), data, th0, 1000, cfg, RandomStream(2, 0));
  CHECK(std::abs(state.theta.get("q") - q_star) < 0.2 * q_star);
  // Frozen parameters stay put.
  CHECK(state.theta.get("a") == 0.8);
  CHECK(state.theta.get("r") == 0.3);
}

TEST_CASE("zero gradient leaves the iterate unchanged") {
  // All parameters point-mass: every direction is zero on the search scale.
  ParameterVector th0 = theta_q_only(0.8, 1.0, 0.5, 0.3);
  th0 = ParameterVector();
  th0.add("a", 0.8, {0.8, 0.8});
  th0.add("c", 1.0, {1.0, 1.0});
  th0.add("q", 0.5, {0.5, 0.5});
  th0.add("r", 0.3, {0.3, 0.3});
  Dataset<Vec> data = lgss_data(scalar_lgss_theta(0.8, 1.0, 0.5, 0.3), 30, 3);
  GradientSearchConfig cfg;
  cfg.max_iters = 5;
  SearchState state =
      gradient_search(make_scalar_lgss(), data, th0, 100, cfg, RandomStream(4, 0));
  for (const auto& it : state.trace)
    for (std::size_t i = 0; i < th0.size(); ++i)
      CHECK(it.theta.get(i) == th0.get(i));
}

TEST_CASE("particle gradient points within 30 degrees of the exact gradient") {
  // Evaluated away from the optimum, where the exact gradient is sizable.
  Dataset<Vec> data = lgss_data(scalar_lgss_theta(0.8, 1.0, 0.5, 0.3), 40, 5);
  ParameterVector th = scalar_lgss_theta(0.7, 1.1, 0.9, 0.45);
  auto kal = [&](ParameterVector p) {
    return kalman_filter(scalar_lgss_spec(p), data).loglik;
  };
  Vec fd(4);
  for (std::size_t i = 0; i < 4; ++i) {
    double h = 1e-5 * (1.0 + std::abs(th.get(i)));
    ParameterVector up = th, dn = th;
    up.set(i, th.get(i) + h);
    dn.set(i, th.get(i) - h);
    fd[i] = (kal(up) - kal(dn)) / (2.0 * h);
  }
  int good = 0;
  for (int s = 0; s < 50; ++s) {
    Vec g = score_and_hessian(make_scalar_lgss(), data, th, 2000,
                              RandomStream(100 + s, 0))
                .gradient;
    double cosang = g.dot(fd) / (g.norm() * fd.norm());
    if (cosang > std::cos(30.0 * M_PI / 180.0)) ++good;
  }
  CHECK(good >= 45);
}

TEST_CASE("search trace CSV has the documented columns") {
  ParameterVector th0 = theta_q_only(0.8, 1.0, 1.5, 0.3);
  Dataset<Vec> data = lgss_data(scalar_lgss_theta(0.8, 1.0, 0.5, 0.3), 30, 6);
  GradientSearchConfig cfg;
  cfg.max_iters = 3;
  SearchState state =
      gradient_search(make_scalar_lgss(), data, th0, 100, cfg, RandomStream(7, 0));
  std::string path = "/tmp/ssid_search_trace.csv";
  write_search_trace_csv(state, path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "iter,a,c,q,r,logz,step,accepted");
  int rows = 0;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) ++rows;
  CHECK(rows == 3);
  std::remove(path.c_str());
}

TEST_CASE("pem_lgss: monotone likelihood and fixed point at the optimum") {
  ParameterVector truth = scalar_lgss_theta(0.8, 1.0, 0.5, 0.3);
  Dataset<Vec> data = lgss_data(truth, 100, 8);
  LgssSpec s0 = LgssSpec::scalar(0.2, 0.5, 2.0, 1.0, 0.0, 1.0);
  PemOptions opt;
  opt.iters = 50;
  PemResult res = pem_lgss(s0, data, opt);
  REQUIRE(res.logliks.size() == 51);
  for (std::size_t k = 1; k < res.logliks.size(); ++k)
    CHECK(res.logliks[k] >= res.logliks[k - 1] - 1e-9);

  // Starting from the truth does not decrease the likelihood either.
  PemOptions one;
  one.iters = 1;
  PemResult at_truth = pem_lgss(scalar_lgss_spec(truth), data, one);
  CHECK(at_truth.logliks[1] >= at_truth.logliks[0] - 1e-9);
}

TEST_CASE("pem_lgss improves on random starts") {
  ParameterVector truth = scalar_lgss_theta(0.6, 1.2, 0.4, 0.5);
  Dataset<Vec> data = lgss_data(truth, 80, 9);
  RandomStream rng(10, 0);
  for (int trial = 0; trial < 10; ++trial) {
    LgssSpec s0 = LgssSpec::scalar(
        1.8 * draw_uniform(rng) - 0.9, 0.2 + 2.0 * draw_uniform(rng),
        0.1 + 3.0 * draw_uniform(rng), 0.1 + 3.0 * draw_uniform(rng), 0.0, 1.0);
    PemOptions opt;
    opt.iters = 30;
    PemResult res = pem_lgss(s0, data, opt);
    CHECK(res.logliks.back() >= res.logliks.front());
  }
}

TEST_CASE("pem_lgss handles missing observations") {
  ParameterVector truth = scalar_lgss_theta(0.8, 1.0, 0.5, 0.3);
  Dataset<Vec> data = lgss_data(truth, 60, 11);
  for (int t : {5, 6, 20, 41}) data.observations[t] = std::nullopt;
  PemOptions opt;
  opt.iters = 25;
  PemResult res = pem_lgss(LgssSpec::scalar(0.3, 0.7, 1.5, 1.0, 0.0, 1.0), data, opt);
  for (std::size_t k = 1; k < res.logliks.size(); ++k)
    CHECK(res.logliks[k] >= res.logliks[k - 1] - 1e-9);
}

TEST_CASE("psaem first iteration with full step matches one pEM iteration") {
  ParameterVector truth = scalar_lgss_theta(0.8, 1.0, 0.5, 0.3);
  Dataset<Vec> data = lgss_data(truth, 60, 12);

  // Exact EM update of q from an off start.
  ParameterVector th0 = theta_q_only(0.8, 1.0, 1.5, 0.3);
  PemOptions popt;
  popt.iters = 1;
  popt.update_A = popt.update_C = popt.update_R = false;
  PemResult pem = pem_lgss(scalar_lgss_spec(th0), data, popt);
  double q_pem = pem.trace.back().Q(0, 0);

  ScalarLgssPsaemFlags flags;
  flags.update_a = flags.update_c = flags.update_r = false;
  PsaemConfig cfg;
  cfg.iters = 1;
  PsaemResult<Vec> res = psaem(make_scalar_lgss(), data, th0, 4000,
                               scalar_lgss_psaem_ops(flags), cfg,
                               RandomStream(13, 0));
  CHECK(res.theta.get("q") == doctest::Approx(q_pem).epsilon(0.10));
}

TEST_CASE("psaem converges to the ML process-noise variance") {
  ParameterVector truth = scalar_lgss_theta(0.8, 1.0, 0.5, 0.3);
  Dataset<Vec> data = lgss_data(truth, 150, 14);
  ParameterVector th0 = theta_q_only(0.8, 1.0, 2.5, 0.3);
  double q_star = grid_ml_q(data, th0);

  ScalarLgssPsaemFlags flags;
  flags.update_a = flags.update_c = flags.update_r = false;
  PsaemConfig cfg;
  cfg.iters = 60;
  PsaemResult<Vec> res = psaem(make_scalar_lgss(), data, th0, 100,
                               scalar_lgss_psaem_ops(flags), cfg,
                               RandomStream(15, 0));
  CHECK(std::abs(res.theta.get("q") - q_star) < 0.2 * q_star);
}

TEST_CASE("tank M-step solves the weighted least-squares system exactly") {
  // Single noise-free trajectory: the M-step must recover the generating
  // flow constants and drive sigv2 to (near) zero.
  ParameterVector truth = watertank_theta_estimate();
  Vec x1(2);
  x1 << 6.0, 5.0;
  Dataset<Vec> data;
  std::vector<std::vector<Vec>> trajs(1);
  {
    Vec x = x1;
    RandomStream rng(16, 0);
    for (int t = 0; t < 50; ++t) {
      // Large enough input to overflow the upper tank, so k6 is identifiable.
      double u = 5.0 + 2.0 * std::sin(0.11 * t);
      data.inputs.push_back(scalar_vec(u));
      if (t > 0) x = watertank_mean(x, data.inputs[t], truth);
      trajs[0].push_back(x);
      data.observations.push_back(scalar_vec(tank_cap(x[1])));
    }
  }
  auto ops = watertank_psaem_ops();
  ParameterVector th = watertank_theta_init();
  Vec stats = ops.suffstats(trajs, {1.0}, data, th);
  REQUIRE(ops.maximize(stats, th));
  const char* names[] = {"k1", "k2", "k3", "k4", "k5", "k6"};
  for (const char* name : names)
    CHECK(th.get(name) == doctest::Approx(truth.get(name)).epsilon(1e-6));
  CHECK(th.get("sigv2") <= 1e-12);
}

TEST_CASE("learners are bit-reproducible under a fixed seed") {
  ParameterVector th0 = theta_q_only(0.8, 1.0, 1.5, 0.3);
  Dataset<Vec> data = lgss_data(scalar_lgss_theta(0.8, 1.0, 0.5, 0.3), 40, 17);
  GradientSearchConfig cfg;
  cfg.max_iters = 5;
  auto a = gradient_search(make_scalar_lgss(), data, th0, 100, cfg, RandomStream(18, 0));
  auto b = gradient_search(make_scalar_lgss(), data, th0, 100, cfg, RandomStream(18, 0));
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t k = 0; k < a.trace.size(); ++k) {
    CHECK(a.trace[k].logz == b.trace[k].logz);
    for (std::size_t i = 0; i < th0.size(); ++i)
      CHECK(a.trace[k].theta.get(i) == b.trace[k].theta.get(i));
  }

  ScalarLgssPsaemFlags flags;
  flags.update_a = flags.update_c = flags.update_r = false;
  PsaemConfig pcfg;
  pcfg.iters = 5;
  auto p1 = psaem(make_scalar_lgss(), data, th0, 50, scalar_lgss_psaem_ops(flags),
                  pcfg, RandomStream(19, 0));
  auto p2 = psaem(make_scalar_lgss(), data, th0, 50, scalar_lgss_psaem_ops(flags),
                  pcfg, RandomStream(19, 0));
  for (std::size_t k = 0; k < p1.trace.size(); ++k)
    CHECK(p1.trace[k].get("q") == p2.trace[k].get("q"));
}
