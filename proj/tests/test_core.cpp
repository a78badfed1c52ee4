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
#include <filesystem>

#include <doctest.h>

#include "ssid/dataset.hpp"
#include "ssid/model.hpp"
#include "ssid/models/hmm.hpp"
#include "ssid/models/lgss.hpp"
#include "ssid/parameters.hpp"
#include "ssid/prior.hpp"
#include "ssid/random.hpp"

using namespace ssid;

namespace {

double normal_logpdf(double x, double mean, double var) {
  double r = x - mean;
  return -0.5 * std::log(2.0 * M_PI * var) - 0.5 * r * r / var;
}

}  // namespace

TEST_CASE("random stream reproducibility and splitting") {
  RandomStream a(42, 7), b(42, 7);
  for (int i = 0; i < 100; ++i) CHECK(a() == b());

  RandomStream parent(42, 7);
  RandomStream c1 = parent.split(1);
  RandomStream c1_again = parent.split(1);
  CHECK(c1() == c1_again());

  // Splitting does not advance the parent.
  RandomStream p2(42, 7);
  (void)p2.split(3);
  RandomStream p3(42, 7);
  CHECK(p2() == p3());

  // Distinct streams give different sequences.
  RandomStream d(42, 8);
  RandomStream e(43, 7);
  RandomStream f(42, 7);
  CHECK(d() != f());
  CHECK(e() != RandomStream(42, 7)());
}

TEST_CASE("draw helpers have correct first moments") {
  RandomStream rng(1, 0);
  const int n = 200000;
  double su = 0, sn = 0, sb = 0;
  for (int i = 0; i < n; ++i) {
    su += draw_uniform(rng);
    sn += draw_normal(rng);
    sb += draw_beta(2.0, 3.0, rng);
  }
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(sn / n) < 0.01);
  CHECK(sb / n == doctest::Approx(0.4).epsilon(0.02));

  long bsum = 0;
  for (int i = 0; i < 20000; ++i) bsum += draw_binomial(10, 0.3, rng);
  CHECK(bsum / 20000.0 == doctest::Approx(3.0).epsilon(0.02));
}

TEST_CASE("categorical ties resolved by first cumsum exceeding u") {
  std::vector<double> w{0.0, 1.0, 0.0};
  RandomStream rng(5, 5);
  for (int i = 0; i < 50; ++i) CHECK(draw_categorical(w, rng) == 1);
}

TEST_CASE("parameter transforms round-trip and respect bounds") {
  ParameterVector th;
  th.add("free", -1.3);
  th.add("pos", 0.7, {0.0, std::numeric_limits<double>::infinity()});
  th.add("unit", 0.25, {0.0, 1.0});

  Vec eta = th.to_unconstrained();
  ParameterVector th2 = th;
  th2.from_unconstrained(eta);
  for (std::size_t i = 0; i < th.size(); ++i)
    CHECK(th2.get(i) == doctest::Approx(th.get(i)).epsilon(1e-12));

  // Any unconstrained point maps inside the box.
  ParameterVector th3 = th;
  Vec wild(3);
  wild << 100.0, -50.0, 30.0;
  th3.from_unconstrained(wild);
  CHECK(th3.get("pos") > 0.0);
  CHECK(th3.get("unit") > 0.0);
  CHECK(th3.get("unit") < 1.0);

  CHECK_THROWS_AS(th.set("pos", -1.0), std::invalid_argument);
  CHECK_THROWS_AS(th.add("pos", 1.0), std::invalid_argument);
}

TEST_CASE("prior log-density examples") {
  CHECK(marginal_logpdf(UniformPrior{0.0, 1.0}, 0.5) == 0.0);
  CHECK(marginal_logpdf(BetaPrior{1.0, 1.0}, 0.3) == doctest::Approx(0.0));
  CHECK(marginal_logpdf(UniformPrior{0.0, 1.0}, 1.5) == kNegInf);
  CHECK(marginal_logpdf(PointMassPrior{0.0}, 0.0) == 0.0);
  CHECK(marginal_logpdf(PointMassPrior{0.0}, 0.1) == kNegInf);
}

TEST_CASE("mode-matched beta") {
  BetaPrior p = mode_matched_beta(4.4);
  CHECK(p.alpha == doctest::Approx(1.0 + 2.0 / 4.4));
  CHECK(p.beta == doctest::Approx(3.0 - 2.0 / 4.4));
  BetaPrior p65 = mode_matched_beta(6.5);
  CHECK(p65.alpha == doctest::Approx(1.0 + 2.0 / 6.5));
  CHECK(p65.beta == doctest::Approx(3.0 - 2.0 / 6.5));

  // Mode identity (alpha-1)/(alpha+beta-2) = 1/mu for several mu.
  for (double mu : {2.5, 4.4, 4.5, 6.5, 20.0}) {
    BetaPrior b = mode_matched_beta(mu);
    CHECK((b.alpha - 1.0) / (b.alpha + b.beta - 2.0) ==
          doctest::Approx(1.0 / mu).epsilon(1e-12));
  }
  CHECK_THROWS_AS(mode_matched_beta(2.0), std::domain_error);

  // Density at the mode against a grid-normalized oracle.
  double mode = 1.0 / 4.4;
  const int G = 2000000;
  double mass = 0.0, at_mode = 0.0;
  for (int i = 0; i < G; ++i) {
    double x = (i + 0.5) / G;
    double f = std::pow(x, p.alpha - 1.0) * std::pow(1.0 - x, p.beta - 1.0);
    mass += f / G;
    if (std::abs(x - mode) < 0.5 / G) at_mode = f;
  }
  CHECK(marginal_logpdf(p, mode) ==
        doctest::Approx(std::log(at_mode / mass)).epsilon(1e-4));
}

TEST_CASE("joint prior sums marginals and errors on missing parameter") {
  Prior prior;
  prior.add("p", BetaPrior{2.0, 2.0});
  prior.add("v", InverseGammaPrior{3.0, 1.0});
  ParameterVector th;
  th.add("p", 0.5, {0.0, 1.0});
  th.add("v", 0.2, {0.0, std::numeric_limits<double>::infinity()});
  CHECK(prior.logpdf(th) ==
        doctest::Approx(marginal_logpdf(BetaPrior{2, 2}, 0.5) +
                        marginal_logpdf(InverseGammaPrior{3, 1}, 0.2)));

  ParameterVector missing;
  missing.add("p", 0.5, {0.0, 1.0});
  CHECK_THROWS_AS(prior.logpdf(missing), std::invalid_argument);

  RandomStream rng(9, 0);
  for (int i = 0; i < 100; ++i) {
    ParameterVector s = prior.sample(th, rng);
    CHECK(s.get("p") > 0.0);
    CHECK(s.get("p") < 1.0);
    CHECK(s.get("v") > 0.0);
  }
}

TEST_CASE("log_joint on the all-zero LGSS instance") {
  auto model = make_scalar_lgss(0.0, 1.0);
  ParameterVector th = scalar_lgss_theta(1.0, 1.0, 1.0, 1.0);
  Dataset<Vec> data;
  data.inputs = {Vec(0), Vec(0)};
  data.observations = {scalar_vec(0.0), scalar_vec(0.0)};
  std::vector<Vec> traj = {scalar_vec(0.0), scalar_vec(0.0)};
  CHECK(log_joint(model, traj, data, th) ==
        doctest::Approx(4.0 * std::log(1.0 / std::sqrt(2.0 * M_PI))));
}

TEST_CASE("log_joint is -inf on a zero-density segment") {
  Hmm h;
  h.pi = Mat::Constant(2, 1, 0.5);
  h.trans = Mat(2, 2);
  h.trans << 1.0, 0.0, 0.5, 0.5;  // state 0 can never reach state 1
  h.emit = Mat::Constant(2, 2, 0.5);
  auto m = make_hmm(h);
  Dataset<int> data;
  data.inputs = {Vec(0), Vec(0)};
  data.observations = {0, 1};
  ParameterVector th;
  CHECK(log_joint(m, std::vector<int>{0, 1}, data, th) == kNegInf);
  CHECK(std::isfinite(log_joint(m, std::vector<int>{1, 1}, data, th)));
}

TEST_CASE("log_joint matches per-factor scalar oracle and decomposes") {
  RandomStream rng(17, 0);
  ParameterVector th = scalar_lgss_theta(0.8, 1.3, 0.5, 0.3);
  auto model = make_scalar_lgss(0.1, 2.0);
  Dataset<Vec> data;
  std::vector<Vec> traj;
  for (int t = 0; t < 5; ++t) {
    data.inputs.push_back(Vec(0));
    traj.push_back(scalar_vec(draw_normal(rng)));
    data.observations.push_back(t == 2 ? std::optional<Vec>{}
                                       : std::optional<Vec>{scalar_vec(draw_normal(rng))});
  }

  double oracle = normal_logpdf(traj[0][0], 0.1, 2.0);
  for (int t = 0; t < 5; ++t) {
    if (data.observations[t])
      oracle += normal_logpdf((*data.observations[t])[0], 1.3 * traj[t][0], 0.3);
    if (t >= 1) oracle += normal_logpdf(traj[t][0], 0.8 * traj[t - 1][0], 0.5);
  }
  CHECK(log_joint(model, traj, data, th) == doctest::Approx(oracle).epsilon(1e-12));

  // Prefix decomposition at split point 3.
  Dataset<Vec> head = data.slice(0, 3);
  std::vector<Vec> htraj(traj.begin(), traj.begin() + 3);
  double rest = 0.0;
  for (int t = 3; t < 5; ++t) {
    if (data.observations[t])
      rest += normal_logpdf((*data.observations[t])[0], 1.3 * traj[t][0], 0.3);
    rest += normal_logpdf(traj[t][0], 0.8 * traj[t - 1][0], 0.5);
  }
  CHECK(log_joint(model, traj, data, th) ==
        doctest::Approx(log_joint(model, htraj, head, th) + rest).epsilon(1e-12));

  std::vector<Vec> short_traj(traj.begin(), traj.begin() + 4);
  CHECK_THROWS_AS(log_joint(model, short_traj, data, th), std::invalid_argument);
}

TEST_CASE("dataset csv round-trip with missing observations") {
  Dataset<Vec> data;
  data.inputs = {scalar_vec(1.5), scalar_vec(-2.0), Vec(0)};
  data.observations = {scalar_vec(0.25), std::nullopt, scalar_vec(3.0)};
  auto path = std::filesystem::temp_directory_path() / "ssid_test_dataset.csv";
  save_dataset_csv(data, path.string());
  Dataset<Vec> back = load_dataset_csv(path.string());
  REQUIRE(back.T() == 3);
  CHECK(back.inputs[0][0] == 1.5);
  CHECK(back.inputs[2].size() == 0);
  CHECK(back.observed(0));
  CHECK(!back.observed(1));
  CHECK((*back.observations[2])[0] == 3.0);
  CHECK(back.num_observed() == 2);
  std::filesystem::remove(path);

  CHECK_THROWS(load_dataset_csv("/nonexistent/nope.csv"));
}

TEST_CASE("dataset invariants") {
  Dataset<Vec> bad;
  bad.inputs = {Vec(0)};
  bad.observations = {std::nullopt, std::nullopt};
  CHECK_THROWS_AS(bad.check(), std::invalid_argument);
  bad.inputs = {Vec(0), Vec(0)};
  CHECK_THROWS_AS(bad.check(), std::invalid_argument);  // no observation at all
}

TEST_CASE("observation density integrates to one (scalar LGSS quadrature)") {
  auto model = make_scalar_lgss();
  ParameterVector th = scalar_lgss_theta(0.9, 1.2, 0.4, 0.5);
  Vec x = scalar_vec(0.7);
  double mass = 0.0;
  const int G = 4000;
  for (int i = 0; i < G; ++i) {
    double y = -20.0 + 40.0 * (i + 0.5) / G;
    mass += std::exp(model.observation_logpdf(scalar_vec(y), x, Vec(0), 0, th)) *
            (40.0 / G);
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
}
