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

#ifndef SSID_MODELS_DENGUE_HPP
#define SSID_MODELS_DENGUE_HPP

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssid/model.hpp"
#include "ssid/prior.hpp"

namespace ssid {

/// Coupled human/mosquito SEIR compartments with integer counts. Each state
/// also records the transition counts that produced it (the binomial draws of
/// the step) because the conjugate parameter blocks need the per-step
/// successes, and z, the number of newly infectious humans accumulated since
/// the last reporting step.
struct SeirState {
  long sh = 0, eh = 0, ih = 0, rh = 0;  // humans
  long sm = 0, em = 0, im = 0, rm = 0;  // mosquitoes

  // Binomial draws of the step entering this state (all 0 for the initial
  // state): bitten susceptibles and newly exposed/infectious/recovered.
  long tau_h = 0, tau_m = 0;
  long new_eh = 0, new_ih = 0, new_rh = 0;
  long new_em = 0, new_im = 0, new_rm = 0;

  long z = 0;  // newly infectious humans since the last observation

  long human_total() const { return sh + eh + ih + rh; }
  long mosquito_total() const { return sm + em + im + rm; }
};

/// Days simulated per reported observation (weekly case counts).
constexpr int kDengueStepsPerWeek = 7;

/// Parameter layout: six transition probabilities and the reporting
/// probability, all in [0, 1].
inline ParameterVector dengue_theta(double lambda_h, double delta_h,
                                    double gamma_h, double lambda_m,
                                    double delta_m, double gamma_m,
                                    double rho) {
  ParameterVector th;
  th.add("lambda_h", lambda_h, {0.0, 1.0});
  th.add("delta_h", delta_h, {0.0, 1.0});
  th.add("gamma_h", gamma_h, {0.0, 1.0});
  th.add("lambda_m", lambda_m, {0.0, 1.0});
  th.add("delta_m", delta_m, {0.0, 1.0});
  th.add("gamma_m", gamma_m, {0.0, 1.0});
  th.add("rho", rho, {0.0, 1.0});
  return th;
}

/// Prior used for the outbreak study: uniform on the transmission and
/// reporting probabilities, mode-matched betas on the incubation/recovery
/// probabilities, and gamma_m pinned to zero (mosquitoes never recover).
inline Prior dengue_prior() {
  Prior prior;
  prior.add("lambda_h", BetaPrior{1.0, 1.0});
  prior.add("delta_h", mode_matched_beta(4.4));
  prior.add("gamma_h", mode_matched_beta(4.5));
  prior.add("lambda_m", BetaPrior{1.0, 1.0});
  prior.add("delta_m", mode_matched_beta(6.5));
  prior.add("gamma_m", PointMassPrior{0.0});
  prior.add("rho", BetaPrior{1.0, 1.0});
  return prior;
}

namespace detail {

inline double log_binomial_pmf(long k, long n, double p) {
  if (k < 0 || k > n) return kNegInf;
  if (p <= 0.0) return k == 0 ? 0.0 : kNegInf;
  if (p >= 1.0) return k == n ? 0.0 : kNegInf;
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
         std::lgamma(n - k + 1.0) + k * std::log(p) +
         (n - k) * std::log1p(-p);
}

}  // namespace detail

/// Discrete-count SEIR model of a dengue outbreak: one SMC step per day,
/// weekly reported case counts as the observations (unobserved days carry no
/// observation). The transition is sample-only — its density mixes many
/// latent binomial draws — so ancestor sampling is unavailable and plain
/// particle Gibbs is the trajectory kernel of choice.
inline StateSpaceModel<SeirState, long> dengue_model(long n_human) {
  if (n_human <= 0) throw std::invalid_argument("population must be positive");
  StateSpaceModel<SeirState, long> m;
  m.state_dim = 8;
  m.param_names = {"lambda_h", "delta_h", "gamma_h", "lambda_m",
                   "delta_m",  "gamma_m", "rho"};

  m.initial_sampler = [n_human](const ParameterVector&, RandomStream& rng) {
    SeirState x;
    x.eh = draw_poisson(5.0, rng);
    x.ih = 1 + draw_poisson(5.0, rng);
    long rem = std::max(0L, n_human - x.eh - x.ih);
    x.rh = std::min<long>(rem, static_cast<long>(draw_uniform(
                                   0.0, static_cast<double>(rem) + 1.0, rng)));
    x.sh = n_human - x.eh - x.ih - x.rh;
    // Mosquito population: three orders of magnitude of uncertainty, drawn
    // once per trajectory and conserved thereafter.
    double u = draw_uniform(-1.0, 2.0, rng);
    x.sm = static_cast<long>(std::pow(10.0, u) * n_human);
    x.em = x.im = x.rm = 0;
    x.z = 0;
    return x;
  };
  // Initial density left unset (the mosquito size has a continuous
  // generator); the bootstrap/CSMC paths never need it.

  m.transition_sampler = [n_human](const SeirState& xp, const Vec&, int t,
                                   const ParameterVector& th,
                                   RandomStream& rng) {
    SeirState x = xp;
    // Bite counts couple the two species.
    double p_bite_h = 1.0 - std::exp(-static_cast<double>(xp.im) / n_human);
    double p_bite_m = 1.0 - std::exp(-static_cast<double>(xp.ih) / n_human);
    x.tau_h = draw_binomial(xp.sh, p_bite_h, rng);
    x.tau_m = draw_binomial(xp.sm, p_bite_m, rng);
    x.new_eh = draw_binomial(x.tau_h, th.get("lambda_h"), rng);
    x.new_ih = draw_binomial(xp.eh, th.get("delta_h"), rng);
    x.new_rh = draw_binomial(xp.ih, th.get("gamma_h"), rng);
    x.new_em = draw_binomial(x.tau_m, th.get("lambda_m"), rng);
    x.new_im = draw_binomial(xp.em, th.get("delta_m"), rng);
    x.new_rm = draw_binomial(xp.im, th.get("gamma_m"), rng);
    x.sh = xp.sh - x.new_eh;
    x.eh = xp.eh + x.new_eh - x.new_ih;
    x.ih = xp.ih + x.new_ih - x.new_rh;
    x.rh = xp.rh + x.new_rh;
    x.sm = xp.sm - x.new_em;
    x.em = xp.em + x.new_em - x.new_im;
    x.im = xp.im + x.new_im - x.new_rm;
    x.rm = xp.rm + x.new_rm;
    // z accrues daily and restarts after each weekly report.
    x.z = (t % kDengueStepsPerWeek == 0 ? 0 : xp.z) + x.new_ih;
    return x;
  };
  // Transition density intentionally unset: sample-only.

  m.observation_logpdf = [](const long& y, const SeirState& x, const Vec&,
                            int, const ParameterVector& th) {
    return detail::log_binomial_pmf(y, x.z, th.get("rho"));
  };
  m.observation_sampler = [](const SeirState& x, const Vec&, int,
                             const ParameterVector& th, RandomStream& rng) {
    return draw_binomial(x.z, th.get("rho"), rng);
  };
  return m;
}

/// Weekly reported case counts with their dates.
struct DengueSeries {
  std::vector<std::string> dates;
  std::vector<long> cases;

  long total() const {
    long s = 0;
    for (long c : cases) s += c;
    return s;
  }
};

/// Loader for the outbreak CSV: header "date,y", one row per reporting week.
inline DengueSeries load_dengue_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dengue data: " + path);
  DengueSeries series;
  std::string line;
  if (!std::getline(in, line) || line.rfind("date,y", 0) != 0)
    throw std::runtime_error("expected 'date,y' header in " + path);
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string date, y;
    if (!std::getline(ls, date, ',') || !std::getline(ls, y))
      throw std::runtime_error("malformed row " + std::to_string(row) +
                               " in " + path);
    long cases = -1;
    try {
      std::size_t pos = 0;
      cases = std::stol(y, &pos);
      if (pos != y.size()) cases = -1;
    } catch (const std::exception&) {
      cases = -1;
    }
    if (cases < 0)
      throw std::runtime_error("invalid case count at row " +
                               std::to_string(row) + " in " + path);
    series.dates.push_back(date);
    series.cases.push_back(cases);
  }
  return series;
}

/// Expand weekly reports into the daily-step dataset the model runs on: each
/// week becomes kDengueStepsPerWeek days with the count observed on the last
/// day and the in-between days unobserved.
inline Dataset<long> dengue_dataset(const DengueSeries& series) {
  Dataset<long> data;
  for (long y : series.cases) {
    for (int d = 0; d < kDengueStepsPerWeek; ++d) {
      data.inputs.push_back(Vec());
      if (d + 1 == kDengueStepsPerWeek)
        data.observations.push_back(y);
      else
        data.observations.push_back(std::nullopt);
    }
  }
  return data;
}

}  // namespace ssid

#endif  // SSID_MODELS_DENGUE_HPP
