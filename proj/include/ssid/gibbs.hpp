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

#ifndef SSID_GIBBS_HPP
#define SSID_GIBBS_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "ssid/mh.hpp"
#include "ssid/models/dengue.hpp"
#include "ssid/models/watertank.hpp"
#include "ssid/smc.hpp"

namespace ssid {

/// One coordinate (or block) update of a Gibbs sampler: draws from the
/// conditional of its block given everything else held in theta.
using ConditionalSampler =
    std::function<void(ParameterVector& theta, RandomStream& rng)>;

/// Systematic-scan Gibbs sweep: apply every conditional once, in order.
inline void gibbs_sweep(const std::vector<ConditionalSampler>& conditionals,
                        ParameterVector& theta, RandomStream& rng) {
  if (conditionals.empty())
    throw std::invalid_argument("gibbs_sweep needs at least one conditional");
  for (std::size_t j = 0; j < conditionals.size(); ++j) {
    RandomStream block_rng = rng.split(j);
    conditionals[j](theta, block_rng);
  }
}

/// Beta(a, b) prior with s successes out of n binomial trials gives
/// Beta(a + s, b + n - s).
inline double conjugate_beta_binomial_update(double a, double b, long s,
                                             long n, RandomStream& rng) {
  if (a <= 0.0 || b <= 0.0)
    throw std::invalid_argument("beta prior parameters must be positive");
  if (s < 0 || n < 0 || s > n)
    throw std::invalid_argument("invalid binomial counts");
  return draw_beta(a + static_cast<double>(s), b + static_cast<double>(n - s),
                   rng);
}

/// InvGamma(a, b) prior on a Gaussian variance with observed residuals gives
/// InvGamma(a + n/2, b + sum r^2 / 2). No residuals means a prior draw.
inline double conjugate_invgamma_variance_update(
    double a, double b, const std::vector<double>& residuals,
    RandomStream& rng) {
  if (a <= 0.0 || b <= 0.0)
    throw std::invalid_argument("inverse-gamma parameters must be positive");
  double ss = 0.0;
  for (double r : residuals) ss += r * r;
  return draw_inverse_gamma(a + 0.5 * residuals.size(), b + 0.5 * ss, rng);
}

/// Draw of theta from its conditional given a full state trajectory.
template <class State, class Obs>
using ParamConditional =
    std::function<void(ParameterVector& theta, const std::vector<State>& traj,
                       const Dataset<Obs>& data, RandomStream& rng)>;

/// Particle Gibbs: alternate a conditional-SMC trajectory draw with a draw of
/// theta from its conditional given that trajectory. With ancestor_sampling
/// the trajectory kernel is the PGAS variant, which mixes much faster when
/// path degeneracy bites.
template <class State, class Obs>
ChainTrace<State> particle_gibbs(const StateSpaceModel<State, Obs>& model,
                                 const Dataset<Obs>& data,
                                 const ParamConditional<State, Obs>& conditional,
                                 const ParameterVector& theta0, int N, int M,
                                 RandomStream rng,
                                 bool ancestor_sampling = false) {
  ChainTrace<State> trace;
  trace.burn_in = M / 10;
  ParameterVector theta = theta0;

  // Initial reference trajectory from an unconditional bootstrap sweep.
  auto init = smc_run(model, data, theta, bootstrap_proposal(model), N,
                      rng.split(0xab1eull));
  RandomStream pick = rng.split(0x9121ull);
  std::vector<State> reference =
      init.trajectory(draw_categorical(init.norm_weights.back(), pick));

  for (int m = 0; m < M; ++m) {
    RandomStream iter_rng = rng.split(static_cast<std::uint64_t>(m) + 1);
    auto res = csmc_run(model, data, theta, reference, N, iter_rng.split(1),
                        ancestor_sampling);
    reference = res.reference;
    RandomStream cond_rng = iter_rng.split(2);
    conditional(theta, reference, data, cond_rng);

    trace.samples.push_back(theta);
    trace.trajectories.push_back(reference);
    trace.log_values.push_back(res.ensemble.logz);
    trace.accepted.push_back(1);
  }
  return trace;
}

/// Conditionals for the scalar LGSS model given a state trajectory:
/// conjugate inverse-gamma draws for the process variance q (residuals
/// x_{t+1} - a x_t) and the observation variance r (residuals y_t - c x_t),
/// for whichever of the two carries an inverse-gamma prior.
inline ParamConditional<Vec, Vec> scalar_lgss_param_conditional(
    const Prior& prior) {
  return [prior](ParameterVector& theta, const std::vector<Vec>& traj,
                 const Dataset<Vec>& data, RandomStream& rng) {
    auto ig = [&](const std::string& name) -> const InverseGammaPrior* {
      if (!prior.has(name)) return nullptr;
      return std::get_if<InverseGammaPrior>(&prior.marginal(name));
    };
    if (const InverseGammaPrior* pq = ig("q")) {
      double a = theta.get("a");
      std::vector<double> res;
      for (std::size_t t = 1; t < traj.size(); ++t)
        res.push_back(traj[t][0] - a * traj[t - 1][0]);
      RandomStream r1 = rng.split(1);
      theta.set("q", conjugate_invgamma_variance_update(pq->a, pq->b, res, r1));
    }
    if (const InverseGammaPrior* pr = ig("r")) {
      double c = theta.get("c");
      std::vector<double> res;
      for (int t = 0; t < data.T(); ++t)
        if (data.observed(t))
          res.push_back((*data.observations[t])[0] - c * traj[t][0]);
      RandomStream r2 = rng.split(2);
      theta.set("r", conjugate_invgamma_variance_update(pr->a, pr->b, res, r2));
    }
  };
}

/// Conditional for the water-tank parameters given a state trajectory.
/// The transition mean is linear in the flow constants k, so with Gaussian
/// priors their conditional is an exact Gaussian (use_exact_gaussian);
/// otherwise a few random-walk MH steps target the same conditional. The two
/// variances get conjugate inverse-gamma draws when so priored.
inline ParamConditional<Vec, Vec> watertank_param_conditional(
    const Prior& prior, int mh_steps = 5, double rw_scale = 0.02,
    bool use_exact_gaussian = false) {
  return [prior, mh_steps, rw_scale, use_exact_gaussian](
             ParameterVector& theta, const std::vector<Vec>& traj,
             const Dataset<Vec>& data, RandomStream& rng) {
    const int T = static_cast<int>(traj.size());
    // Stack the per-step regressions x_{t+1} - base_t = Phi_t k + v_t.
    std::vector<TankRegression> regs;
    for (int t = 0; t + 1 < T; ++t)
      regs.push_back(watertank_regression(traj[t], data.inputs[t + 1]));

    std::vector<std::string> knames;
    for (const std::string& n : theta.names())
      if (n.size() >= 2 && n[0] == 'k' && prior.has(n) &&
          !is_point_mass(prior.marginal(n)))
        knames.push_back(n);

    if (!knames.empty() && use_exact_gaussian) {
      // Gaussian prior x Gaussian likelihood, exact posterior over the k's.
      const int K = static_cast<int>(knames.size());
      double sigv2 = theta.get("sigv2");
      Mat prec = Mat::Zero(K, K);
      Vec lin = Vec::Zero(K);
      std::vector<int> cols(K);
      for (int j = 0; j < K; ++j) {
        const auto* g = std::get_if<GaussianPrior>(&prior.marginal(knames[j]));
        if (g == nullptr)
          throw std::invalid_argument(
              "exact conditional requires Gaussian priors on the k's");
        prec(j, j) += 1.0 / g->var;
        lin[j] += g->mean / g->var;
        cols[j] = knames[j][1] - '1';
      }
      for (int t = 0; t + 1 < T; ++t) {
        Vec resid = traj[t + 1] - regs[t].base;
        // Contribution of the k's fixed outside this block.
        for (std::size_t i = 0; i < 6; ++i) {
          bool free = false;
          for (int j = 0; j < K; ++j)
            if (cols[j] == static_cast<int>(i)) free = true;
          if (!free)
            resid -= regs[t].phi.col(i) * theta.get("k" + std::to_string(i + 1));
        }
        Mat phi(2, K);
        for (int j = 0; j < K; ++j) phi.col(j) = regs[t].phi.col(cols[j]);
        prec += phi.transpose() * phi / sigv2;
        lin += phi.transpose() * resid / sigv2;
      }
      Eigen::LLT<Mat> llt(prec);
      Mat Linv = llt.matrixL();
      Vec mean = llt.solve(lin);
      Vec z(K);
      RandomStream kr = rng.split(1);
      for (int j = 0; j < K; ++j) z[j] = draw_normal(kr);
      Vec draw = mean + Linv.transpose().triangularView<Eigen::Upper>().solve(z);
      for (int j = 0; j < K; ++j) theta.set(knames[j], draw[j]);
    } else if (!knames.empty()) {
      // MH within Gibbs on the k block, exact Gaussian transition likelihood.
      auto log_cond = [&](const ParameterVector& th) {
        double sigv2 = th.get("sigv2");
        double s = 0.0;
        for (int t = 0; t + 1 < T; ++t) {
          Vec mean = watertank_mean(traj[t], data.inputs[t + 1], th);
          s += -0.5 * (traj[t + 1] - mean).squaredNorm() / sigv2 -
               std::log(2.0 * M_PI * sigv2);
        }
        for (const std::string& n : knames)
          s += marginal_logpdf(prior.marginal(n), th.get(n));
        return s;
      };
      RandomStream kr = rng.split(1);
      double cur = log_cond(theta);
      for (int step = 0; step < mh_steps; ++step) {
        RandomStream sr = kr.split(step);
        ParameterVector cand = theta;
        for (const std::string& n : knames)
          cand.set(n, theta.get(n) + rw_scale * draw_normal(sr));
        double prop = log_cond(cand);
        if (mh_accept(prop, cur, 0.0, 0.0, sr)) {
          theta = cand;
          cur = prop;
        }
      }
    }

    auto ig = [&](const std::string& name) -> const InverseGammaPrior* {
      if (!prior.has(name)) return nullptr;
      return std::get_if<InverseGammaPrior>(&prior.marginal(name));
    };
    if (const InverseGammaPrior* pv = ig("sigv2")) {
      std::vector<double> res;
      for (int t = 0; t + 1 < T; ++t) {
        Vec mean = watertank_mean(traj[t], data.inputs[t + 1], theta);
        res.push_back(traj[t + 1][0] - mean[0]);
        res.push_back(traj[t + 1][1] - mean[1]);
      }
      RandomStream vr = rng.split(2);
      theta.set("sigv2",
                conjugate_invgamma_variance_update(pv->a, pv->b, res, vr));
    }
    if (const InverseGammaPrior* pe = ig("sige2")) {
      std::vector<double> res;
      for (int t = 0; t < data.T(); ++t)
        if (data.observed(t))
          res.push_back((*data.observations[t])[0] - tank_cap(traj[t][1]));
      RandomStream er = rng.split(3);
      theta.set("sige2",
                conjugate_invgamma_variance_update(pe->a, pe->b, res, er));
    }
  };
}

/// Conditional for the dengue parameters given a sampled trajectory: every
/// probability is a beta-binomial block whose successes and trials are read
/// off the per-step transition counts; point-mass priors are respected (the
/// model pins gamma_m at 0).
inline ParamConditional<SeirState, long> dengue_param_conditional(
    const Prior& prior) {
  return [prior](ParameterVector& theta, const std::vector<SeirState>& traj,
                 const Dataset<long>& data, RandomStream& rng) {
    struct Block {
      const char* name;
      long s = 0, n = 0;
    };
    Block blocks[] = {{"lambda_h"}, {"delta_h"}, {"gamma_h"}, {"lambda_m"},
                      {"delta_m"},  {"gamma_m"}, {"rho"}};
    for (std::size_t t = 1; t < traj.size(); ++t) {
      const SeirState& prev = traj[t - 1];
      const SeirState& cur = traj[t];
      blocks[0].s += cur.new_eh, blocks[0].n += cur.tau_h;
      blocks[1].s += cur.new_ih, blocks[1].n += prev.eh;
      blocks[2].s += cur.new_rh, blocks[2].n += prev.ih;
      blocks[3].s += cur.new_em, blocks[3].n += cur.tau_m;
      blocks[4].s += cur.new_im, blocks[4].n += prev.em;
      blocks[5].s += cur.new_rm, blocks[5].n += prev.im;
    }
    for (int t = 0; t < data.T(); ++t)
      if (data.observed(t)) {
        blocks[6].s += *data.observations[t];
        blocks[6].n += traj[t].z;
      }
    for (std::size_t j = 0; j < 7; ++j) {
      const Block& b = blocks[j];
      if (!prior.has(b.name)) continue;
      const MarginalPrior& marg = prior.marginal(b.name);
      if (const PointMassPrior* pm = std::get_if<PointMassPrior>(&marg)) {
        theta.set(b.name, pm->value);
        continue;
      }
      const BetaPrior* beta = std::get_if<BetaPrior>(&marg);
      if (beta == nullptr)
        throw std::invalid_argument(
            "dengue conditional requires beta or point-mass priors");
      RandomStream block_rng = rng.split(j);
      theta.set(b.name, conjugate_beta_binomial_update(beta->alpha, beta->beta,
                                                       b.s, b.n, block_rng));
    }
  };
}

namespace detail {

inline double quantile_sorted(const std::vector<double>& s, double p) {
  double pos = p * (s.size() - 1);
  std::size_t lo = static_cast<std::size_t>(pos);
  std::size_t hi = std::min(lo + 1, s.size() - 1);
  double frac = pos - lo;
  return (1.0 - frac) * s[lo] + frac * s[hi];
}

}  // namespace detail

/// Per-parameter posterior summary over the post-burn-in samples:
/// mean, sd, the 5/25/50/75/95% quantiles, IACT, and ESS.
template <class State>
void write_chain_summary_csv(const ChainTrace<State>& trace,
                             const std::string& path) {
  if (trace.size() <= static_cast<std::size_t>(trace.burn_in))
    throw std::invalid_argument("chain shorter than its burn-in");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write summary: " + path);
  out << "param,mean,sd,q05,q25,q50,q75,q95,iact,ess\n";
  const auto& names = trace.samples.front().names();
  char buf[64];
  for (const std::string& name : names) {
    std::vector<double> s = trace.component(name);
    const std::size_t n = s.size();
    double mean = 0.0;
    for (double x : s) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : s) var += (x - mean) * (x - mean);
    double sd = n > 1 ? std::sqrt(var / (n - 1)) : 0.0;
    double iact = 1.0;
    if (sd > 0.0)
      iact = acf(s, std::min<int>(static_cast<int>(n) - 1, 200)).iact;
    double ess = n / iact;
    std::vector<double> sorted = s;
    std::sort(sorted.begin(), sorted.end());
    out << name;
    for (double v : {mean, sd, detail::quantile_sorted(sorted, 0.05),
                     detail::quantile_sorted(sorted, 0.25),
                     detail::quantile_sorted(sorted, 0.50),
                     detail::quantile_sorted(sorted, 0.75),
                     detail::quantile_sorted(sorted, 0.95), iact, ess}) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace ssid

#endif  // SSID_GIBBS_HPP
