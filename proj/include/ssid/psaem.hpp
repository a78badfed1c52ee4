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

#ifndef SSID_PSAEM_HPP
#define SSID_PSAEM_HPP

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssid/models/watertank.hpp"
#include "ssid/smc.hpp"

namespace ssid {

/// Model plug-in for the stochastic-approximation EM: vectorized sufficient
/// statistics of one weighted trajectory ensemble, and a maximizer mapping
/// smoothed statistics back to parameters. The statistics must be linear in
/// the ensemble so that exponential smoothing of the vector smooths the
/// surrogate objective.
template <class State, class Obs>
struct PsaemOps {
  std::function<Vec(const std::vector<std::vector<State>>& trajectories,
                    const std::vector<double>& weights,
                    const Dataset<Obs>& data, const ParameterVector& theta)>
      suffstats;
  /// Returns false when the M-step fails; theta is then left untouched.
  std::function<bool(const Vec& stats, ParameterVector& theta)> maximize;
};

struct PsaemConfig {
  int iters = 50;
  double step_exponent = 0.7;  // gamma_k = k^(-exponent); gamma_1 = 1
};

template <class State>
struct PsaemResult {
  ParameterVector theta;
  std::vector<ParameterVector> trace;  // iterate after each iteration
  std::vector<State> reference;        // final retained trajectory
};

/// Particle stochastic-approximation EM: one ancestor-sampling conditional
/// SMC sweep per iteration (keeping the previous reference trajectory), an
/// exponentially smoothed sufficient-statistic surrogate, and a closed-form
/// or numeric M-step supplied by ops.
template <class State, class Obs>
PsaemResult<State> psaem(const StateSpaceModel<State, Obs>& model,
                         const Dataset<Obs>& data,
                         const ParameterVector& theta0, int N,
                         const PsaemOps<State, Obs>& ops,
                         const PsaemConfig& config, RandomStream rng) {
  if (!ops.suffstats || !ops.maximize)
    throw std::invalid_argument("psaem requires suffstats and maximize");
  PsaemResult<State> res;
  res.theta = theta0;

  // Initial reference trajectory from a plain bootstrap sweep.
  {
    auto ens = smc_run(model, data, theta0, bootstrap_proposal(model), N,
                       rng.split(0xab1eull));
    RandomStream pick = rng.split(0x9121ull);
    int idx = draw_categorical(ens.norm_weights.back(), pick);
    res.reference = ens.trajectory(idx);
  }

  Vec stats;
  for (int k = 1; k <= config.iters; ++k) {
    auto cs = csmc_run(model, data, res.theta, res.reference, N,
                       rng.split(static_cast<std::uint64_t>(k)),
                       /*ancestor_sampling=*/true);
    res.reference = cs.reference;

    const auto& ens = cs.ensemble;
    std::vector<std::vector<State>> trajs(N);
    for (int i = 0; i < N; ++i) trajs[i] = ens.trajectory(i);
    Vec s_hat = ops.suffstats(trajs, ens.norm_weights.back(), data, res.theta);

    double gamma = std::pow(static_cast<double>(k), -config.step_exponent);
    if (k == 1) gamma = 1.0;
    stats = (k == 1) ? s_hat : Vec((1.0 - gamma) * stats + gamma * s_hat);

    ParameterVector cand = res.theta;
    bool ok = false;
    try {
      ok = ops.maximize(stats, cand);
    } catch (const std::exception&) {
      ok = false;
    }
    if (ok) res.theta = cand;  // otherwise retain the current iterate
    res.trace.push_back(res.theta);
  }
  return res;
}

/// Sufficient statistics and M-step for the scalar linear-Gaussian model
/// (parameters a, c, q, r); flags select which to re-estimate. Layout:
/// [sum x_{t-1}^2, sum x_t x_{t-1}, sum x_t^2 (t>=2),
///  sum x_t^2 (observed), sum x_t y_t, sum y_t^2, T-1, n_obs].
struct ScalarLgssPsaemFlags {
  bool update_a = true;
  bool update_c = true;
  bool update_q = true;
  bool update_r = true;
};

inline PsaemOps<Vec, Vec> scalar_lgss_psaem_ops(ScalarLgssPsaemFlags flags = {}) {
  PsaemOps<Vec, Vec> ops;
  ops.suffstats = [](const std::vector<std::vector<Vec>>& trajs,
                     const std::vector<double>& w, const Dataset<Vec>& data,
                     const ParameterVector&) {
    Vec s = Vec::Zero(8);
    const int T = data.T();
    for (std::size_t i = 0; i < trajs.size(); ++i) {
      for (int t = 1; t < T; ++t) {
        double xp = trajs[i][t - 1][0], x = trajs[i][t][0];
        s[0] += w[i] * xp * xp;
        s[1] += w[i] * x * xp;
        s[2] += w[i] * x * x;
      }
      for (int t = 0; t < T; ++t) {
        if (!data.observed(t)) continue;
        double x = trajs[i][t][0], y = (*data.observations[t])[0];
        s[3] += w[i] * x * x;
        s[4] += w[i] * x * y;
        s[5] += w[i] * y * y;
      }
    }
    s[6] = T - 1;
    s[7] = 0;
    for (int t = 0; t < T; ++t)
      if (data.observed(t)) s[7] += 1;
    return s;
  };
  ops.maximize = [flags](const Vec& s, ParameterVector& th) {
    double a = th.get("a"), c = th.get("c");
    if (flags.update_a) {
      if (s[0] <= 0.0) return false;
      a = s[1] / s[0];
    }
    if (flags.update_q) {
      double q = (s[2] - 2.0 * a * s[1] + a * a * s[0]) / s[6];
      if (!(q > 0.0) || !std::isfinite(q)) return false;
      th.set("q", q);
    }
    if (flags.update_c) {
      if (s[3] <= 0.0) return false;
      c = s[4] / s[3];
    }
    if (flags.update_r) {
      if (s[7] <= 0.0) return false;
      double r = (s[5] - 2.0 * c * s[4] + c * c * s[3]) / s[7];
      if (!(r > 0.0) || !std::isfinite(r)) return false;
      th.set("r", r);
    }
    if (flags.update_a) th.set("a", a);
    if (flags.update_c) th.set("c", c);
    return true;
  };
  return ops;
}

/// Sufficient statistics and M-step for the water-tank model. The transition
/// mean is linear in (k1..k6), so the M-step is a weighted least-squares
/// solve for the flow constants plus closed-form variance updates. Layout:
/// [vec(M1) (36), M2 (6), sum |x_t - base|^2, n_trans, obs SSE, n_obs]
/// with M1 = sum phi' phi and M2 = sum phi' (x_t - base).
inline PsaemOps<Vec, Vec> watertank_psaem_ops(
    std::vector<int> active = {0, 1, 2, 3, 4, 5}) {
  PsaemOps<Vec, Vec> ops;
  ops.suffstats = [](const std::vector<std::vector<Vec>>& trajs,
                     const std::vector<double>& w, const Dataset<Vec>& data,
                     const ParameterVector&) {
    Vec s = Vec::Zero(46);
    Eigen::Map<Mat> M1(s.data(), 6, 6);
    Eigen::Map<Vec> M2(s.data() + 36, 6);
    const int T = data.T();
    for (std::size_t i = 0; i < trajs.size(); ++i) {
      for (int t = 1; t < T; ++t) {
        TankRegression reg = watertank_regression(trajs[i][t - 1], data.inputs[t]);
        Vec resid = trajs[i][t] - reg.base;
        M1 += w[i] * reg.phi.transpose() * reg.phi;
        M2 += w[i] * reg.phi.transpose() * resid;
        s[42] += w[i] * resid.squaredNorm();
      }
      for (int t = 0; t < T; ++t) {
        if (!data.observed(t)) continue;
        double e = (*data.observations[t])[0] - tank_cap(trajs[i][t][1]);
        s[44] += w[i] * e * e;
      }
    }
    s[43] = 2.0 * (T - 1);
    double n_obs = 0;
    for (int t = 0; t < T; ++t)
      if (data.observed(t)) n_obs += 1;
    s[45] = n_obs;
    return s;
  };
  // Reduced models restrict the least-squares M-step to the active flow
  // constants; the remaining k's keep their (typically frozen-at-zero) value.
  ops.maximize = [active](const Vec& s, ParameterVector& th) {
    Eigen::Map<const Mat> M1full(s.data(), 6, 6);
    Eigen::Map<const Vec> M2full(s.data() + 36, 6);
    const int p = static_cast<int>(active.size());
    Mat M1(p, p);
    Vec M2(p);
    for (int i = 0; i < p; ++i) {
      M2[i] = M2full[active[i]];
      for (int j = 0; j < p; ++j) M1(i, j) = M1full(active[i], active[j]);
    }
    Eigen::LDLT<Mat> ldlt(M1);
    if (ldlt.info() != Eigen::Success) return false;
    Vec k = ldlt.solve(M2);
    if (!k.allFinite()) return false;
    double sigv2 = (s[42] - 2.0 * k.dot(M2) + k.dot(M1 * k)) / s[43];
    if (!std::isfinite(sigv2)) return false;
    sigv2 = std::max(sigv2, 1e-12);  // exact fits floor at a tiny variance
    if (s[45] <= 0.0) return false;
    double sige2 = s[44] / s[45];
    if (!std::isfinite(sige2)) return false;
    sige2 = std::max(sige2, 1e-12);
    const char* names[] = {"k1", "k2", "k3", "k4", "k5", "k6"};
    for (int i = 0; i < p; ++i) th.set(names[active[i]], k[i]);
    th.set("sigv2", sigv2);
    th.set("sige2", sige2);
    return true;
  };
  return ops;
}

/// Trace CSV shared with the other learners: iter, theta components.
inline void write_theta_trace_csv(const std::vector<ParameterVector>& trace,
                                  const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace: " + path);
  out << "iter";
  if (!trace.empty())
    for (const auto& name : trace.front().names()) out << ',' << name;
  out << '\n';
  char buf[64];
  for (std::size_t k = 0; k < trace.size(); ++k) {
    out << k;
    for (std::size_t i = 0; i < trace[k].size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.12g", trace[k].get(i));
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace ssid

#endif  // SSID_PSAEM_HPP
