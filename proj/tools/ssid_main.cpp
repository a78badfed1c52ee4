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

// ssid: command-line experiment runner for the state-space identification
// library. Subcommands:
//   run        execute one experiment described by a JSON config (+ flag
//              overrides) and write trace/summary/manifest artifacts
//   validate   schema- and census-check a dataset file for a given model
//   summarize  recompute posterior summaries (mean/sd/quantiles/IACT/ESS)
//              from chain JSONL trace files
//
// Exit codes: 0 ok, 1 usage/config/data error, 2 algorithm/model
// incompatibility, 3 particle-system degeneracy during a run.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ssid/estimators.hpp"
#include "ssid/gibbs.hpp"
#include "ssid/gradient_search.hpp"
#include "ssid/kalman.hpp"
#include "ssid/mh.hpp"
#include "ssid/models/dengue.hpp"
#include "ssid/models/lgss.hpp"
#include "ssid/models/watertank.hpp"
#include "ssid/pem.hpp"
#include "ssid/psaem.hpp"
#include "ssid/smc.hpp"
#include "ssid/twisting.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ssid;

namespace {

// ---------------------------------------------------------------------------
// Configuration

struct ExperimentConfig {
  std::string model = "lgss-demo";  // lgss-demo | watertank | dengue
  std::string algorithm = "smc";    // see kAlgorithms
  std::string dataset;              // CSV path; optional for lgss-demo
  int N = 100;                      // particle count
  int M = 1000;                     // MCMC iterations
  int iters = 50;                   // optimizer/EM iterations
  double proposal_scale = 0.1;      // random-walk scale (unconstrained)
  std::uint64_t seed = 1;
  int chains = 1;                   // independent chains (threads)
  std::string output;               // run directory name (under output root)
};

const std::set<std::string> kAlgorithms = {
    "smc", "twisted-smc", "gradsearch", "pem", "psaem",
    "mh",  "pmmh",        "pg",         "pgas"};
const std::set<std::string> kModels = {"lgss-demo", "watertank", "dengue"};

json config_to_json(const ExperimentConfig& c) {
  return json{{"model", c.model},
              {"algorithm", c.algorithm},
              {"dataset", c.dataset},
              {"N", c.N},
              {"M", c.M},
              {"iters", c.iters},
              {"proposal_scale", c.proposal_scale},
              {"seed", c.seed},
              {"chains", c.chains},
              {"output", c.output}};
}

void config_from_json(const json& j, ExperimentConfig& c) {
  static const std::set<std::string> known = {
      "model", "algorithm", "dataset", "N",      "M",
      "iters", "proposal_scale", "seed", "chains", "output",
      "wall_time_seconds"};  // manifests are valid configs for reruns
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw std::runtime_error("unknown config key: " + it.key());
  if (j.contains("model")) c.model = j["model"].get<std::string>();
  if (j.contains("algorithm")) c.algorithm = j["algorithm"].get<std::string>();
  if (j.contains("dataset")) c.dataset = j["dataset"].get<std::string>();
  if (j.contains("N")) c.N = j["N"].get<int>();
  if (j.contains("M")) c.M = j["M"].get<int>();
  if (j.contains("iters")) c.iters = j["iters"].get<int>();
  if (j.contains("proposal_scale"))
    c.proposal_scale = j["proposal_scale"].get<double>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("chains")) c.chains = j["chains"].get<int>();
  if (j.contains("output")) c.output = j["output"].get<std::string>();
}

struct IncompatibilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Built-in demo problem: scalar LGSS with a fixed simulated series, so the
// CLI exercises every algorithm without an external dataset.

constexpr double kDemoA = 0.8, kDemoC = 1.0, kDemoQ = 0.5, kDemoR = 0.1;
constexpr int kDemoT = 100;

ParameterVector demo_theta_true() {
  return scalar_lgss_theta(kDemoA, kDemoC, kDemoQ, kDemoR);
}

Dataset<Vec> demo_dataset() {
  auto model = make_scalar_lgss();
  ParameterVector th = demo_theta_true();
  RandomStream rng(90210, 222);  // fixed: the demo data is part of the demo
  Dataset<Vec> data;
  RandomStream r0 = rng.split(0);
  Vec x = model.initial_sampler(th, r0);
  for (int t = 0; t < kDemoT; ++t) {
    RandomStream rt = rng.split(static_cast<std::uint64_t>(t) + 1);
    if (t > 0) x = model.transition_sampler(x, Vec(), t, th, rt);
    data.inputs.push_back(Vec());
    data.observations.push_back(model.observation_sampler(x, Vec(), t, th, rt));
  }
  return data;
}

Prior demo_prior() {
  Prior p;
  p.add("a", PointMassPrior{kDemoA});
  p.add("c", PointMassPrior{kDemoC});
  p.add("q", InverseGammaPrior{2.0, 1.0});
  p.add("r", InverseGammaPrior{2.0, 1.0});
  return p;
}

Prior watertank_prior() {
  Prior p;
  for (const char* k : {"k1", "k2", "k3", "k4", "k5", "k6"})
    p.add(k, GaussianPrior{0.0, 1.0});
  p.add("sigv2", InverseGammaPrior{2.0, 0.01});
  p.add("sige2", InverseGammaPrior{2.0, 0.01});
  return p;
}

// ---------------------------------------------------------------------------
// Artifact helpers

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

json theta_json(const ParameterVector& th) {
  json j;
  for (std::size_t i = 0; i < th.size(); ++i) j[th.names()[i]] = th.get(i);
  return j;
}

template <class State>
void write_smc_trace_csv(const ParticleEnsemble<State>& ens,
                         const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "t,logz_step,ess,resampled\n";
  char buf[96];
  for (int t = 0; t < ens.T(); ++t) {
    double ess = 0.0;
    for (double w : ens.norm_weights[t]) ess += w * w;
    ess = 1.0 / ess;
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%d\n", t, ens.logz_steps[t],
                  ess, static_cast<int>(ens.resampled[t]));
    out << buf;
  }
}

template <class State>
json chain_summary_json(const ChainTrace<State>& trace) {
  json medians;
  for (std::size_t i = 0; i < trace.samples[0].size(); ++i) {
    const std::string& name = trace.samples[0].names()[i];
    auto v = trace.component(name);
    std::sort(v.begin(), v.end());
    medians[name] = v[v.size() / 2];
  }
  long acc = 0;
  for (std::size_t m = 1; m < trace.accepted.size(); ++m)
    acc += trace.accepted[m] != 0;
  return json{{"posterior_median", medians},
              {"accept_rate", trace.size() > 1
                                  ? double(acc) / double(trace.size() - 1)
                                  : 0.0},
              {"iterations", trace.size()},
              {"burn_in", trace.burn_in}};
}

// Pools post-burn-in samples of several chains for a cross-chain median.
template <class State>
json pooled_chain_summary(const std::vector<ChainTrace<State>>& traces) {
  json per_chain = json::array();
  for (const auto& tr : traces) per_chain.push_back(chain_summary_json(tr));
  json medians;
  for (std::size_t i = 0; i < traces[0].samples[0].size(); ++i) {
    const std::string& name = traces[0].samples[0].names()[i];
    std::vector<double> pooled;
    for (const auto& tr : traces) {
      auto v = tr.component(name);
      pooled.insert(pooled.end(), v.begin(), v.end());
    }
    std::sort(pooled.begin(), pooled.end());
    medians[name] = pooled[pooled.size() / 2];
  }
  return json{{"chains", per_chain}, {"posterior_median", medians}};
}

// ---------------------------------------------------------------------------
// Algorithm dispatch

void require(bool ok, const std::string& why) {
  if (!ok) throw IncompatibilityError(why);
}

json run_lgss(const ExperimentConfig& c, const fs::path& outdir) {
  auto model = make_scalar_lgss();
  Dataset<Vec> data = demo_dataset();
  ParameterVector th = demo_theta_true();
  LgssSpec spec = scalar_lgss_spec(th);
  RandomStream rng(c.seed, 0);

  if (c.algorithm == "smc" || c.algorithm == "twisted-smc") {
    ParticleEnsemble<Vec> ens;
    if (c.algorithm == "smc") {
      ens = smc_run(model, data, th, bootstrap_proposal(model), c.N, rng);
    } else {
      EkfStructure e = lgss_ekf_structure(spec);
      TwistTables tab = ekf_twisting(e, data);
      auto pot = tab.potential();
      ens = smc_run(model, data, th, make_twisted_proposal(e, tab, data), c.N,
                    rng, &pot);
    }
    write_smc_trace_csv(ens, outdir / "trace.csv");
    return json{{"logz", ens.logz},
                {"loglik_kalman", kalman_filter(spec, data).loglik},
                {"theta", theta_json(th)}};
  }
  if (c.algorithm == "gradsearch") {
    ParameterVector th0 = scalar_lgss_theta(0.5, 1.0, 1.0, 1.0);
    GradientSearchConfig gc;
    gc.max_iters = c.iters;
    auto res = gradient_search(model, data, th0, c.N, gc, rng);
    write_search_trace_csv(res, (outdir / "trace.csv").string());
    return json{{"theta", theta_json(res.theta)},
                {"logz", res.trace.empty() ? 0.0 : res.trace.back().logz},
                {"aborted", res.aborted}};
  }
  if (c.algorithm == "pem") {
    LgssSpec spec0 = scalar_lgss_spec(scalar_lgss_theta(0.5, 1.0, 1.0, 1.0));
    PemOptions opt;
    opt.iters = c.iters;
    auto res = pem_lgss(spec0, data, opt);
    std::ofstream out(outdir / "trace.csv");
    out << "iter,loglik,a,c,q,r\n";
    char buf[160];
    for (std::size_t k = 0; k < res.trace.size(); ++k) {
      const LgssSpec& s = res.trace[k];
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", k,
                    res.logliks[k], s.A(0, 0), s.C(0, 0), s.Q(0, 0), s.R(0, 0));
      out << buf;
    }
    const LgssSpec& s = res.trace.back();
    return json{{"loglik", res.logliks.back()},
                {"theta",
                 {{"a", s.A(0, 0)}, {"c", s.C(0, 0)}, {"q", s.Q(0, 0)},
                  {"r", s.R(0, 0)}}},
                {"regularized", res.regularized}};
  }
  if (c.algorithm == "psaem") {
    ParameterVector th0 = scalar_lgss_theta(0.5, 1.0, 1.0, 1.0);
    PsaemConfig pc;
    pc.iters = c.iters;
    auto res = psaem(model, data, th0, c.N, scalar_lgss_psaem_ops(), pc, rng);
    write_theta_trace_csv(res.trace, (outdir / "trace.csv").string());
    return json{{"theta", theta_json(res.theta)}};
  }
  if (c.algorithm == "mh") {
    Prior prior = demo_prior();
    auto target = [&](const ParameterVector& t) {
      double lp = prior.logpdf(t);
      if (!std::isfinite(lp)) return lp;
      return lp + kalman_filter(scalar_lgss_spec(t), data).loglik;
    };
    const int F =
        static_cast<int>(ssid::detail::free_indices(th, prior).size());
    auto prop = RandomWalkProposal::isotropic(F, c.proposal_scale);
    prop.adapt = true;
    std::vector<ChainTrace<Vec>> traces(c.chains);
    std::vector<std::thread> workers;
    for (int i = 0; i < c.chains; ++i)
      workers.emplace_back([&, i] {
        traces[i] = mh_chain(target, prior, prop, th, c.M,
                             RandomStream(c.seed, static_cast<std::uint64_t>(i)));
      });
    for (auto& w : workers) w.join();
    for (int i = 0; i < c.chains; ++i) {
      write_chain_jsonl(traces[i],
                        (outdir / ("chain_" + std::to_string(i) + ".jsonl")).string());
      write_chain_summary_csv(
          traces[i],
          (outdir / ("chain_" + std::to_string(i) + "_summary.csv")).string());
    }
    return pooled_chain_summary(traces);
  }
  // Remaining: pmmh, pg, pgas.
  Prior prior = demo_prior();
  if (c.algorithm == "pmmh") {
    const int F =
        static_cast<int>(ssid::detail::free_indices(th, prior).size());
    auto prop = RandomWalkProposal::isotropic(F, c.proposal_scale);
    prop.adapt = true;
    std::vector<ChainTrace<Vec>> traces(c.chains);
    std::vector<std::thread> workers;
    for (int i = 0; i < c.chains; ++i)
      workers.emplace_back([&, i] {
        traces[i] = pmmh(model, data, prior, prop, th, c.N, c.M,
                         RandomStream(c.seed, static_cast<std::uint64_t>(i)));
      });
    for (auto& w : workers) w.join();
    for (int i = 0; i < c.chains; ++i) {
      write_chain_jsonl(traces[i],
                        (outdir / ("chain_" + std::to_string(i) + ".jsonl")).string());
      write_chain_summary_csv(
          traces[i],
          (outdir / ("chain_" + std::to_string(i) + "_summary.csv")).string());
    }
    return pooled_chain_summary(traces);
  }
  // pg / pgas
  auto cond = scalar_lgss_param_conditional(prior);
  bool as = c.algorithm == "pgas";
  std::vector<ChainTrace<Vec>> traces(c.chains);
  std::vector<std::thread> workers;
  for (int i = 0; i < c.chains; ++i)
    workers.emplace_back([&, i] {
      traces[i] = particle_gibbs(model, data, cond, th, c.N, c.M,
                                 RandomStream(c.seed, static_cast<std::uint64_t>(i)),
                                 as);
    });
  for (auto& w : workers) w.join();
  for (int i = 0; i < c.chains; ++i) {
    write_chain_jsonl(traces[i],
                      (outdir / ("chain_" + std::to_string(i) + ".jsonl")).string());
    write_chain_summary_csv(
        traces[i],
        (outdir / ("chain_" + std::to_string(i) + "_summary.csv")).string());
  }
  return pooled_chain_summary(traces);
}

json run_watertank(const ExperimentConfig& c, const fs::path& outdir) {
  if (c.dataset.empty())
    throw std::runtime_error("watertank requires --dataset (CSV with u,y)");
  Dataset<Vec> data = load_watertank_csv(c.dataset);
  Vec x1(2);
  x1 << 6.0, 6.0;
  auto model = watertank_model(x1);
  ParameterVector that = watertank_theta_estimate();
  RandomStream rng(c.seed, 0);

  auto rollout_erms = [&](const ParameterVector& th) {
    auto yhat = watertank_simulate_output(th, data.inputs, x1);
    std::vector<Vec> y;
    for (const auto& o : data.observations) y.push_back(*o);
    return e_rms(y, yhat);
  };

  if (c.algorithm == "smc" || c.algorithm == "twisted-smc") {
    ParticleEnsemble<Vec> ens;
    if (c.algorithm == "smc") {
      ens = smc_run(model, data, that, bootstrap_proposal(model), c.N, rng);
    } else {
      EkfStructure e = watertank_ekf_structure(that, x1);
      TwistTables tab = ekf_twisting(e, data);
      auto pot = tab.potential();
      ens = smc_run(model, data, that, make_twisted_proposal(e, tab, data),
                    c.N, rng, &pot);
    }
    write_smc_trace_csv(ens, outdir / "trace.csv");
    return json{{"logz", ens.logz}, {"theta", theta_json(that)}};
  }
  if (c.algorithm == "gradsearch") {
    GradientSearchConfig gc;
    gc.max_iters = c.iters;
    auto res = gradient_search(model, data, watertank_theta_init(), c.N, gc,
                               rng);
    write_search_trace_csv(res, (outdir / "trace.csv").string());
    return json{{"theta", theta_json(res.theta)},
                {"logz", res.trace.empty() ? 0.0 : res.trace.back().logz},
                {"e_rms", rollout_erms(res.theta)},
                {"aborted", res.aborted}};
  }
  if (c.algorithm == "psaem") {
    PsaemConfig pc;
    pc.iters = c.iters;
    auto res = psaem(model, data, watertank_theta_init(), c.N,
                     watertank_psaem_ops(), pc, rng);
    write_theta_trace_csv(res.trace, (outdir / "trace.csv").string());
    return json{{"theta", theta_json(res.theta)},
                {"e_rms", rollout_erms(res.theta)}};
  }
  Prior prior = watertank_prior();
  if (c.algorithm == "pmmh") {
    const int F =
        static_cast<int>(ssid::detail::free_indices(that, prior).size());
    auto prop = RandomWalkProposal::isotropic(F, c.proposal_scale);
    prop.adapt = true;
    std::vector<ChainTrace<Vec>> traces(c.chains);
    std::vector<std::thread> workers;
    for (int i = 0; i < c.chains; ++i)
      workers.emplace_back([&, i] {
        traces[i] = pmmh(model, data, prior, prop, that, c.N, c.M,
                         RandomStream(c.seed, static_cast<std::uint64_t>(i)));
      });
    for (auto& w : workers) w.join();
    for (int i = 0; i < c.chains; ++i) {
      write_chain_jsonl(traces[i],
                        (outdir / ("chain_" + std::to_string(i) + ".jsonl")).string());
      write_chain_summary_csv(
          traces[i],
          (outdir / ("chain_" + std::to_string(i) + "_summary.csv")).string());
    }
    return pooled_chain_summary(traces);
  }
  // pg / pgas
  auto cond = watertank_param_conditional(prior);
  bool as = c.algorithm == "pgas";
  std::vector<ChainTrace<Vec>> traces(c.chains);
  std::vector<std::thread> workers;
  for (int i = 0; i < c.chains; ++i)
    workers.emplace_back([&, i] {
      traces[i] = particle_gibbs(model, data, cond, that, c.N, c.M,
                                 RandomStream(c.seed, static_cast<std::uint64_t>(i)),
                                 as);
    });
  for (auto& w : workers) w.join();
  for (int i = 0; i < c.chains; ++i) {
    write_chain_jsonl(traces[i],
                      (outdir / ("chain_" + std::to_string(i) + ".jsonl")).string());
    write_chain_summary_csv(
        traces[i],
        (outdir / ("chain_" + std::to_string(i) + "_summary.csv")).string());
  }
  json out = pooled_chain_summary(traces);
  ParameterVector th = that;
  for (std::size_t i = 0; i < th.size(); ++i)
    th.set(i, out["posterior_median"][th.names()[i]].get<double>());
  out["e_rms"] = rollout_erms(th);
  return out;
}

json run_dengue(const ExperimentConfig& c, const fs::path& outdir) {
  if (c.dataset.empty())
    throw std::runtime_error("dengue requires --dataset (CSV with date,y)");
  DengueSeries series = load_dengue_csv(c.dataset);
  Dataset<long> data = dengue_dataset(series);
  auto model = dengue_model(7370);
  Prior prior = dengue_prior();
  RandomStream rng(c.seed, 0);

  ParameterVector th0 = dengue_theta(0.5, 0.3, 0.3, 0.5, 0.2, 0.0, 0.5);
  {
    RandomStream init = rng.split(0xd00d);
    th0 = prior.sample(th0, init);
  }

  if (c.algorithm == "smc") {
    auto ens = smc_run(model, data, th0, bootstrap_proposal(model), c.N, rng);
    write_smc_trace_csv(ens, outdir / "trace.csv");
    return json{{"logz", ens.logz}, {"theta", theta_json(th0)}};
  }
  if (c.algorithm == "pmmh") {
    const int F =
        static_cast<int>(ssid::detail::free_indices(th0, prior).size());
    auto prop = RandomWalkProposal::isotropic(F, c.proposal_scale);
    prop.adapt = true;
    std::vector<ChainTrace<Vec>> traces(c.chains);
    std::vector<std::thread> workers;
    for (int i = 0; i < c.chains; ++i)
      workers.emplace_back([&, i] {
        traces[i] = pmmh(model, data, prior, prop, th0, c.N, c.M,
                         RandomStream(c.seed, static_cast<std::uint64_t>(i)));
      });
    for (auto& w : workers) w.join();
    for (int i = 0; i < c.chains; ++i) {
      write_chain_jsonl(traces[i],
                        (outdir / ("chain_" + std::to_string(i) + ".jsonl")).string());
      write_chain_summary_csv(
          traces[i],
          (outdir / ("chain_" + std::to_string(i) + "_summary.csv")).string());
    }
    return pooled_chain_summary(traces);
  }
  // pg (pgas rejected earlier by the compatibility gate)
  auto cond = dengue_param_conditional(prior);
  std::vector<ChainTrace<SeirState>> traces(c.chains);
  std::vector<std::thread> workers;
  for (int i = 0; i < c.chains; ++i)
    workers.emplace_back([&, i] {
      traces[i] = particle_gibbs(model, data, cond, th0, c.N, c.M,
                                 RandomStream(c.seed, static_cast<std::uint64_t>(i)),
                                 false);
    });
  for (auto& w : workers) w.join();
  for (int i = 0; i < c.chains; ++i) {
    write_chain_jsonl(traces[i],
                      (outdir / ("chain_" + std::to_string(i) + ".jsonl")).string());
    write_chain_summary_csv(
        traces[i],
        (outdir / ("chain_" + std::to_string(i) + "_summary.csv")).string());
  }
  return pooled_chain_summary(traces);
}

void check_compatibility(const ExperimentConfig& c) {
  if (!kModels.count(c.model))
    throw std::runtime_error("unknown model: " + c.model);
  if (!kAlgorithms.count(c.algorithm))
    throw std::runtime_error("unknown algorithm: " + c.algorithm);
  const std::string& a = c.algorithm;
  if (c.model == "dengue") {
    require(a != "pgas", "transition density unavailable");
    require(a != "twisted-smc",
            "twisting requires a Gaussian-linearizable model");
    require(a != "gradsearch" && a != "psaem" && a != "pem" && a != "mh",
            "algorithm '" + a + "' requires a tractable transition density");
  }
  if (c.model == "watertank")
    require(a != "pem" && a != "mh",
            "algorithm '" + a + "' requires a linear-Gaussian model");
  if (c.chains > 1 &&
      !(a == "mh" || a == "pmmh" || a == "pg" || a == "pgas"))
    throw std::runtime_error("--chains applies to MCMC algorithms only");
}

int cmd_run(const ExperimentConfig& c, bool force) {
  check_compatibility(c);

  const char* env_root = std::getenv("SSID_OUTPUT_ROOT");
  fs::path root = env_root ? fs::path(env_root) : fs::path(".");
  std::string name = c.output.empty()
                         ? c.model + "-" + c.algorithm + "-seed" +
                               std::to_string(c.seed)
                         : c.output;
  fs::path outdir = root / name;
  if (fs::exists(outdir / "manifest.json") && !force)
    throw std::runtime_error("output directory already holds a run: " +
                             outdir.string() + " (use --force to overwrite)");
  fs::create_directories(outdir);

  auto t0 = std::chrono::steady_clock::now();
  json summary;
  if (c.model == "lgss-demo") summary = run_lgss(c, outdir);
  else if (c.model == "watertank") summary = run_watertank(c, outdir);
  else summary = run_dengue(c, outdir);
  double secs = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - t0).count();

  // The summary stays byte-deterministic under a fixed seed; wall time goes
  // to the manifest and the console instead.
  write_json(summary, outdir / "summary.json");
  json manifest = config_to_json(c);
  manifest["output"] = name;  // resolved name for bit-identical reruns
  manifest["wall_time_seconds"] = secs;
  write_json(manifest, outdir / "manifest.json");
  std::cout << "wrote " << (outdir / "summary.json").string() << " ("
            << std::fixed << std::setprecision(1) << secs << " s)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// validate

int cmd_validate(const std::string& path, const std::string& model) {
  if (model == "watertank") {
    Dataset<Vec> data = load_watertank_csv(path);  // throws with row info
    if (data.T() == 0) throw std::runtime_error("empty dataset: " + path);
    double umin = 1e300, umax = -1e300, ymin = 1e300, ymax = -1e300,
           usum = 0, ysum = 0;
    int missing = 0;
    for (int t = 0; t < data.T(); ++t) {
      double u = data.inputs[t](0);
      if (!data.observed(t)) { ++missing; continue; }
      double y = (*data.observations[t])(0);
      umin = std::min(umin, u); umax = std::max(umax, u); usum += u;
      ymin = std::min(ymin, y); ymax = std::max(ymax, y); ysum += y;
    }
    std::printf("model: watertank\nrows: %d\nmissing observations: %d\n",
                data.T(), missing);
    std::printf("u: min %.4g max %.4g mean %.4g\n", umin, umax,
                usum / data.T());
    std::printf("y: min %.4g max %.4g mean %.4g\n", ymin, ymax,
                ysum / (data.T() - missing));
    return 0;
  }
  if (model == "dengue") {
    DengueSeries s = load_dengue_csv(path);  // throws with row info
    if (s.cases.empty()) throw std::runtime_error("empty dataset: " + path);
    long peak = 0;
    int peak_week = 0;
    for (std::size_t i = 0; i < s.cases.size(); ++i)
      if (s.cases[i] > peak) { peak = s.cases[i]; peak_week = int(i) + 1; }
    std::printf("model: dengue\nobservations: %zu\ntotal cases: %ld\n",
                s.cases.size(), s.total());
    std::printf("peak: %ld cases at week %d (%s .. %s)\n", peak, peak_week,
                s.dates.front().c_str(), s.dates.back().c_str());
    return 0;
  }
  throw std::runtime_error("validate supports models: watertank, dengue");
}

// ---------------------------------------------------------------------------
// summarize: rebuild a chain from JSONL and recompute its summary table.

ChainTrace<> read_chain_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace: " + path);
  ChainTrace<> trace;
  std::string line;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ": bad JSON at line " +
                               std::to_string(row) + ": " + e.what());
    }
    ParameterVector th;
    for (auto it = j.at("theta").begin(); it != j.at("theta").end(); ++it)
      th.add(it.key(), it.value().get<double>());
    trace.samples.push_back(th);
    trace.log_values.push_back(j.value("logz", 0.0));
    trace.accepted.push_back(j.value("accepted", 0) != 0);
  }
  if (trace.samples.empty())
    throw std::runtime_error("empty trace: " + path);
  return trace;
}

int cmd_summarize(const std::vector<std::string>& paths, double burn_frac,
                  const std::string& out_path) {
  for (const auto& path : paths) {
    ChainTrace<> trace = read_chain_jsonl(path);
    trace.burn_in = static_cast<int>(burn_frac * double(trace.size()));
    std::string dest =
        out_path.empty() ? path + ".summary.csv"
                         : (paths.size() == 1
                                ? out_path
                                : out_path + "." + fs::path(path).stem().string() + ".csv");
    write_chain_summary_csv(trace, dest);
    std::ifstream echo(dest);
    std::cout << path << " -> " << dest << "\n" << echo.rdbuf();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"State-space identification experiment runner"};
  app.require_subcommand(1);

  // run
  ExperimentConfig cfg;
  std::string config_path;
  bool force = false;
  auto* run = app.add_subcommand("run", "Run one experiment");
  run->add_option("-c,--config", config_path,
                  "JSON config file (flags override its keys)");
  auto* o_model = run->add_option("--model", cfg.model, "Model id");
  auto* o_alg = run->add_option("--algorithm", cfg.algorithm, "Algorithm id");
  auto* o_data = run->add_option("--dataset", cfg.dataset, "Dataset CSV path");
  auto* o_N = run->add_option("-N,--particles", cfg.N, "Particle count");
  auto* o_M = run->add_option("-M,--mcmc-iters", cfg.M, "MCMC iterations");
  auto* o_it = run->add_option("--iters", cfg.iters, "Optimizer/EM iterations");
  auto* o_sc = run->add_option("--proposal-scale", cfg.proposal_scale,
                               "Random-walk proposal scale");
  auto* o_seed = run->add_option("--seed", cfg.seed, "RNG seed");
  auto* o_ch = run->add_option("--chains", cfg.chains, "Independent chains");
  auto* o_out = run->add_option("--output", cfg.output, "Run directory name");
  run->add_flag("--force", force, "Overwrite an existing run directory");

  // validate
  std::string v_path, v_model;
  auto* val = app.add_subcommand("validate", "Check a dataset file");
  val->add_option("path", v_path, "Dataset CSV")->required();
  val->add_option("--model", v_model, "Model id (watertank|dengue)")
      ->required();

  // summarize
  std::vector<std::string> s_paths;
  double s_burn = 0.1;
  std::string s_out;
  auto* summ = app.add_subcommand("summarize",
                                  "Recompute summaries from chain traces");
  summ->add_option("traces", s_paths, "Chain JSONL files")->required();
  summ->add_option("--burn-in", s_burn, "Burn-in fraction (default 0.1)");
  summ->add_option("-o,--output", s_out, "Summary CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in)
          throw std::runtime_error("cannot open config: " + config_path);
        ExperimentConfig from_file;
        config_from_json(json::parse(in), from_file);
        // Flags given on the command line override config-file keys.
        if (!o_model->count()) cfg.model = from_file.model;
        if (!o_alg->count()) cfg.algorithm = from_file.algorithm;
        if (!o_data->count()) cfg.dataset = from_file.dataset;
        if (!o_N->count()) cfg.N = from_file.N;
        if (!o_M->count()) cfg.M = from_file.M;
        if (!o_it->count()) cfg.iters = from_file.iters;
        if (!o_sc->count()) cfg.proposal_scale = from_file.proposal_scale;
        if (!o_seed->count()) cfg.seed = from_file.seed;
        if (!o_ch->count()) cfg.chains = from_file.chains;
        if (!o_out->count()) cfg.output = from_file.output;
      }
      return cmd_run(cfg, force);
    }
    if (val->parsed()) return cmd_validate(v_path, v_model);
    return cmd_summarize(s_paths, s_burn, s_out);
  } catch (const IncompatibilityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DegeneracyError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
