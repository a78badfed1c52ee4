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

#ifndef SSID_MODELS_HMM_HPP
#define SSID_MODELS_HMM_HPP

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ssid/model.hpp"

namespace ssid {

/// Finite HMM with K hidden states and discrete observations. Small enough
/// that the posterior over state paths can be enumerated exactly, which makes
/// it the reference oracle for the particle algorithms.
struct Hmm {
  Mat pi;        // K x 1 initial distribution
  Mat trans;     // K x K, trans(i, j) = P(x_t = j | x_{t-1} = i)
  Mat emit;      // K x L, emit(i, y) = P(y | x = i)

  int K() const { return static_cast<int>(trans.rows()); }
};

inline StateSpaceModel<int, int> make_hmm(const Hmm& h) {
  StateSpaceModel<int, int> m;
  m.state_dim = 1;
  auto row_probs = [](const Mat& M, int row) {
    std::vector<double> p(M.cols());
    for (int j = 0; j < M.cols(); ++j) p[j] = M(row, j);
    return p;
  };
  m.initial_sampler = [h](const ParameterVector&, RandomStream& rng) {
    std::vector<double> p(h.pi.rows());
    for (int j = 0; j < h.pi.rows(); ++j) p[j] = h.pi(j, 0);
    return draw_categorical(p, rng);
  };
  m.initial_logpdf = [h](const int& x, const ParameterVector&) {
    return std::log(h.pi(x, 0));
  };
  m.transition_sampler = [h, row_probs](const int& xp, const Vec&, int,
                                        const ParameterVector&, RandomStream& rng) {
    return draw_categorical(row_probs(h.trans, xp), rng);
  };
  m.transition_logpdf = [h](const int& x, const int& xp, const Vec&, int,
                            const ParameterVector&) {
    return std::log(h.trans(xp, x));
  };
  m.observation_logpdf = [h](const int& y, const int& x, const Vec&, int,
                             const ParameterVector&) {
    return std::log(h.emit(x, y));
  };
  m.observation_sampler = [h, row_probs](const int& x, const Vec&, int,
                                         const ParameterVector&, RandomStream& rng) {
    return draw_categorical(row_probs(h.emit, x), rng);
  };
  return m;
}

/// Exact log p(y_{1:T}) by the forward recursion. Missing observations skip
/// the emission factor.
inline double hmm_loglik(const Hmm& h, const Dataset<int>& data) {
  Vec alpha = h.pi.col(0);
  double ll = 0.0;
  for (int t = 0; t < data.T(); ++t) {
    if (t > 0) alpha = h.trans.transpose() * alpha;
    if (data.observed(t))
      for (int i = 0; i < h.K(); ++i) alpha[i] *= h.emit(i, *data.observations[t]);
    double s = alpha.sum();
    if (s <= 0.0) throw std::runtime_error("impossible observation sequence");
    ll += std::log(s);
    alpha /= s;
  }
  return ll;
}

/// Enumerates p(x_{1:T} | y_{1:T}) over all K^T paths. path_index encodes a
/// path base-K with x_1 as the least significant digit.
inline std::vector<double> hmm_exact_posterior(const Hmm& h,
                                               const Dataset<int>& data) {
  const int K = h.K();
  const int T = data.T();
  std::size_t n = 1;
  for (int t = 0; t < T; ++t) {
    n *= K;
    if (n > (1u << 20)) throw std::invalid_argument("path space too large");
  }
  std::vector<double> post(n, 0.0);
  double total = 0.0;
  std::vector<int> path(T);
  for (std::size_t idx = 0; idx < n; ++idx) {
    std::size_t rem = idx;
    for (int t = 0; t < T; ++t) { path[t] = static_cast<int>(rem % K); rem /= K; }
    double p = h.pi(path[0], 0);
    for (int t = 1; t < T; ++t) p *= h.trans(path[t - 1], path[t]);
    for (int t = 0; t < T; ++t)
      if (data.observed(t)) p *= h.emit(path[t], *data.observations[t]);
    post[idx] = p;
    total += p;
  }
  for (auto& p : post) p /= total;
  return post;
}

inline std::size_t hmm_path_index(const std::vector<int>& path, int K) {
  std::size_t idx = 0;
  for (int t = static_cast<int>(path.size()) - 1; t >= 0; --t)
    idx = idx * K + path[t];
  return idx;
}

}  // namespace ssid

#endif  // SSID_MODELS_HMM_HPP
