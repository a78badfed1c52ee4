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

#ifndef SSID_RESAMPLING_HPP
#define SSID_RESAMPLING_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "ssid/random.hpp"

namespace ssid {

/// Raised when every particle has zero weight; carries the step index when
/// thrown from inside a filter sweep.
struct DegeneracyError : std::runtime_error {
  explicit DegeneracyError(int step = -1)
      : std::runtime_error(step >= 0
                               ? "all particle weights are zero at step " +
                                     std::to_string(step + 1)
                               : "all particle weights are zero"),
        step(step) {}
  int step;
};

/// 1 / sum(w_i^2) for normalized weights. N for uniform weights, 1 for a
/// point mass.
inline double effective_sample_size(const std::vector<double>& norm_weights) {
  double s = 0.0;
  for (double w : norm_weights) s += w * w;
  return 1.0 / s;
}

/// Ancestor indices drawn i.i.d. categorical(norm_weights).
inline std::vector<int> resample_multinomial(
    const std::vector<double>& norm_weights, RandomStream& rng) {
  double total = std::accumulate(norm_weights.begin(), norm_weights.end(), 0.0);
  if (!(total > 0.0)) throw DegeneracyError();
  std::vector<int> ancestors(norm_weights.size());
  for (auto& a : ancestors) a = draw_categorical(norm_weights, rng);
  return ancestors;
}

/// Systematic resampling: one uniform offset, N evenly spaced pointers.
/// The offspring count of particle i is floor(N w_i) or ceil(N w_i).
inline std::vector<int> resample_systematic(
    const std::vector<double>& norm_weights, RandomStream& rng) {
  const int n = static_cast<int>(norm_weights.size());
  double total = std::accumulate(norm_weights.begin(), norm_weights.end(), 0.0);
  if (!(total > 0.0)) throw DegeneracyError();
  std::vector<int> ancestors(n);
  double u = draw_uniform(rng) / n;
  double cum = 0.0;
  int i = 0;
  for (int k = 0; k < n; ++k) {
    double pointer = u + static_cast<double>(k) / n;
    while (cum + norm_weights[i] / total <= pointer && i + 1 < n)
      cum += norm_weights[i++] / total;
    ancestors[k] = i;
  }
  return ancestors;
}

/// Normalizes log-weights, returning log(sum(exp(lw))). Throws
/// DegeneracyError if all weights are -inf.
inline double logsumexp_normalize(const std::vector<double>& log_weights,
                                  std::vector<double>& norm_weights) {
  double mx = *std::max_element(log_weights.begin(), log_weights.end());
  if (!std::isfinite(mx)) throw DegeneracyError();
  double sum = 0.0;
  norm_weights.resize(log_weights.size());
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    norm_weights[i] = std::exp(log_weights[i] - mx);
    sum += norm_weights[i];
  }
  for (auto& w : norm_weights) w /= sum;
  return mx + std::log(sum);
}

/// Normalizes log-weights in place, returning log(mean(exp(lw))) before
/// normalization. Throws DegeneracyError if all weights are -inf.
inline double normalize_log_weights(std::vector<double>& log_weights,
                                    std::vector<double>& norm_weights) {
  return logsumexp_normalize(log_weights, norm_weights) -
         std::log(static_cast<double>(log_weights.size()));
}

}  // namespace ssid

#endif  // SSID_RESAMPLING_HPP
