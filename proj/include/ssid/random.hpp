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

#ifndef SSID_RANDOM_HPP
#define SSID_RANDOM_HPP

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace ssid {

/// Counter-based, splittable random stream keyed by (seed, stream id).
///
/// The same (seed, stream, call sequence) always reproduces the same draws,
/// and splitting yields streams that can be consumed independently of the
/// parent's position. Satisfies UniformRandomBitGenerator, so it can drive
/// the standard <random> distributions.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  RandomStream() : RandomStream(0, 0) {}
  RandomStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_(stream_id), key_(derive_key(seed, stream_id)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() { return mix(key_ + 0x9e3779b97f4a7c15ull * ++counter_); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }

  /// Child stream with an independent counter. Splitting does not advance
  /// this stream.
  RandomStream split(std::uint64_t id) const {
    return RandomStream(seed_, mix(key_ ^ mix(id + 0x6a09e667f3bcc909ull)));
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) {
    return mix(mix(seed) ^ mix(stream + 0x3c6ef372fe94f82bull));
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Draw helpers. Each call constructs a fresh distribution object so that a
// draw consumes a well-defined portion of the stream regardless of history.

inline double draw_uniform(RandomStream& rng) {
  return (rng() >> 11) * 0x1.0p-53;
}

inline double draw_uniform(double lo, double hi, RandomStream& rng) {
  return lo + (hi - lo) * draw_uniform(rng);
}

inline double draw_normal(RandomStream& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  return d(rng);
}

inline double draw_normal(double mean, double sd, RandomStream& rng) {
  return mean + sd * draw_normal(rng);
}

inline double draw_gamma(double shape, double scale, RandomStream& rng) {
  std::gamma_distribution<double> d(shape, scale);
  return d(rng);
}

inline double draw_beta(double alpha, double beta, RandomStream& rng) {
  double x = draw_gamma(alpha, 1.0, rng);
  double y = draw_gamma(beta, 1.0, rng);
  return x / (x + y);
}

/// InverseGamma(a, b) with density b^a/Gamma(a) x^{-a-1} exp(-b/x).
inline double draw_inverse_gamma(double a, double b, RandomStream& rng) {
  return b / draw_gamma(a, 1.0, rng);
}

inline long draw_binomial(long n, double p, RandomStream& rng) {
  if (n <= 0 || p <= 0.0) return 0;
  if (p >= 1.0) return n;
  std::binomial_distribution<long> d(n, p);
  return d(rng);
}

inline long draw_poisson(double rate, RandomStream& rng) {
  std::poisson_distribution<long> d(rate);
  return d(rng);
}

/// First index i with cumsum(w)_i > u. Ties resolved by the strict
/// comparison, so the result is deterministic given the stream.
inline int draw_categorical(const std::vector<double>& probs,
                            RandomStream& rng) {
  double u = draw_uniform(rng);
  double c = 0.0;
  for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
    c += probs[i];
    if (c > u) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace ssid

#endif  // SSID_RANDOM_HPP
