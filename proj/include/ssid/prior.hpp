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

#ifndef SSID_PRIOR_HPP
#define SSID_PRIOR_HPP

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <map>
#include <variant>
#include <vector>

#include "ssid/parameters.hpp"
#include "ssid/random.hpp"

namespace ssid {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct BetaPrior {
  double alpha, beta;
};
struct InverseGammaPrior {
  double a, b;
};
struct GaussianPrior {
  double mean, var;
};
struct UniformPrior {
  double lo, hi;
};
struct PointMassPrior {
  double value;
};

using MarginalPrior = std::variant<BetaPrior, InverseGammaPrior, GaussianPrior,
                                   UniformPrior, PointMassPrior>;

inline double marginal_logpdf(const MarginalPrior& prior, double x) {
  struct Visitor {
    double x;
    double operator()(const BetaPrior& p) const {
      if (x <= 0.0 || x >= 1.0) return kNegInf;
      return (p.alpha - 1.0) * std::log(x) + (p.beta - 1.0) * std::log1p(-x) +
             std::lgamma(p.alpha + p.beta) - std::lgamma(p.alpha) -
             std::lgamma(p.beta);
    }
    double operator()(const InverseGammaPrior& p) const {
      if (x <= 0.0) return kNegInf;
      return p.a * std::log(p.b) - std::lgamma(p.a) - (p.a + 1.0) * std::log(x) -
             p.b / x;
    }
    double operator()(const GaussianPrior& p) const {
      double r = x - p.mean;
      return -0.5 * std::log(2.0 * M_PI * p.var) - 0.5 * r * r / p.var;
    }
    double operator()(const UniformPrior& p) const {
      if (x < p.lo || x > p.hi) return kNegInf;
      return -std::log(p.hi - p.lo);
    }
    double operator()(const PointMassPrior& p) const {
      return x == p.value ? 0.0 : kNegInf;
    }
  };
  return std::visit(Visitor{x}, prior);
}

inline double marginal_sample(const MarginalPrior& prior, RandomStream& rng) {
  struct Visitor {
    RandomStream& rng;
    double operator()(const BetaPrior& p) const {
      return draw_beta(p.alpha, p.beta, rng);
    }
    double operator()(const InverseGammaPrior& p) const {
      return draw_inverse_gamma(p.a, p.b, rng);
    }
    double operator()(const GaussianPrior& p) const {
      return draw_normal(p.mean, std::sqrt(p.var), rng);
    }
    double operator()(const UniformPrior& p) const {
      return draw_uniform(p.lo, p.hi, rng);
    }
    double operator()(const PointMassPrior& p) const { return p.value; }
  };
  return std::visit(Visitor{rng}, prior);
}

inline bool is_point_mass(const MarginalPrior& prior) {
  return std::holds_alternative<PointMassPrior>(prior);
}

/// Independent per-parameter priors; the joint log-density is the sum of the
/// marginals.
class Prior {
 public:
  void add(const std::string& name, MarginalPrior marginal) {
    marginals_.emplace(name, std::move(marginal));
  }

  bool has(const std::string& name) const { return marginals_.count(name) != 0; }

  const MarginalPrior& marginal(const std::string& name) const {
    auto it = marginals_.find(name);
    if (it == marginals_.end())
      throw std::invalid_argument("no prior for parameter: " + name);
    return it->second;
  }

  double logpdf(const ParameterVector& theta) const {
    double total = 0.0;
    for (const auto& [name, marginal] : marginals_) {
      if (!theta.has(name))
        throw std::invalid_argument("missing parameter: " + name);
      total += marginal_logpdf(marginal, theta.get(name));
      if (total == kNegInf) return kNegInf;
    }
    return total;
  }

  /// Draws each parameter with a prior; others keep their current value.
  ParameterVector sample(ParameterVector theta, RandomStream& rng) const {
    for (const auto& [name, marginal] : marginals_)
      theta.set(name, marginal_sample(marginal, rng));
    return theta;
  }

 private:
  std::map<std::string, MarginalPrior> marginals_;
};

/// Beta(alpha, beta) whose mode equals 1/mean_time, the transition
/// probability implied by a geometric waiting time with the given mean.
inline BetaPrior mode_matched_beta(double mean_time) {
  if (!(mean_time > 2.0))
    throw std::domain_error("mode_matched_beta requires mean_time > 2");
  return BetaPrior{1.0 + 2.0 / mean_time, 3.0 - 2.0 / mean_time};
}

}  // namespace ssid

#endif  // SSID_PRIOR_HPP
