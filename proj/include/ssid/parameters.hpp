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

#ifndef SSID_PARAMETERS_HPP
#define SSID_PARAMETERS_HPP

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace ssid {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct ParamBounds {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};

/// Bijection from the parameter's bounded domain to the unconstrained scale.
/// Log for (0, inf), scaled logit for a finite interval, identity otherwise.
enum class Transform { kIdentity, kLog, kLogit };

inline Transform default_transform(const ParamBounds& b) {
  bool lo_fin = std::isfinite(b.lo);
  bool hi_fin = std::isfinite(b.hi);
  if (lo_fin && hi_fin) return Transform::kLogit;
  if (lo_fin && !hi_fin && b.lo == 0.0) return Transform::kLog;
  return Transform::kIdentity;
}

/// Named real parameters with box constraints and per-parameter transforms.
/// Order of insertion defines the vectorized layout used by gradients,
/// Hessians, and proposals.
class ParameterVector {
 public:
  void add(const std::string& name, double value,
           ParamBounds bounds = ParamBounds{}) {
    add(name, value, bounds, default_transform(bounds));
  }

  void add(const std::string& name, double value, ParamBounds bounds,
           Transform transform) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
    if (value < bounds.lo || value > bounds.hi)
      throw std::invalid_argument("parameter out of bounds: " + name);
    index_[name] = names_.size();
    names_.push_back(name);
    values_.push_back(value);
    bounds_.push_back(bounds);
    transforms_.push_back(transform);
  }

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  bool has(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index_of(const std::string& name) const { return index_.at(name); }

  double get(const std::string& name) const { return values_[index_.at(name)]; }
  double get(std::size_t i) const { return values_[i]; }
  const ParamBounds& bounds(std::size_t i) const { return bounds_[i]; }
  Transform transform_kind(std::size_t i) const { return transforms_[i]; }

  void set(const std::string& name, double value) { set(index_.at(name), value); }
  void set(std::size_t i, double value) {
    if (value < bounds_[i].lo || value > bounds_[i].hi)
      throw std::invalid_argument("parameter out of bounds: " + names_[i]);
    values_[i] = value;
  }

  Vec values() const {
    return Eigen::Map<const Vec>(values_.data(), values_.size());
  }

  void set_values(const Vec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) set(static_cast<std::size_t>(i), v[i]);
  }

  /// Map to the unconstrained scale.
  Vec to_unconstrained() const {
    Vec out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = to_unconstrained(i, values_[i]);
    return out;
  }

  /// Inverse map; the result always satisfies the box constraints.
  void from_unconstrained(const Vec& eta) {
    for (std::size_t i = 0; i < size(); ++i) values_[i] = from_unconstrained(i, eta[i]);
  }

  double to_unconstrained(std::size_t i, double v) const {
    switch (transforms_[i]) {
      case Transform::kIdentity: return v;
      case Transform::kLog: return std::log(v - bounds_[i].lo);
      case Transform::kLogit: {
        double w = bounds_[i].hi - bounds_[i].lo;
        if (w == 0.0) return 0.0;  // point mass: frozen on both scales
        double z = (v - bounds_[i].lo) / w;
        return std::log(z) - std::log1p(-z);
      }
    }
    return v;
  }

  double from_unconstrained(std::size_t i, double eta) const {
    switch (transforms_[i]) {
      case Transform::kIdentity: return eta;
      case Transform::kLog: return bounds_[i].lo + std::exp(eta);
      case Transform::kLogit: {
        double w = bounds_[i].hi - bounds_[i].lo;
        if (w == 0.0) return bounds_[i].lo;
        double z = 1.0 / (1.0 + std::exp(-eta));
        return bounds_[i].lo + z * w;
      }
    }
    return eta;
  }

  /// d(value)/d(eta) at the current value, used to chain-rule gradients
  /// between the two scales.
  double dvalue_deta(std::size_t i) const {
    switch (transforms_[i]) {
      case Transform::kIdentity: return 1.0;
      case Transform::kLog: return values_[i] - bounds_[i].lo;
      case Transform::kLogit: {
        double w = bounds_[i].hi - bounds_[i].lo;
        if (w == 0.0) return 0.0;
        double z = (values_[i] - bounds_[i].lo) / w;
        return w * z * (1.0 - z);
      }
    }
    return 1.0;
  }

  /// d2(value)/d(eta)^2 at the current value.
  double d2value_deta2(std::size_t i) const {
    switch (transforms_[i]) {
      case Transform::kIdentity: return 0.0;
      case Transform::kLog: return values_[i] - bounds_[i].lo;
      case Transform::kLogit: {
        double w = bounds_[i].hi - bounds_[i].lo;
        if (w == 0.0) return 0.0;
        double z = (values_[i] - bounds_[i].lo) / w;
        return w * z * (1.0 - z) * (1.0 - 2.0 * z);
      }
    }
    return 0.0;
  }

  bool operator==(const ParameterVector& other) const {
    return names_ == other.names_ && values_ == other.values_;
  }

 private:
  std::vector<std::string> names_;
  std::vector<double> values_;
  std::vector<ParamBounds> bounds_;
  std::vector<Transform> transforms_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace ssid

#endif  // SSID_PARAMETERS_HPP
