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

#ifndef SSID_DATASET_HPP
#define SSID_DATASET_HPP

#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssid/parameters.hpp"

namespace ssid {

/// Time-indexed inputs and possibly-missing observations. Steps with an
/// absent observation contribute no observe factor to any likelihood and
/// never trigger resampling.
template <class Obs = Vec>
struct Dataset {
  std::vector<Vec> inputs;                // may be empty vectors
  std::vector<std::optional<Obs>> observations;

  int T() const { return static_cast<int>(observations.size()); }

  bool observed(int t) const { return observations[t].has_value(); }

  int num_observed() const {
    int n = 0;
    for (const auto& y : observations) n += y.has_value();
    return n;
  }

  void check() const {
    if (inputs.size() != observations.size())
      throw std::invalid_argument("inputs and observations differ in length");
    if (num_observed() == 0)
      throw std::invalid_argument("dataset has no observations");
  }

  Dataset slice(int from, int to) const {
    Dataset out;
    out.inputs.assign(inputs.begin() + from, inputs.begin() + to);
    out.observations.assign(observations.begin() + from,
                            observations.begin() + to);
    return out;
  }
};

inline Vec scalar_vec(double v) {
  Vec x(1);
  x[0] = v;
  return x;
}

/// Loads the `t,u,y` CSV format. An empty y field marks a missing
/// observation.
inline Dataset<Vec> load_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  Dataset<Vec> data;
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,u,y", 0) != 0)
    throw std::runtime_error("expected header 't,u,y' in " + path);
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string t_field, u_field, y_field;
    if (!std::getline(ss, t_field, ',') || !std::getline(ss, u_field, ','))
      throw std::runtime_error("malformed row " + std::to_string(row) + " in " + path);
    std::getline(ss, y_field, ',');
    try {
      data.inputs.push_back(u_field.empty() ? Vec(0) : scalar_vec(std::stod(u_field)));
      data.observations.push_back(
          y_field.empty() ? std::optional<Vec>{}
                          : std::optional<Vec>{scalar_vec(std::stod(y_field))});
    } catch (const std::exception&) {
      throw std::runtime_error("malformed value at row " + std::to_string(row) +
                               " in " + path);
    }
  }
  data.check();
  return data;
}

inline void save_dataset_csv(const Dataset<Vec>& data, const std::string& path) {
  std::ofstream out(path);
  out << "t,u,y\n";
  char buf[64];
  for (int t = 0; t < data.T(); ++t) {
    out << (t + 1) << ',';
    if (data.inputs[t].size() > 0) {
      std::snprintf(buf, sizeof buf, "%.12g", data.inputs[t][0]);
      out << buf;
    }
    out << ',';
    if (data.observations[t]) {
      std::snprintf(buf, sizeof buf, "%.12g", (*data.observations[t])[0]);
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace ssid

#endif  // SSID_DATASET_HPP
