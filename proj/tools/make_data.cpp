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

// Deterministic generator for the benchmark datasets committed under data/.
// Running it again reproduces the files byte for byte.
//
//   - watertank_train.csv / watertank_valid.csv: 1024-sample multisine
//     cascaded-tank series simulated at the reference parameter estimate,
//     with occasional upper-tank overflow so that the overflow coefficient
//     is identifiable.
//   - dengue_yap.csv: 197 weekly case counts (978 in total) for a population
//     of 7370, simulated from the coupled SEIR model at outbreak-like
//     parameters.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "ssid/models/dengue.hpp"
#include "ssid/models/watertank.hpp"

using namespace ssid;

namespace {

double multisine(int t, int variant) {
  static const double freq[5] = {0.0013, 0.0031, 0.0073, 0.0171, 0.0397};
  static const double amp[5] = {0.9, 0.7, 0.5, 0.35, 0.25};
  double u = 3.2;
  for (int j = 0; j < 5; ++j)
    u += amp[j] * std::sin(2.0 * M_PI * freq[j] * t + 0.7 * j + 1.3 * variant);
  return u;
}

void write_tank_series(const std::string& path, int variant) {
  const int T = 1024;
  ParameterVector th = watertank_theta_estimate();
  RandomStream rng(500 + static_cast<std::uint64_t>(variant), 99);
  Vec x(2);
  x << 6.0, 6.0;
  double sv = std::sqrt(th.get("sigv2"));
  double se = std::sqrt(th.get("sige2"));
  std::ofstream out(path);
  out << "u,y\n";
  char buf[64];
  for (int t = 0; t < T; ++t) {
    RandomStream rt = rng.split(t);
    Vec u(1);
    u << multisine(t, variant);
    if (t > 0) {
      Vec mu = watertank_mean(x, u, th);
      x[0] = mu[0] + sv * draw_normal(rt);
      x[1] = mu[1] + sv * draw_normal(rt);
    }
    double y = tank_cap(x[1]) + se * draw_normal(rt);
    std::snprintf(buf, sizeof buf, "%.12g,%.12g\n", u[0], y);
    out << buf;
  }
  std::printf("wrote %s (%d rows)\n", path.c_str(), T);
}

void write_dengue_series(const std::string& path) {
  const int weeks = 197;
  const long population = 7370;
  auto model = dengue_model(population);
  ParameterVector th = dengue_theta(0.35, 1.0 / 4.4, 1.0 / 4.5, 0.25,
                                    1.0 / 6.5, 0.0, 0.43);
  RandomStream rng(288, 777);
  RandomStream r0 = rng.split(0);
  SeirState x = model.initial_sampler(th, r0);
  std::ofstream out(path);
  out << "date,y\n";
  using namespace std::chrono;
  sys_days day = sys_days(year{2011} / January / 3);
  long total = 0;
  for (int t = 1; t < weeks * kDengueStepsPerWeek; ++t) {
    RandomStream rt = rng.split(t);
    x = model.transition_sampler(x, Vec(), t, th, rt);
    if ((t + 1) % kDengueStepsPerWeek == 0) {
      long y = draw_binomial(x.z, th.get("rho"), rt);
      total += y;
      year_month_day ymd(day);
      char buf[64];
      std::snprintf(buf, sizeof buf, "%04d-%02u-%02u,%ld\n",
                    static_cast<int>(ymd.year()),
                    static_cast<unsigned>(ymd.month()),
                    static_cast<unsigned>(ymd.day()), y);
      out << buf;
      day += days{7};
    }
  }
  std::printf("wrote %s (%d rows, %ld cases)\n", path.c_str(), weeks, total);
}

}  // namespace

int main(int argc, char** argv) {
  std::string dir = argc > 1 ? argv[1] : "data";
  write_tank_series(dir + "/watertank_train.csv", 0);
  write_tank_series(dir + "/watertank_valid.csv", 1);
  write_dengue_series(dir + "/dengue_yap.csv");
  return 0;
}
