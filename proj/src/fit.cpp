// Copyright 2026 The kinetic-ergo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "kergo/fit.hpp"

#include <cmath>

#include "kergo/error.hpp"

namespace kergo {

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size(), ErrorCode::kDimensionMismatch, "fit_line needs equally long inputs");
  require(x.size() >= 2, ErrorCode::kInsufficientPoints, "fit_line needs at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  require(sxx > 0.0, ErrorCode::kInsufficientPoints, "fit_line needs at least two distinct abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    ss += r * r;
  }
  f.residual_rms = std::sqrt(ss / n);
  f.slope_stderr = x.size() > 2 ? std::sqrt(ss / (n - 2.0) / sxx) : 0.0;
  return f;
}

nlohmann::json RateFit::to_json() const {
  return {{"lambda_hat", lambda_hat}, {"intercept", intercept}, {"t_lo", t_lo},
          {"t_hi", t_hi},             {"residual_rms", residual_rms}, {"n_points", n_points}};
}

RateFit fit_rate(const std::vector<double>& times, const std::vector<double>& values,
                 const std::vector<double>& floors, const FitWindow& window) {
  require(times.size() == values.size() && floors.size() == values.size(), ErrorCode::kDimensionMismatch,
          "fit_rate needs equally long times, values and floors");
  std::vector<double> t, v;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] < window.t_lo || times[k] > window.t_hi) continue;
    if (!(values[k] > floors[k]) || !(values[k] > 0.0) || !std::isfinite(values[k])) continue;
    t.push_back(times[k]);
    v.push_back(std::log(values[k]));
  }
  if (t.size() < 4) {
    throw Error(ErrorCode::kInsufficientPoints, "fewer than four points above the noise floor in the window",
                {{"points", t.size()}, {"t_lo", window.t_lo}, {"t_hi", window.t_hi}});
  }
  const LineFit line = fit_line(t, v);
  RateFit f;
  f.lambda_hat = -line.slope;
  f.intercept = line.intercept;
  f.t_lo = t.front();
  f.t_hi = t.back();
  f.residual_rms = line.residual_rms;
  f.n_points = t.size();
  return f;
}

RateFit fit_rate(const std::vector<double>& times, const std::vector<double>& values, double noise_floor,
                 const FitWindow& window) {
  return fit_rate(times, values, std::vector<double>(values.size(), noise_floor), window);
}

}  // namespace kergo
