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

#pragma once

#include <limits>
#include <optional>
#include <vector>

#include <json.hpp>

namespace kergo {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double residual_rms = 0.0;
};

/// Ordinary least squares y = intercept + slope x (at least two points).
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct RateFit {
  double lambda_hat = 0.0;
  double intercept = 0.0;  ///< ln of the fitted prefactor
  double t_lo = 0.0;
  double t_hi = 0.0;
  double residual_rms = 0.0;
  std::size_t n_points = 0;

  nlohmann::json to_json() const;
};

struct FitWindow {
  double t_lo = 0.0;
  double t_hi = std::numeric_limits<double>::infinity();
};

/// Fits value ~ C e^{-lambda t} by least squares of ln(value) on t, using
/// only points inside the window with value > noise_floor. Needs at least
/// four such points.
RateFit fit_rate(const std::vector<double>& times, const std::vector<double>& values, double noise_floor,
                 const FitWindow& window = {});

/// Per-point floors: point k is kept if values[k] > floors[k].
RateFit fit_rate(const std::vector<double>& times, const std::vector<double>& values,
                 const std::vector<double>& floors, const FitWindow& window = {});

}  // namespace kergo
