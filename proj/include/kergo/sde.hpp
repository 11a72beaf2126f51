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

#include <cstdint>
#include <string>
#include <vector>

#include "kergo/model.hpp"

namespace kergo {

enum class Scheme { kEulerMaruyama, kKineticSplitting };

Scheme scheme_from_string(const std::string& name);
std::string to_string(Scheme scheme);

struct IntegratorConfig {
  Scheme scheme = Scheme::kKineticSplitting;
  double dt = 1e-3;
  double horizon = 1.0;
  std::uint64_t seed = 0;
  /// Permits dt > 0.1 / max(1, K_b); a warning is recorded instead of an error.
  bool allow_large_step = false;
  /// Times at which snapshots are recorded (rounded to the step grid).
  /// Empty means {0, horizon}.
  std::vector<double> snapshot_times;

  std::size_t steps() const;
  /// Throws on invalid settings; returns warnings for overridden checks.
  std::vector<std::string> validate(double kb) const;
  /// Step indices for the snapshots, sorted and unique.
  std::vector<std::size_t> snapshot_steps() const;
};

/// Uniform snapshot grid {0, every, 2 every, ..., horizon}.
std::vector<double> snapshot_grid(double horizon, double every);

struct EnsemblePath {
  std::vector<double> times;
  std::vector<Ensemble> snapshots;
  std::vector<std::string> warnings;

  const Ensemble& final() const { return snapshots.back(); }
};

/// Simulates independent trajectories of dX = Y dt, dY = b(X, Y, mu) dt +
/// sigma dW. With `frozen_mu` the measure argument is held fixed (the
/// decoupled equation). Trajectory i draws noise from stream
/// `stream_offset + i`.
EnsemblePath simulate(const DriftSpec& drift, const DiffusionSpec& diffusion, const Ensemble& initial,
                      const IntegratorConfig& cfg, const Ensemble* frozen_mu = nullptr,
                      std::uint64_t stream_offset = 0);

/// Two copies driven by bit-identical Brownian increments.
struct CoupledPath {
  std::vector<double> times;
  std::vector<Vec> z_path;
  std::vector<Vec> zbar_path;
  std::vector<double> gap;  ///< |z_t - zbar_t|^2 per step
};

CoupledPath simulate_coupled(const DriftSpec& drift, const DiffusionSpec& diffusion, const PhasePoint& z0,
                             const PhasePoint& zbar0, const IntegratorConfig& cfg,
                             const Ensemble* mu = nullptr, const Ensemble* nu = nullptr,
                             std::uint64_t stream = 0);

/// Replica average of the coupled squared gap; replica i starts from column
/// i of `initial` / `initial_bar` and uses stream i.
struct CoupledGapStats {
  std::vector<double> times;
  std::vector<double> mean_gap;
  std::vector<double> stderr_gap;
};

CoupledGapStats simulate_coupled_ensemble(const DriftSpec& drift, const DiffusionSpec& diffusion,
                                          const Ensemble& initial, const Ensemble& initial_bar,
                                          const IntegratorConfig& cfg, const Ensemble* mu = nullptr,
                                          const Ensemble* nu = nullptr);

/// Base path plus the derivative D_t = dZ_t/dz0 of the discrete flow.
struct TangentFlow {
  std::vector<double> times;
  std::vector<Vec> path;
  std::vector<Mat> jacobians;

  const Mat& final_jacobian() const { return jacobians.back(); }
  const Vec& final_state() const { return path.back(); }
};

/// Integrates the variational equation alongside the path. The recorded
/// D_t is the exact derivative of the numerical map, which for the
/// splitting scheme is the product of the sub-step Jacobians.
TangentFlow tangent_flow(const DriftSpec& drift, const DiffusionSpec& diffusion, const PhasePoint& z0,
                         const IntegratorConfig& cfg, const Ensemble* frozen_mu = nullptr,
                         std::uint64_t stream = 0);

/// Norm cap used by the divergence guard.
inline constexpr double kDivergenceCap = 1e8;

}  // namespace kergo
