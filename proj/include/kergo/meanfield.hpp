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
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kergo/dissipativity.hpp"
#include "kergo/fit.hpp"
#include "kergo/model.hpp"
#include "kergo/sde.hpp"
#include "kergo/transport.hpp"

namespace kergo {

/// Empirical-measure rate: N^{-1/2} (d < 2), N^{-1/2} ln(1 + N) (d = 2),
/// N^{-2/d} (d > 2).
double rd(int d, std::size_t n);

/// N-particle system: every particle's drift sees the instantaneous empirical
/// measure of all particles. Particle i draws noise from `streams[i]` when
/// given, else from stream i. Without an interaction the result is
/// bit-identical to `simulate` with the same seed.
EnsemblePath simulate_particles(const DriftSpec& drift, const DiffusionSpec& diffusion, const Ensemble& initial,
                                const IntegratorConfig& cfg, const std::vector<std::uint64_t>& streams = {});

struct FrozenConfig {
  /// Relaxation horizon; 0 selects 10 / theta from `cert` (searched if absent).
  double relax_time = 0.0;
  std::size_t particles = 10000;
  double dt = 1e-2;
  Scheme scheme = Scheme::kKineticSplitting;
  std::uint64_t seed = 0;
  std::optional<DissipativityCert> cert;

  nlohmann::json to_json() const;
};

/// Relaxation horizon used by frozen_stationary for this drift and measure.
double frozen_relaxation_time(const DriftSpec& drift, const Ensemble& mu, const FrozenConfig& cfg);

/// Approximates Phi(mu), the invariant law of the SDE with the measure frozen
/// at mu, by the terminal ensemble of `cfg.particles` decoupled copies. The
/// copies start from `start` (default: mu cycled to the requested size).
Ensemble frozen_stationary(const DriftSpec& drift, const DiffusionSpec& diffusion, const Ensemble& mu,
                           const FrozenConfig& cfg, const Ensemble* start = nullptr);

/// W2(Phi(mu), Phi(nu)) / W2(mu, nu) with common start and noise.
double measured_contraction(const DriftSpec& drift, const DiffusionSpec& diffusion, const Ensemble& mu,
                            const Ensemble& nu, const FrozenConfig& cfg);

struct FixedPointState {
  Ensemble mu;
  std::size_t iteration = 0;
  std::vector<double> gaps;  ///< W2(mu_k, mu_{k+1}), one per iteration
  bool converged = false;
  std::vector<std::string> warnings;

  double w2_gap() const { return gaps.empty() ? 0.0 : gaps.back(); }
  nlohmann::json to_json() const;
};

/// Iterates mu_{k+1} = Phi(mu_k) with a fixed start ensemble and seed, so
/// successive gaps measure the map rather than sampling noise. Stops when
/// the gap drops below `tol` or after `max_iter`. Throws kNonContraction if
/// the gap grows three iterations in a row.
FixedPointState picard_fixed_point(const DriftSpec& drift, const DiffusionSpec& diffusion, const Ensemble& mu0,
                                   double tol, std::size_t max_iter, const FrozenConfig& inner);

struct ChaosConfig {
  double dt = 1e-2;
  Scheme scheme = Scheme::kKineticSplitting;
  std::uint64_t seed = 0;
  /// Draws i.i.d. points from the reference law (fixed point or oracle);
  /// also used for the stationary start.
  ReferenceSampler reference;
  /// Phase dimension entering rd; 0 uses the ensemble dimension d.
  int rate_dimension = 0;
  /// Snapshots per run used by the stationarity check.
  std::size_t stationarity_snapshots = 20;
};

struct ChaosScanResult {
  std::vector<std::size_t> n_values;
  std::vector<double> mean_sq_w2;
  std::vector<double> stderr_sq_w2;
  std::vector<double> rd_pred;
  /// Relative change of the pooled second-moment vector between the first
  /// and second half of the stationary window.
  std::vector<double> stationarity_drift;
  double slope = 0.0;
  double slope_stderr = 0.0;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

inline constexpr double kStationarityTolerance = 0.02;

/// Relative change of second moments between window halves that counts as
/// non-stationary: the fixed tolerance, or three sampling standard errors
/// of the difference (about 2 / sqrt(n replicates)) if that is larger.
double stationarity_threshold(std::size_t n, std::size_t replicates);

/// For each N: start the particle system from a reference sample, run it for
/// t_stat, and record the squared W2 between the one-particle empirical
/// marginal and a fresh reference sample of the same size. Averages over
/// replicates and fits the log-log slope against N.
ChaosScanResult chaos_scan(const DriftSpec& drift, const DiffusionSpec& diffusion, const std::vector<std::size_t>& n_list,
                           double t_stat, std::size_t replicates, const ChaosConfig& cfg);

}  // namespace kergo
