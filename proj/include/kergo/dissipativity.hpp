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
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "kergo/model.hpp"

namespace kergo {

enum class CertStatus { kUnchecked, kCertifiedBySampling, kFalsified, kAnalytic };
std::string to_string(CertStatus status);

/// A violating pair, stored as stacked phase vectors.
struct Witness {
  Vec z;
  Vec zbar;
  double lhs = 0.0;
  double threshold = 0.0;  ///< -theta |z - zbar|^2
  std::size_t trial = 0;
  std::string probe;  ///< probe measure in force, if any
};

/// Parameters (theta, r, r0, R) of the partial dissipativity inequality
///   <r^2 u + r r0 v, v> + <v + r r0 u, b(z) - b(zbar)> <= -theta |z - zbar|^2
/// for |z - zbar| >= R, with u = x - xbar, v = y - ybar.
struct DissipativityCert {
  double theta;
  double r;
  double r0;
  double radius;
  CertStatus status = CertStatus::kUnchecked;
  std::optional<Witness> witness;

  DissipativityCert(double theta, double r, double r0, double radius);
  DissipativityCert with_theta(double theta) const;
  /// theta / (1 + |r r0|): the largest K_I keeping the particle-system rate positive.
  double interaction_budget() const;
  nlohmann::json to_json() const;
};

/// Left-hand side of the inequality at a pair of stacked points.
double patdi_lhs(const DriftSpec& drift, double r, double r0, const ConstVecRef& z, const ConstVecRef& zbar,
                 const MeasureSummary* mu);

struct PatdiVerdict {
  bool holds = true;
  std::size_t trials = 0;
  /// max over the sample of (LHS + theta |dz|^2) / |dz|^2; <= 0 iff holds.
  double worst_margin = -std::numeric_limits<double>::infinity();
  /// min over the sample of -LHS / |dz|^2 (largest theta the sample supports).
  double sample_rate = std::numeric_limits<double>::infinity();
  std::optional<Witness> witness;
  /// Rate actually tested (theta, or theta_eff for the particle system).
  double tested_theta = 0.0;
  std::vector<std::string> probes;

  nlohmann::json to_json() const;
};

struct PatdiOptions {
  std::size_t trials = 10000;
  /// Outer radius of the sampled |z - zbar|; 0 selects 100 R.
  double rmax = 0.0;
  std::uint64_t seed = 0;
};

/// Samples pairs with |z - zbar| in [R, rmax] and reports the first violation.
/// With an interaction and no `mu`, a fixed set of probe measures is used.
PatdiVerdict check_patdi(const DriftSpec& drift, const DissipativityCert& cert, const Ensemble* mu,
                         const PatdiOptions& options);

/// Aggregated check for the N-particle drift, at rate theta - K_I (1 + |r r0|),
/// on stacked pairs with |Z - Zbar| >= sqrt(N) R.
PatdiVerdict check_patdi_system(const DriftSpec& drift, const DissipativityCert& cert, std::size_t particles,
                                const PatdiOptions& options);

/// Exact optimal theta for a linear drift: -lambda_max of the symmetrized
/// quadratic form (independent of R).
double linear_patdi_rate(const DriftSpec& drift, double r, double r0);

struct SearchGrid {
  std::vector<double> r;
  std::vector<double> r0;
  std::vector<double> radius;
  PatdiOptions options;

  static SearchGrid standard();
  nlohmann::json to_json() const;
};

struct SearchResult {
  std::optional<DissipativityCert> cert;
  std::size_t evaluated = 0;
  std::size_t falsified = 0;
};

/// Largest-theta cert over the grid. For each (r, r0, R) the sampled rate is
/// shrunk by `kSearchSafety` before it is re-checked.
SearchResult search_cert(const DriftSpec& drift, const SearchGrid& grid, const Ensemble* mu = nullptr);
inline constexpr double kSearchSafety = 0.9;

struct Eta1Threshold {
  double value;
  double minimizer_t;
  double log_min;  ///< log of the minimum of g
  double c_tilde;
  double lambda;
  double kb;

  nlohmann::json to_json() const;
};

/// log g(t) for g(t) = e^{(1+K_b)t} sqrt(t) / (1 - c e^{-lambda t}).
double eta1_log_objective(double t, double c_tilde, double lambda, double kb);

/// eta1 = 1 / inf_{t > log(c)/lambda} g(t): log-spaced grid then golden-section.
Eta1Threshold compute_eta1(double c_tilde, double lambda, double kb, std::size_t grid_points = 4000);

/// min(eta1, interaction budget): computable surrogate for the smallness constant.
double kstar_surrogate(const Eta1Threshold& eta1, const DissipativityCert& cert);

}  // namespace kergo
