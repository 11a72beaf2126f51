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

#include <cmath>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "kergo/gaussian.hpp"

namespace kergo {

/// Random Gaussian probe laws around the invariant law: mean = S^{1/2} m xi,
/// cov = S^{1/2} exp(c (G + G^T)) S^{1/2} with xi, G standard normal.
struct ProbeDesign {
  std::size_t probes_per_set = 100;
  std::size_t sets = 4;
  double mean_scale = 1.0;
  double cov_scale = 0.2;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

std::vector<std::vector<GaussianLaw>> random_probe_sets(const GaussianLaw& invariant, const ProbeDesign& design);

struct AuditReport {
  double t_probe = 1.0;
  /// Largest covariance eigenvalue of the invariant law.
  double poincare = 0.0;
  std::size_t probes = 0;
  /// Probes with W2(nu, mu)^2 > 4 C Ent(nu | mu).
  std::size_t talagrand_violations = 0;
  /// max over probes of W2^2 / (4 C Ent); <= 1 when the inequality holds.
  double talagrand_worst_ratio = 0.0;
  /// Largest Ent(P_t nu | mu) / W2(nu, mu)^2 among each set's probes.
  std::vector<double> c1_probe_max_per_set;
  /// Best constant c1 in Ent(P_t nu | mu) <= c1 W2(nu, mu)^2 per set: the
  /// ratio maximized by local ascent from the set's best probe.
  std::vector<double> c1_per_set;
  double c1 = 0.0;
  /// max_i |c1_i / median - 1|.
  double c1_spread = 0.0;
  /// Both sides vanish for nu = mu.
  bool identity_zero = false;

  bool c1_stable(double tolerance = 0.1) const { return c1_spread <= tolerance && std::isfinite(c1); }
  nlohmann::json to_json() const;
};

/// Checks the Gaussian Talagrand inequality with C = poincare_constant(mu)
/// and measures the entropy-W2 regularization constant at t_probe, where
/// mu is the invariant law of `model` and P_t is its transition semigroup.
/// Violations are reported, never thrown.
AuditReport talagrand_harnack_audit(const LinearModel& model, double t_probe,
                                    const std::vector<std::vector<GaussianLaw>>& probe_sets);

AuditReport talagrand_harnack_audit(const LinearModel& model, double t_probe, const ProbeDesign& design);

}  // namespace kergo
