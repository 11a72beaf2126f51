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

// Hypocoercive L2 decay apparatus: constants, the time-dependent weight G_t,
// the dissipation matrix R_t, and the modified functional N_t.
//
// Naming note: `delta1` here is the smallest eigenvalue of sigma sigma^T.
// DiffusionSpec::delta_upper() is the unrelated upper ellipticity bound.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kergo/model.hpp"
#include "kergo/sde.hpp"

namespace kergo {

struct HypoConstants {
  double kb;
  double delta1;  ///< minimum eigenvalue of sigma sigma^T
  double m;       ///< 2 (2 K_b + 1)^2 + (2 K_b + 1)
  double eps;     ///< delta1 / (m + 1/2)
  double c_pi;

  /// eps m - delta1, which equals -delta1 / (2 m + 1).
  double velocity_coefficient() const { return eps * m - delta1; }
  /// eps / (2 C_PI + 4 eps).
  double decay_coefficient() const { return eps / (2.0 * c_pi + 4.0 * eps); }
  nlohmann::json to_json() const;
};

HypoConstants build_constants(double kb, double delta1, double c_pi);

struct HypoWeight {
  double t;
  double alpha;        ///< 1 - e^{-t/3}
  double alpha_rate;   ///< d alpha / dt = e^{-t/3} / 3
  Mat g;               ///< eps [[a^3 I, -a^2 I], [-a^2 I, a I]]
  Mat g_rate;          ///< d G / dt

  /// <G z, z>.
  double form(const Vec& z) const { return z.dot(g * z); }
};

HypoWeight build_weight(const HypoConstants& consts, int dim, double t);

/// int_0^t alpha(s)^2 ds in closed form.
double alpha_sq_integral(double t);
/// exp(-eps / (2 C_PI + 4 eps) int_0^t alpha^2) n0.
double functional_decay_bound(const HypoConstants& consts, double t, double n0);

/// R_t(z) = -diag(0, sigma sigma^T) + dG/dt + 2 G_t J(z) with
/// J = [[0, (d_x b)^T], [I, (d_y b)^T]].
Mat dissipation_matrix(const HypoWeight& w, const Mat& sigma_sigma_t, const Mat& jac_x, const Mat& jac_y);

struct RtOptions {
  std::size_t states = 16;  ///< sampled base states per grid time
  double state_scale = 2.0;  ///< states ~ N(0, state_scale^2 I)
  std::uint64_t seed = 0;
  const Ensemble* mu = nullptr;  ///< measure argument for interacting drifts
};

struct RtTimeReport {
  double t;
  double alpha;
  /// max over sampled unit z of <R z, z> - bound(z).
  double sampled_margin;
  /// max over states of the top eigenvalue of sym(R - diag(-eps a^2/2, eps M - delta1)).
  double eigen_margin;
};

struct RtReport {
  bool holds = true;
  double worst_margin = 0.0;
  double max_jac_x_norm = 0.0;
  double max_jac_y_norm = 0.0;
  std::size_t directions = 0;
  std::vector<RtTimeReport> times;

  nlohmann::json to_json() const;
};

inline constexpr double kRtMarginTolerance = 1e-12;

/// Checks <R_t z, z> <= -(eps a^2 / 2)|x|^2 + (eps M - delta1)|y|^2 on
/// `z_trials` random unit directions per grid time and, exactly, through the
/// eigenvalue bound. Throws kKbUnderdeclared if a sampled Jacobian block has
/// operator norm above consts.kb.
RtReport check_rt_negativity(const DriftSpec& spec, const HypoConstants& consts, const DiffusionSpec& diff,
                             const std::vector<double>& t_grid, std::size_t z_trials, const RtOptions& opts = {});

/// Smooth test function with analytic gradient on R^{2d}.
struct TestFunction {
  std::string name;
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;

  /// <v, z>.
  static TestFunction linear(Vec v);
  /// z^T H z / 2 + <v, z>, H symmetrized.
  static TestFunction quadratic(Mat h, Vec v);
  /// tanh(<v, z>), the bounded smooth family.
  static TestFunction bounded(Vec v);
};

enum class GradientMethod { kTangentFlow, kFiniteDifference };

struct FunctionalMcConfig {
  std::size_t outer = 1024;
  std::size_t inner = 256;  ///< split into two independent halves
  double dt = 1e-2;
  Scheme scheme = Scheme::kKineticSplitting;
  std::uint64_t seed = 0;
  GradientMethod gradient = GradientMethod::kTangentFlow;
  double fd_step = 1e-5;
};

struct HypoFunctional {
  double t = 0.0;
  double alpha = 0.0;
  double stationary_mean = 0.0;  ///< mu(f) over the full stationary ensemble
  double l2 = 0.0;               ///< ||f_t||^2
  double l2_se = 0.0;
  double weighted = 0.0;         ///< mu(<G_t grad f_t, grad f_t>)
  double weighted_se = 0.0;
  double value = 0.0;            ///< N_t = l2 + weighted
  double value_se = 0.0;
  double grad_sq = 0.0;          ///< mu(|grad f_t|^2)
  double grad_sq_se = 0.0;
  std::size_t outer = 0;
  std::size_t inner = 0;

  nlohmann::json to_json() const;
};

/// Inner Monte Carlo at one start point: E f(Z_t^z) with its standard
/// error, and the pathwise gradient E[D_t^T grad f(Z_t^z)].
struct SemigroupPoint {
  double value = 0.0;
  double value_se = 0.0;
  Vec gradient;
};

SemigroupPoint semigroup_at(const DriftSpec& spec, const DiffusionSpec& diff, const PhasePoint& z,
                            const TestFunction& f, double t, const FunctionalMcConfig& mc,
                            const Ensemble* frozen_mu = nullptr);

/// N_t on a time grid. Outer points are a stride subsample of `stationary`.
/// Squares of inner means use the product of two independent half-sample
/// means, so every component is unbiased (and may dip below zero).
std::vector<HypoFunctional> eval_functional_curve(const DriftSpec& spec, const DiffusionSpec& diff,
                                                  const Ensemble& stationary, const HypoConstants& consts,
                                                  const TestFunction& f, const std::vector<double>& t_grid,
                                                  const FunctionalMcConfig& mc);

HypoFunctional eval_functional(const DriftSpec& spec, const DiffusionSpec& diff, const Ensemble& stationary,
                               const HypoConstants& consts, const TestFunction& f, double t,
                               const FunctionalMcConfig& mc);

}  // namespace kergo
