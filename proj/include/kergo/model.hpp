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
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace kergo {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using VecRef = Eigen::Ref<Vec>;
using ConstVecRef = Eigen::Ref<const Vec>;
using MatRef = Eigen::Ref<Mat>;

/// A point z = (x, y) of phase space R^{2d}.
struct PhasePoint {
  Vec x;
  Vec y;

  PhasePoint(Vec position, Vec velocity);
  static PhasePoint from_stacked(const Vec& z);

  int dim() const noexcept { return static_cast<int>(x.size()); }
  Vec stacked() const;
};

/// Uniformly weighted empirical measure on R^{2d}. Points are stored as the
/// columns of a 2d x n matrix, positions first.
class Ensemble {
 public:
  Ensemble(int dim, Mat points);
  static Ensemble from_points(const std::vector<PhasePoint>& points);
  static Ensemble point_mass(const PhasePoint& z);

  int dim() const noexcept { return dim_; }
  int phase_dim() const noexcept { return 2 * dim_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(points_.cols()); }
  double weight() const noexcept { return 1.0 / static_cast<double>(size()); }

  const Mat& points() const noexcept { return points_; }
  /// In-place access for integrators; the column count must not change.
  Mat& mutable_points() noexcept { return points_; }
  auto point(std::size_t i) const { return points_.col(static_cast<Eigen::Index>(i)); }
  auto position(std::size_t i) const { return point(i).head(dim_); }
  auto velocity(std::size_t i) const { return point(i).tail(dim_); }
  PhasePoint phase_point(std::size_t i) const;

  Vec mean() const;
  /// Maximum-likelihood (1/n) covariance.
  Mat covariance() const;
  double second_moment() const;

  /// Every k-th point so that at most `max_points` remain; deterministic.
  Ensemble stride_subsample(std::size_t max_points) const;
  /// Points cycled to exactly `n` entries (i mod size()).
  Ensemble resized(std::size_t n) const;

 private:
  int dim_;
  Mat points_;
};

/// Cached view of a measure argument. The mean is precomputed so separable
/// kernels cost O(1) per evaluation.
struct MeasureSummary {
  const Ensemble* ensemble = nullptr;
  Vec mean;

  static MeasureSummary of(const Ensemble& mu);
};

/// Bounded-gradient perturbation F: R^{2d} -> R^d.
class Perturbation {
 public:
  virtual ~Perturbation() = default;
  virtual std::string name() const = 0;
  virtual std::vector<double> params() const = 0;
  /// Declared global Lipschitz bound kappa_F.
  virtual double lipschitz() const = 0;
  virtual bool is_zero() const { return false; }
  /// out += F(z).
  virtual void add_value(const ConstVecRef& z, VecRef out) const = 0;
  /// jx += dF/dx, jy += dF/dy (rows index components of F).
  virtual void add_jacobian(const ConstVecRef& z, MatRef jx, MatRef jy) const = 0;
};

/// Interaction kernel F2(z, zbar), integrated against empirical measures.
class InteractionKernel {
 public:
  virtual ~InteractionKernel() = default;
  virtual std::string name() const = 0;
  virtual std::vector<double> params() const = 0;
  /// Declared Lipschitz bound K_I in the second argument.
  virtual double lipschitz_second() const = 0;
  /// Declared Lipschitz bound in the first argument (enters K_b).
  virtual double lipschitz_first() const = 0;
  /// F2(z, zbar) for a single pair.
  virtual Vec value(const ConstVecRef& z, const ConstVecRef& zbar) const = 0;
  /// out += (1/n) sum_i F2(z, z_i).
  virtual void add_average(const ConstVecRef& z, const MeasureSummary& mu, VecRef out) const;
  /// Jacobian of the averaged kernel in its first argument, accumulated.
  virtual void add_jacobian_first(const ConstVecRef& z, const MeasureSummary& mu, MatRef jx,
                                  MatRef jy) const = 0;
};

std::shared_ptr<const Perturbation> make_perturbation(const std::string& name,
                                                      const std::vector<double>& params, int dim);
std::shared_ptr<const InteractionKernel> make_interaction(const std::string& name,
                                                          const std::vector<double>& params,
                                                          int dim);
std::vector<std::string> perturbation_names();
std::vector<std::string> interaction_names();

struct DriftJacobian {
  Mat dx;  ///< d b / d x
  Mat dy;  ///< d b / d y
};

class SystemDrift;

/// b(z, mu) = -A x - gamma y + F(z) + (1/n) sum_i F2(z, z_i).
class DriftSpec {
 public:
  DriftSpec(Mat linear_position, double friction,
            std::shared_ptr<const Perturbation> perturbation = nullptr,
            std::shared_ptr<const InteractionKernel> interaction = nullptr,
            std::optional<double> declared_kb = std::nullopt);

  int dim() const noexcept { return static_cast<int>(a_.rows()); }
  const Mat& linear_position() const noexcept { return a_; }
  double friction() const noexcept { return gamma_; }
  const Perturbation& perturbation() const noexcept { return *perturbation_; }
  const InteractionKernel* interaction() const noexcept { return interaction_.get(); }
  bool has_interaction() const noexcept { return interaction_ != nullptr; }
  bool is_linear() const noexcept { return perturbation_->is_zero() && !interaction_; }

  /// Declared Lipschitz constant of z -> b(z, mu).
  double kb() const noexcept { return kb_; }
  double ki() const noexcept { return interaction_ ? interaction_->lipschitz_second() : 0.0; }
  double kappa_f() const noexcept { return perturbation_->lipschitz(); }
  /// Bound implied by the components: ||[A, gamma I]|| + kappa_F + (interaction first-argument bound).
  double component_lipschitz_bound() const;

  /// Hot path: out = b(z, mu). `mu` may be null only when no interaction.
  void eval_into(const ConstVecRef& z, const MeasureSummary* mu, VecRef out) const;
  void jacobian_into(const ConstVecRef& z, const MeasureSummary* mu, MatRef dx, MatRef dy) const;

  Vec eval(const PhasePoint& z, const Ensemble* mu) const;
  DriftJacobian jacobian(const PhasePoint& z, const Ensemble* mu) const;

  /// Largest |b(z)-b(zbar)|/|z-zbar| over `pairs` random pairs.
  double lipschitz_probe(std::size_t pairs, std::uint64_t seed, const Ensemble* mu = nullptr,
                         double radius = 10.0) const;

  SystemDrift lift(std::size_t particles) const;

  /// b = 0 (A = 0, gamma = 0).
  static DriftSpec free_flight(int dim);

  nlohmann::json to_json() const;
  static DriftSpec from_json(const nlohmann::json& j);

  /// Same drift with the interaction removed (or replaced).
  DriftSpec with_interaction(std::shared_ptr<const InteractionKernel> kernel,
                             std::optional<double> declared_kb = std::nullopt) const;

 private:
  void check_measure(const MeasureSummary* mu) const;

  Mat a_;
  double gamma_;
  std::shared_ptr<const Perturbation> perturbation_;
  std::shared_ptr<const InteractionKernel> interaction_;
  double kb_;
};

/// Drift b^N of the N-particle system on (R^{2d})^N, particle-major stacking
/// (x^1, y^1, x^2, y^2, ...). Output stacks the N velocity drifts.
class SystemDrift {
 public:
  SystemDrift(DriftSpec spec, std::size_t particles);

  std::size_t particles() const noexcept { return n_; }
  const DriftSpec& spec() const noexcept { return spec_; }
  Vec eval(const Vec& stacked) const;
  /// sqrt(2 K_b^2 + 2 K_I^2).
  double lipschitz_bound() const;

  static Ensemble unstack(const Vec& stacked, int dim);
  static Vec stack(const Ensemble& ensemble);

 private:
  DriftSpec spec_;
  std::size_t n_;
};

/// Constant d x n diffusion coefficient with ellipticity bounds
/// delta2 <= sigma sigma^T <= delta1. Optionally measure-dependent.
class DiffusionSpec {
 public:
  using SigmaOfMeasure = std::function<Mat(const MeasureSummary&)>;

  explicit DiffusionSpec(Mat sigma);
  DiffusionSpec(Mat sigma, double delta1, double delta2);
  /// Measure-dependent sigma(mu); bounds must hold for every mu supplied.
  DiffusionSpec(SigmaOfMeasure sigma_of, Mat reference_sigma, double delta1, double delta2);

  static DiffusionSpec scalar(int dim, double s);
  /// sigma = 0. Outside the elliptic class; used for deterministic flows.
  static DiffusionSpec noiseless(int dim);

  int dim() const noexcept { return static_cast<int>(sigma_.rows()); }
  int noise_dim() const noexcept { return static_cast<int>(sigma_.cols()); }
  bool measure_dependent() const noexcept { return static_cast<bool>(sigma_of_); }
  /// sigma at a given measure (the constant sigma when independent).
  Mat sigma(const MeasureSummary* mu = nullptr) const;
  Mat sigma_sigma_t(const MeasureSummary* mu = nullptr) const;
  /// Upper ellipticity bound (delta1 in the two-sided bound).
  double delta_upper() const noexcept { return delta1_; }
  /// Lower ellipticity bound (delta2 in the two-sided bound).
  double delta_lower() const noexcept { return delta2_; }
  /// Minimum eigenvalue of sigma sigma^T (the hypocoercivity "delta1").
  double min_eigenvalue() const;

  nlohmann::json to_json() const;
  static DiffusionSpec from_json(const nlohmann::json& j, int dim);

 private:
  void check_bounds(const Mat& sigma) const;

  Mat sigma_;
  SigmaOfMeasure sigma_of_;
  double delta1_;
  double delta2_;
};

}  // namespace kergo
