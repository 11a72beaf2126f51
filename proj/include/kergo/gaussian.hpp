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

#include "kergo/model.hpp"

namespace kergo {

/// N(mean, cov). Covariance is symmetrized and eigenvalues down to -1e-12
/// are clamped to zero at construction.
struct GaussianLaw {
  Vec mean;
  Mat cov;

  GaussianLaw(Vec mean, Mat cov);
  /// Empirical mean and (1/n) covariance of an ensemble.
  static GaussianLaw fit(const Ensemble& ensemble);

  int size() const noexcept { return static_cast<int>(mean.size()); }
  /// Draws n phase points (requires an even dimension). Draw i uses stream
  /// `stream_offset + i` of the sampling purpose.
  Ensemble sample(std::size_t n, std::uint64_t seed, std::uint64_t stream_offset = 0) const;
};

/// dZ = B Z dt + noise with diffusion matrix Q, where
/// B = [[0, I], [-A, -gamma I]] and Q = diag(0, sigma sigma^T).
class LinearModel {
 public:
  LinearModel(Mat linear_position, double friction, Mat sigma_sigma_t);
  static LinearModel from_specs(const DriftSpec& drift, const DiffusionSpec& diffusion);

  int dim() const noexcept { return dim_; }
  const Mat& drift_matrix() const noexcept { return b_; }
  const Mat& diffusion_matrix() const noexcept { return q_; }
  /// max Re(eig(B)), negative for Hurwitz B.
  double spectral_abscissa() const;
  /// e^{tB}.
  Mat propagator(double t) const;

 private:
  int dim_;
  Mat b_;
  Mat q_;
};

/// Solves B X + X B^T + Q = 0 by the Bartels-Stewart method on the complex
/// Schur form of B. Requires lambda_i + conj(lambda_j) != 0 for all pairs.
Mat solve_lyapunov(const Mat& b, const Mat& q);
double lyapunov_residual(const Mat& b, const Mat& q, const Mat& x);

struct VanLoanResult {
  Mat propagator;           ///< e^{tB}
  Mat covariance_integral;  ///< int_0^t e^{sB} Q e^{sB^T} ds
};
/// Van Loan block exponential, applied on a dyadic sub-step and doubled up
/// so that long horizons stay accurate.
VanLoanResult van_loan(const Mat& b, const Mat& q, double t);

GaussianLaw invariant_law(const LinearModel& model);
GaussianLaw transition_law(const LinearModel& model, const GaussianLaw& mu0, double t);

/// Symmetric PSD square root with eigenvalue clamping at zero.
Mat psd_sqrt(const Mat& m);

double w2_gaussian(const GaussianLaw& p, const GaussianLaw& q);
/// Ent(p | q). Throws kSingularCovariance if cov(q) is singular; returns
/// +infinity if cov(p) is singular while cov(q) is not.
double kl_gaussian(const GaussianLaw& p, const GaussianLaw& q);
/// Largest covariance eigenvalue: the exact Poincare constant of a Gaussian.
double poincare_constant(const GaussianLaw& law);

}  // namespace kergo
