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

#include "kergo/gaussian.hpp"

#include <cmath>
#include <complex>
#include <limits>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "kergo/error.hpp"
#include "kergo/rng.hpp"

namespace kergo {

GaussianLaw::GaussianLaw(Vec m, Mat c) : mean(std::move(m)), cov(std::move(c)) {
  require(cov.rows() == mean.size() && cov.cols() == mean.size(), ErrorCode::kDimensionMismatch,
          "covariance shape must match mean");
  require(mean.allFinite() && cov.allFinite(), ErrorCode::kNonFinite, "Gaussian law has non-finite entries");
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  require((cov - cov.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale, ErrorCode::kInvalidArgument,
          "covariance must be symmetric");
  cov = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
  if (eig.eigenvalues().minCoeff() < -1e-12 * scale)
    throw Error(ErrorCode::kInvalidArgument, "covariance must be positive semidefinite",
                {{"min_eigenvalue", eig.eigenvalues().minCoeff()}});
  if (eig.eigenvalues().minCoeff() < 0.0) {
    const Vec clamped = eig.eigenvalues().cwiseMax(0.0);
    cov = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
    cov = 0.5 * (cov + cov.transpose());
  }
}

GaussianLaw GaussianLaw::fit(const Ensemble& ensemble) { return {ensemble.mean(), ensemble.covariance()}; }

Ensemble GaussianLaw::sample(std::size_t n, std::uint64_t seed, std::uint64_t stream_offset) const {
  require(size() % 2 == 0, ErrorCode::kDimensionMismatch, "phase-space sampling needs an even dimension");
  require(n >= 1, ErrorCode::kInvalidArgument, "sample size must be >= 1");
  const Mat root = psd_sqrt(cov);
  const CounterRng rng(seed, StreamPurpose::kSampling);
  Mat points(size(), static_cast<Eigen::Index>(n));
  Vec xi(size());
  for (std::size_t i = 0; i < n; ++i) {
    rng.normals(stream_offset + i, 0, {xi.data(), static_cast<std::size_t>(xi.size())});
    points.col(static_cast<Eigen::Index>(i)) = mean + root * xi;
  }
  return Ensemble(size() / 2, std::move(points));
}

// ---------------------------------------------------------------------------

LinearModel::LinearModel(Mat a, double gamma, Mat sst) : dim_(static_cast<int>(a.rows())) {
  require(a.rows() >= 1 && a.rows() == a.cols(), ErrorCode::kDimensionMismatch, "A must be square");
  require(sst.rows() == a.rows() && sst.cols() == a.cols(), ErrorCode::kDimensionMismatch,
          "sigma sigma^T must be d x d");
  const int d = dim_;
  b_ = Mat::Zero(2 * d, 2 * d);
  b_.topRightCorner(d, d) = Mat::Identity(d, d);
  b_.bottomLeftCorner(d, d) = -a;
  b_.bottomRightCorner(d, d) = -gamma * Mat::Identity(d, d);
  q_ = Mat::Zero(2 * d, 2 * d);
  q_.bottomRightCorner(d, d) = 0.5 * (sst + sst.transpose());

  Eigen::SelfAdjointEigenSolver<Mat> qeig(q_.bottomRightCorner(d, d));
  require(qeig.eigenvalues().minCoeff() > 0.0, ErrorCode::kInvalidArgument,
          "sigma sigma^T must be positive definite (Q of rank d)");
  if (spectral_abscissa() >= 0.0) {
    throw Error(ErrorCode::kNotHurwitz, "drift matrix B has an eigenvalue with Re >= 0",
                {{"spectral_abscissa", spectral_abscissa()}});
  }
}

LinearModel LinearModel::from_specs(const DriftSpec& drift, const DiffusionSpec& diffusion) {
  require(drift.is_linear(), ErrorCode::kInvalidArgument, "linear model needs F = 0 and no interaction");
  return LinearModel(drift.linear_position(), drift.friction(), diffusion.sigma_sigma_t());
}

double LinearModel::spectral_abscissa() const {
  return Eigen::EigenSolver<Mat>(b_, false).eigenvalues().real().maxCoeff();
}

Mat LinearModel::propagator(double t) const { return van_loan(b_, Mat::Zero(b_.rows(), b_.cols()), t).propagator; }

// ---------------------------------------------------------------------------

Mat solve_lyapunov(const Mat& b, const Mat& q) {
  using CMat = Eigen::MatrixXcd;
  require(b.rows() == b.cols() && q.rows() == b.rows() && q.cols() == b.cols(), ErrorCode::kDimensionMismatch,
          "Lyapunov operands must be square and equal size");
  const Eigen::Index n = b.rows();
  Eigen::ComplexSchur<Mat> schur(b);
  const CMat& t = schur.matrixT();
  const CMat& u = schur.matrixU();
  // B = U T U*, so T Y + Y T* = -U* Q U with X = U Y U*.
  const CMat c = -(u.adjoint() * q.cast<std::complex<double>>() * u);
  CMat y = CMat::Zero(n, n);
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    Eigen::VectorXcd rhs = c.col(j);
    for (Eigen::Index k = j + 1; k < n; ++k) rhs -= std::conj(t(j, k)) * y.col(k);
    const std::complex<double> shift = std::conj(t(j, j));
    // Back substitution on the upper-triangular (T + shift I).
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      std::complex<double> s = rhs(i);
      for (Eigen::Index k = i + 1; k < n; ++k) s -= t(i, k) * y(k, j);
      const std::complex<double> pivot = t(i, i) + shift;
      if (std::abs(pivot) < 1e-300)
        throw Error(ErrorCode::kNotHurwitz, "Lyapunov operator is singular (eigenvalue pair sums to zero)");
      y(i, j) = s / pivot;
    }
  }
  Mat x = (u * y * u.adjoint()).real();
  return 0.5 * (x + x.transpose());
}

double lyapunov_residual(const Mat& b, const Mat& q, const Mat& x) {
  return (b * x + x * b.transpose() + q).norm();
}

VanLoanResult van_loan(const Mat& b, const Mat& q, double t) {
  require(t >= 0.0 && std::isfinite(t), ErrorCode::kInvalidArgument, "time must be finite and >= 0");
  const Eigen::Index n = b.rows();
  if (t == 0.0) return {Mat::Identity(n, n), Mat::Zero(n, n)};
  const double norm = b.cwiseAbs().rowwise().sum().maxCoeff();
  int doublings = 0;
  double h = t;
  while (norm * h > 0.5 && doublings < 60) {
    h *= 0.5;
    ++doublings;
  }
  Mat block = Mat::Zero(2 * n, 2 * n);
  block.topLeftCorner(n, n) = -b * h;
  block.topRightCorner(n, n) = q * h;
  block.bottomRightCorner(n, n) = b.transpose() * h;
  const Mat e = block.exp();
  Mat phi = e.bottomRightCorner(n, n).transpose();
  Mat w = phi * e.topRightCorner(n, n);
  w = 0.5 * (w + w.transpose());
  for (int k = 0; k < doublings; ++k) {
    w = w + phi * w * phi.transpose();
    w = 0.5 * (w + w.transpose());
    phi = phi * phi;
  }
  return {phi, w};
}

GaussianLaw invariant_law(const LinearModel& model) {
  const Mat sigma = solve_lyapunov(model.drift_matrix(), model.diffusion_matrix());
  const double residual = lyapunov_residual(model.drift_matrix(), model.diffusion_matrix(), sigma);
  if (!(residual < 1e-10 * std::max(1.0, sigma.norm()))) {
    throw Error(ErrorCode::kNonFinite, "Lyapunov residual above certification threshold", {{"residual", residual}});
  }
  return {Vec::Zero(2 * model.dim()), sigma};
}

GaussianLaw transition_law(const LinearModel& model, const GaussianLaw& mu0, double t) {
  require(mu0.size() == 2 * model.dim(), ErrorCode::kDimensionMismatch, "initial law dimension differs from model");
  if (t == 0.0) return mu0;
  const VanLoanResult vl = van_loan(model.drift_matrix(), model.diffusion_matrix(), t);
  Mat cov = vl.propagator * mu0.cov * vl.propagator.transpose() + vl.covariance_integral;
  return {vl.propagator * mu0.mean, 0.5 * (cov + cov.transpose())};
}

Mat psd_sqrt(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (m + m.transpose()));
  const Vec root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

double w2_gaussian(const GaussianLaw& p, const GaussianLaw& q) {
  require(p.size() == q.size(), ErrorCode::kDimensionMismatch, "Gaussian laws differ in dimension");
  const Mat root_q = psd_sqrt(q.cov);
  const Mat cross = psd_sqrt(root_q * p.cov * root_q);
  const double w2sq = (p.mean - q.mean).squaredNorm() + p.cov.trace() + q.cov.trace() - 2.0 * cross.trace();
  return std::sqrt(std::max(0.0, w2sq));
}

double kl_gaussian(const GaussianLaw& p, const GaussianLaw& q) {
  require(p.size() == q.size(), ErrorCode::kDimensionMismatch, "Gaussian laws differ in dimension");
  Eigen::SelfAdjointEigenSolver<Mat> qeig(q.cov);
  const double qmin = qeig.eigenvalues().minCoeff();
  const double qmax = qeig.eigenvalues().maxCoeff();
  if (!(qmin > 1e-14 * std::max(1.0, qmax)))
    throw Error(ErrorCode::kSingularCovariance, "reference covariance is singular; relative entropy is infinite");
  Eigen::SelfAdjointEigenSolver<Mat> peig(p.cov);
  const double pmax = std::max(peig.eigenvalues().maxCoeff(), 1.0);
  if (!(peig.eigenvalues().minCoeff() > 1e-14 * pmax)) return std::numeric_limits<double>::infinity();

  const Eigen::LLT<Mat> qchol(q.cov);
  const Vec dm = q.mean - p.mean;
  const double trace_term = qchol.solve(p.cov).trace();
  const double mahalanobis = dm.dot(qchol.solve(dm));
  const double logdet_q = qeig.eigenvalues().array().log().sum();
  const double logdet_p = peig.eigenvalues().array().log().sum();
  const double kl = 0.5 * (trace_term + mahalanobis - static_cast<double>(p.size()) + logdet_q - logdet_p);
  return std::max(0.0, kl);
}

double poincare_constant(const GaussianLaw& law) {
  return Eigen::SelfAdjointEigenSolver<Mat>(law.cov).eigenvalues().maxCoeff();
}

}  // namespace kergo
