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

#include "kergo/model.hpp"

#include <algorithm>
#include <cmath>

#include "kergo/error.hpp"
#include "kergo/rng.hpp"

namespace kergo {

PhasePoint::PhasePoint(Vec position, Vec velocity) : x(std::move(position)), y(std::move(velocity)) {
  require(x.size() == y.size() && x.size() >= 1, ErrorCode::kDimensionMismatch,
          "position and velocity must share dimension d >= 1");
}

PhasePoint PhasePoint::from_stacked(const Vec& z) {
  require(z.size() >= 2 && z.size() % 2 == 0, ErrorCode::kDimensionMismatch,
          "stacked phase point must have even length");
  const auto d = z.size() / 2;
  return PhasePoint(z.head(d), z.tail(d));
}

Vec PhasePoint::stacked() const {
  Vec z(2 * x.size());
  z << x, y;
  return z;
}

Ensemble::Ensemble(int dim, Mat points) : dim_(dim), points_(std::move(points)) {
  require(dim >= 1, ErrorCode::kDimensionMismatch, "ensemble dimension must be >= 1");
  require(points_.rows() == 2 * dim, ErrorCode::kDimensionMismatch,
          "ensemble storage must have 2d rows");
  require(points_.cols() >= 1, ErrorCode::kInvalidArgument, "ensemble must hold at least one point");
}

Ensemble Ensemble::from_points(const std::vector<PhasePoint>& points) {
  require(!points.empty(), ErrorCode::kInvalidArgument, "ensemble must hold at least one point");
  const int d = points.front().dim();
  Mat data(2 * d, static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    require(points[i].dim() == d, ErrorCode::kDimensionMismatch, "ensemble points differ in dimension");
    data.col(static_cast<Eigen::Index>(i)) = points[i].stacked();
  }
  return Ensemble(d, std::move(data));
}

Ensemble Ensemble::point_mass(const PhasePoint& z) { return from_points({z}); }

PhasePoint Ensemble::phase_point(std::size_t i) const { return PhasePoint(position(i), velocity(i)); }

Vec Ensemble::mean() const { return points_.rowwise().mean(); }

Mat Ensemble::covariance() const {
  const Mat centered = points_.colwise() - mean();
  return centered * centered.transpose() / static_cast<double>(size());
}

double Ensemble::second_moment() const { return points_.colwise().squaredNorm().mean(); }

Ensemble Ensemble::stride_subsample(std::size_t max_points) const {
  require(max_points >= 1, ErrorCode::kInvalidArgument, "subsample size must be >= 1");
  if (size() <= max_points) return *this;
  const std::size_t stride = (size() + max_points - 1) / max_points;
  const std::size_t kept = (size() + stride - 1) / stride;
  Mat data(points_.rows(), static_cast<Eigen::Index>(kept));
  for (std::size_t k = 0; k < kept; ++k) data.col(static_cast<Eigen::Index>(k)) = point(k * stride);
  return Ensemble(dim_, std::move(data));
}

Ensemble Ensemble::resized(std::size_t n) const {
  require(n >= 1, ErrorCode::kInvalidArgument, "ensemble size must be >= 1");
  Mat data(points_.rows(), static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) data.col(static_cast<Eigen::Index>(k)) = point(k % size());
  return Ensemble(dim_, std::move(data));
}

MeasureSummary MeasureSummary::of(const Ensemble& mu) { return {&mu, mu.mean()}; }

void InteractionKernel::add_average(const ConstVecRef& z, const MeasureSummary& mu, VecRef out) const {
  const Ensemble& e = *mu.ensemble;
  Vec acc = Vec::Zero(out.size());
  for (std::size_t i = 0; i < e.size(); ++i) acc += value(z, e.point(i));
  out += acc * e.weight();
}

// ---------------------------------------------------------------------------

DriftSpec::DriftSpec(Mat linear_position, double friction,
                     std::shared_ptr<const Perturbation> perturbation,
                     std::shared_ptr<const InteractionKernel> interaction,
                     std::optional<double> declared_kb)
    : a_(std::move(linear_position)),
      gamma_(friction),
      perturbation_(std::move(perturbation)),
      interaction_(std::move(interaction)) {
  require(a_.rows() >= 1 && a_.rows() == a_.cols(), ErrorCode::kDimensionMismatch,
          "linear_position must be a square d x d matrix");
  require(std::isfinite(gamma_) && gamma_ >= 0.0, ErrorCode::kInvalidArgument, "friction must be >= 0");
  if (!perturbation_) perturbation_ = make_perturbation("zero", {}, dim());
  kb_ = declared_kb.value_or(component_lipschitz_bound());
  require(std::isfinite(kb_) && kb_ >= 0.0, ErrorCode::kInvalidArgument, "K_b must be finite and >= 0");

  // Declared constants are probe-checked, never derived symbolically.
  std::optional<Ensemble> probe_mu;
  if (interaction_) probe_mu = Ensemble(dim(), Mat::Zero(2 * dim(), 1));
  const double probe = lipschitz_probe(256, 0x5eedULL, probe_mu ? &*probe_mu : nullptr);
  if (probe > kb_ * (1.0 + 1e-9) + 1e-12) {
    throw Error(ErrorCode::kKbUnderdeclared, "declared K_b is below the finite-difference probe",
                {{"declared", kb_}, {"probe", probe}});
  }
}

DriftSpec DriftSpec::free_flight(int dim) { return DriftSpec(Mat::Zero(dim, dim), 0.0); }

double DriftSpec::component_lipschitz_bound() const {
  Mat linear(dim(), 2 * dim());
  linear << a_, gamma_ * Mat::Identity(dim(), dim());
  const double linear_norm = Eigen::JacobiSVD<Mat>(linear).singularValues()(0);
  return linear_norm + perturbation_->lipschitz() + (interaction_ ? interaction_->lipschitz_first() : 0.0);
}

void DriftSpec::check_measure(const MeasureSummary* mu) const {
  if (interaction_ && (mu == nullptr || mu->ensemble == nullptr)) {
    throw Error(ErrorCode::kMissingMeasure, "drift has an interaction kernel; a measure is required");
  }
  if (interaction_ && mu->ensemble->dim() != dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "measure dimension differs from drift dimension");
  }
}

void DriftSpec::eval_into(const ConstVecRef& z, const MeasureSummary* mu, VecRef out) const {
  const int d = dim();
  for (int i = 0; i < d; ++i) {
    double acc = -gamma_ * z(d + i);
    for (int j = 0; j < d; ++j) acc -= a_(i, j) * z(j);
    out(i) = acc;
  }
  if (!perturbation_->is_zero()) perturbation_->add_value(z, out);
  if (interaction_) interaction_->add_average(z, *mu, out);
}

void DriftSpec::jacobian_into(const ConstVecRef& z, const MeasureSummary* mu, MatRef dx,
                              MatRef dy) const {
  dx = -a_;
  dy = -gamma_ * Mat::Identity(dim(), dim());
  if (!perturbation_->is_zero()) perturbation_->add_jacobian(z, dx, dy);
  if (interaction_) interaction_->add_jacobian_first(z, *mu, dx, dy);
}

Vec DriftSpec::eval(const PhasePoint& z, const Ensemble* mu) const {
  require(z.dim() == dim(), ErrorCode::kDimensionMismatch, "phase point dimension differs from drift");
  std::optional<MeasureSummary> summary;
  if (interaction_ && mu) summary = MeasureSummary::of(*mu);
  const MeasureSummary* s = summary ? &*summary : nullptr;
  check_measure(s);
  Vec out(dim());
  eval_into(z.stacked(), s, out);
  return out;
}

DriftJacobian DriftSpec::jacobian(const PhasePoint& z, const Ensemble* mu) const {
  require(z.dim() == dim(), ErrorCode::kDimensionMismatch, "phase point dimension differs from drift");
  std::optional<MeasureSummary> summary;
  if (interaction_ && mu) summary = MeasureSummary::of(*mu);
  const MeasureSummary* s = summary ? &*summary : nullptr;
  check_measure(s);
  DriftJacobian j{Mat(dim(), dim()), Mat(dim(), dim())};
  jacobian_into(z.stacked(), s, j.dx, j.dy);
  return j;
}

double DriftSpec::lipschitz_probe(std::size_t pairs, std::uint64_t seed, const Ensemble* mu,
                                  double radius) const {
  std::optional<MeasureSummary> summary;
  if (interaction_ && mu) summary = MeasureSummary::of(*mu);
  const MeasureSummary* s = summary ? &*summary : nullptr;
  check_measure(s);
  const int n = 2 * dim();
  const CounterRng rng(seed, StreamPurpose::kProbe);
  Vec z(n), zb(n), bz(dim()), bzb(dim()), draw(2 * n + 1);
  double worst = 0.0;
  for (std::size_t p = 0; p < pairs; ++p) {
    rng.normals(p, 0, {draw.data(), static_cast<std::size_t>(draw.size())});
    z = radius * draw.head(n);
    // Alternate far pairs with near pairs so local slopes are probed too.
    const double scale = (p % 2 == 0) ? radius : 1e-4 * std::exp(std::abs(draw(2 * n)));
    zb = z + scale * draw.segment(n, n);
    const double dist = (z - zb).norm();
    if (dist == 0.0) continue;
    eval_into(z, s, bz);
    eval_into(zb, s, bzb);
    worst = std::max(worst, (bz - bzb).norm() / dist);
  }
  return worst;
}

SystemDrift DriftSpec::lift(std::size_t particles) const { return SystemDrift(*this, particles); }

DriftSpec DriftSpec::with_interaction(std::shared_ptr<const InteractionKernel> kernel,
                                      std::optional<double> declared_kb) const {
  return DriftSpec(a_, gamma_, perturbation_, std::move(kernel), declared_kb);
}

namespace {

nlohmann::json matrix_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Mat matrix_from_json(const nlohmann::json& j, int dim, const char* what) {
  if (j.is_number()) return j.get<double>() * Mat::Identity(dim, dim);
  if (!j.is_array() || j.empty()) throw Error(ErrorCode::kSchema, std::string(what) + " must be a number or matrix");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!j[i].is_array() || static_cast<Eigen::Index>(j[i].size()) != cols)
      throw Error(ErrorCode::kSchema, std::string(what) + " rows must have equal length");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

}  // namespace

nlohmann::json DriftSpec::to_json() const {
  nlohmann::json j;
  j["dimension"] = dim();
  j["linear_position"] = matrix_to_json(a_);
  j["friction"] = gamma_;
  j["perturbation"] = {{"name", perturbation_->name()}, {"params", perturbation_->params()}};
  if (interaction_) j["interaction"] = {{"name", interaction_->name()}, {"params", interaction_->params()}};
  j["K_b"] = kb_;
  return j;
}

DriftSpec DriftSpec::from_json(const nlohmann::json& j) {
  try {
    const int d = j.at("dimension").get<int>();
    if (d < 1) throw Error(ErrorCode::kSchema, "dimension must be >= 1");
    Mat a = j.contains("linear_position") ? matrix_from_json(j["linear_position"], d, "linear_position")
                                          : Mat::Identity(d, d);
    if (a.rows() != d || a.cols() != d) throw Error(ErrorCode::kSchema, "linear_position must be d x d");
    const double gamma = j.value("friction", 1.0);
    std::shared_ptr<const Perturbation> pert;
    if (j.contains("perturbation")) {
      const auto& p = j["perturbation"];
      pert = make_perturbation(p.at("name").get<std::string>(),
                               p.value("params", std::vector<double>{}), d);
    }
    std::shared_ptr<const InteractionKernel> inter;
    if (j.contains("interaction") && !j["interaction"].is_null()) {
      const auto& p = j["interaction"];
      const auto name = p.at("name").get<std::string>();
      if (name != "none") inter = make_interaction(name, p.value("params", std::vector<double>{}), d);
    }
    std::optional<double> kb;
    if (j.contains("K_b")) kb = j["K_b"].get<double>();
    return DriftSpec(std::move(a), gamma, std::move(pert), std::move(inter), kb);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchema, std::string("drift config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

SystemDrift::SystemDrift(DriftSpec spec, std::size_t particles) : spec_(std::move(spec)), n_(particles) {
  require(particles >= 1, ErrorCode::kInvalidArgument, "particle count must be >= 1");
}

Ensemble SystemDrift::unstack(const Vec& stacked, int dim) {
  require(stacked.size() % (2 * dim) == 0, ErrorCode::kDimensionMismatch, "stacked length not a multiple of 2d");
  const auto n = stacked.size() / (2 * dim);
  return Ensemble(dim, Eigen::Map<const Mat>(stacked.data(), 2 * dim, n));
}

Vec SystemDrift::stack(const Ensemble& ensemble) {
  return Eigen::Map<const Vec>(ensemble.points().data(), ensemble.points().size());
}

Vec SystemDrift::eval(const Vec& stacked) const {
  const int d = spec_.dim();
  require(stacked.size() == static_cast<Eigen::Index>(2 * d * n_), ErrorCode::kDimensionMismatch,
          "stacked state has wrong length");
  const Ensemble e = unstack(stacked, d);
  const MeasureSummary mu = MeasureSummary::of(e);
  Vec out(d * static_cast<Eigen::Index>(n_));
  for (std::size_t i = 0; i < n_; ++i) {
    spec_.eval_into(e.point(i), spec_.has_interaction() ? &mu : nullptr,
                    out.segment(static_cast<Eigen::Index>(i) * d, d));
  }
  return out;
}

double SystemDrift::lipschitz_bound() const {
  return std::sqrt(2.0 * spec_.kb() * spec_.kb() + 2.0 * spec_.ki() * spec_.ki());
}

// ---------------------------------------------------------------------------

DiffusionSpec::DiffusionSpec(Mat sigma) : sigma_(std::move(sigma)) {
  require(sigma_.rows() >= 1 && sigma_.cols() >= 1, ErrorCode::kDimensionMismatch, "sigma must be non-empty");
  Eigen::SelfAdjointEigenSolver<Mat> eig(sigma_ * sigma_.transpose());
  delta2_ = eig.eigenvalues().minCoeff();
  delta1_ = eig.eigenvalues().maxCoeff();
  require(delta2_ > 0.0, ErrorCode::kInvalidArgument, "sigma sigma^T must be invertible");
}

DiffusionSpec::DiffusionSpec(Mat sigma, double delta1, double delta2)
    : sigma_(std::move(sigma)), delta1_(delta1), delta2_(delta2) {
  require(delta2_ > 0.0 && delta2_ <= delta1_, ErrorCode::kInvalidArgument,
          "ellipticity bounds need 0 < delta2 <= delta1");
  check_bounds(sigma_);
}

DiffusionSpec::DiffusionSpec(SigmaOfMeasure sigma_of, Mat reference_sigma, double delta1, double delta2)
    : sigma_(std::move(reference_sigma)), sigma_of_(std::move(sigma_of)), delta1_(delta1), delta2_(delta2) {
  require(delta2_ > 0.0 && delta2_ <= delta1_, ErrorCode::kInvalidArgument,
          "ellipticity bounds need 0 < delta2 <= delta1");
  check_bounds(sigma_);
}

DiffusionSpec DiffusionSpec::scalar(int dim, double s) { return DiffusionSpec(s * Mat::Identity(dim, dim)); }

DiffusionSpec DiffusionSpec::noiseless(int dim) {
  DiffusionSpec out = scalar(dim, 1.0);
  out.sigma_.setZero();
  out.delta1_ = 0.0;
  out.delta2_ = 0.0;
  return out;
}

void DiffusionSpec::check_bounds(const Mat& sigma) const {
  require(sigma.rows() == sigma_.rows() && sigma.cols() == sigma_.cols(), ErrorCode::kDimensionMismatch,
          "sigma(mu) changed shape");
  Eigen::SelfAdjointEigenSolver<Mat> eig(sigma * sigma.transpose());
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  const double slack = 1e-12 * std::max(1.0, hi);
  if (lo < delta2_ - slack || hi > delta1_ + slack) {
    throw Error(ErrorCode::kInvalidArgument, "sigma sigma^T violates declared ellipticity bounds",
                {{"min_eigenvalue", lo}, {"max_eigenvalue", hi}, {"delta1", delta1_}, {"delta2", delta2_}});
  }
}

Mat DiffusionSpec::sigma(const MeasureSummary* mu) const {
  if (!sigma_of_ || mu == nullptr) return sigma_;
  Mat s = sigma_of_(*mu);
  check_bounds(s);
  return s;
}

Mat DiffusionSpec::sigma_sigma_t(const MeasureSummary* mu) const {
  const Mat s = sigma(mu);
  return s * s.transpose();
}

double DiffusionSpec::min_eigenvalue() const {
  return Eigen::SelfAdjointEigenSolver<Mat>(sigma_ * sigma_.transpose()).eigenvalues().minCoeff();
}

nlohmann::json DiffusionSpec::to_json() const {
  return {{"sigma", matrix_to_json(sigma_)}, {"delta1", delta1_}, {"delta2", delta2_}};
}

DiffusionSpec DiffusionSpec::from_json(const nlohmann::json& j, int dim) {
  try {
    Mat sigma = matrix_from_json(j.at("sigma"), dim, "sigma");
    if (sigma.rows() != dim) throw Error(ErrorCode::kSchema, "sigma must have d rows");
    if (j.contains("delta1") && j.contains("delta2"))
      return DiffusionSpec(std::move(sigma), j["delta1"].get<double>(), j["delta2"].get<double>());
    return DiffusionSpec(std::move(sigma));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchema, std::string("diffusion config: ") + e.what());
  }
}

}  // namespace kergo
