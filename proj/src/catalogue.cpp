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

// Registered perturbations F and interaction kernels F2.

#include <cmath>

#include "kergo/error.hpp"
#include "kergo/model.hpp"

namespace kergo {
namespace {

void expect_params(const std::string& name, const std::vector<double>& params, std::size_t n) {
  if (params.size() != n) {
    throw Error(ErrorCode::kSchema, name + " expects " + std::to_string(n) + " parameter(s), got " +
                                        std::to_string(params.size()));
  }
  for (double p : params)
    if (!std::isfinite(p)) throw Error(ErrorCode::kSchema, name + " parameters must be finite");
}

class ZeroPerturbation final : public Perturbation {
 public:
  std::string name() const override { return "zero"; }
  std::vector<double> params() const override { return {}; }
  double lipschitz() const override { return 0.0; }
  bool is_zero() const override { return true; }
  void add_value(const ConstVecRef&, VecRef) const override {}
  void add_jacobian(const ConstVecRef&, MatRef, MatRef) const override {}
};

// F(x, y)_i = a sin(x_i)
class ScaledSine final : public Perturbation {
 public:
  ScaledSine(double amplitude, int dim) : a_(amplitude), d_(dim) {}
  std::string name() const override { return "scaled_sine"; }
  std::vector<double> params() const override { return {a_}; }
  double lipschitz() const override { return std::abs(a_); }
  void add_value(const ConstVecRef& z, VecRef out) const override {
    for (int i = 0; i < d_; ++i) out(i) += a_ * std::sin(z(i));
  }
  void add_jacobian(const ConstVecRef& z, MatRef jx, MatRef) const override {
    for (int i = 0; i < d_; ++i) jx(i, i) += a_ * std::cos(z(i));
  }

 private:
  double a_;
  int d_;
};

// F(x, y) = a x exp(-|x|^2 / (2 s^2)); gradient bounded by |a|, decays away from 0.
class SmoothBump final : public Perturbation {
 public:
  SmoothBump(double amplitude, double width, int dim) : a_(amplitude), s_(width), d_(dim) {
    if (!(width > 0.0)) throw Error(ErrorCode::kSchema, "smooth_bump width must be > 0");
  }
  std::string name() const override { return "smooth_bump"; }
  std::vector<double> params() const override { return {a_, s_}; }
  double lipschitz() const override { return std::abs(a_); }
  void add_value(const ConstVecRef& z, VecRef out) const override {
    const auto x = z.head(d_);
    out += a_ * std::exp(-x.squaredNorm() / (2.0 * s_ * s_)) * x;
  }
  void add_jacobian(const ConstVecRef& z, MatRef jx, MatRef) const override {
    const auto x = z.head(d_);
    const double g = a_ * std::exp(-x.squaredNorm() / (2.0 * s_ * s_));
    jx += g * (Mat::Identity(d_, d_) - x * x.transpose() / (s_ * s_));
  }

 private:
  double a_, s_;
  int d_;
};

// F(x, y)_i = a tanh(cx x_i + cy y_i)
class TanhSaturation final : public Perturbation {
 public:
  TanhSaturation(double a, double cx, double cy, int dim) : a_(a), cx_(cx), cy_(cy), d_(dim) {}
  std::string name() const override { return "tanh_saturation"; }
  std::vector<double> params() const override { return {a_, cx_, cy_}; }
  double lipschitz() const override { return std::abs(a_) * std::hypot(cx_, cy_); }
  void add_value(const ConstVecRef& z, VecRef out) const override {
    for (int i = 0; i < d_; ++i) out(i) += a_ * std::tanh(cx_ * z(i) + cy_ * z(d_ + i));
  }
  void add_jacobian(const ConstVecRef& z, MatRef jx, MatRef jy) const override {
    for (int i = 0; i < d_; ++i) {
      const double t = std::tanh(cx_ * z(i) + cy_ * z(d_ + i));
      const double sech2 = 1.0 - t * t;
      jx(i, i) += a_ * cx_ * sech2;
      jy(i, i) += a_ * cy_ * sech2;
    }
  }

 private:
  double a_, cx_, cy_;
  int d_;
};

// F2(z, zbar) = kappa (xbar - x); the average only needs the mean position.
class LinearAttraction final : public InteractionKernel {
 public:
  LinearAttraction(double kappa, int dim) : kappa_(kappa), d_(dim) {}
  std::string name() const override { return "linear_attraction"; }
  std::vector<double> params() const override { return {kappa_}; }
  double lipschitz_second() const override { return std::abs(kappa_); }
  double lipschitz_first() const override { return std::abs(kappa_); }
  Vec value(const ConstVecRef& z, const ConstVecRef& zbar) const override {
    return kappa_ * (zbar.head(d_) - z.head(d_));
  }
  void add_average(const ConstVecRef& z, const MeasureSummary& mu, VecRef out) const override {
    out += kappa_ * (mu.mean.head(d_) - z.head(d_));
  }
  void add_jacobian_first(const ConstVecRef&, const MeasureSummary&, MatRef jx, MatRef) const override {
    jx.diagonal().array() -= kappa_;
  }

 private:
  double kappa_;
  int d_;
};

// F2(z, zbar)_i = kappa tanh(xbar_i - x_i); bounded, needs the full measure.
class TanhAttraction final : public InteractionKernel {
 public:
  TanhAttraction(double kappa, int dim) : kappa_(kappa), d_(dim) {}
  std::string name() const override { return "tanh_attraction"; }
  std::vector<double> params() const override { return {kappa_}; }
  double lipschitz_second() const override { return std::abs(kappa_); }
  double lipschitz_first() const override { return std::abs(kappa_); }
  Vec value(const ConstVecRef& z, const ConstVecRef& zbar) const override {
    return kappa_ * (zbar.head(d_) - z.head(d_)).array().tanh().matrix();
  }
  void add_jacobian_first(const ConstVecRef& z, const MeasureSummary& mu, MatRef jx, MatRef) const override {
    const Ensemble& e = *mu.ensemble;
    Vec acc = Vec::Zero(d_);
    for (std::size_t k = 0; k < e.size(); ++k) {
      const Vec t = (e.position(k) - z.head(d_)).array().tanh().matrix();
      acc.array() += 1.0 - t.array().square();
    }
    jx.diagonal() -= kappa_ * acc * e.weight();
  }

 private:
  double kappa_;
  int d_;
};

}  // namespace

std::shared_ptr<const Perturbation> make_perturbation(const std::string& name,
                                                      const std::vector<double>& params, int dim) {
  if (name == "zero") {
    expect_params(name, params, 0);
    return std::make_shared<ZeroPerturbation>();
  }
  if (name == "scaled_sine") {
    expect_params(name, params, 1);
    return std::make_shared<ScaledSine>(params[0], dim);
  }
  if (name == "smooth_bump") {
    expect_params(name, params, 2);
    return std::make_shared<SmoothBump>(params[0], params[1], dim);
  }
  if (name == "tanh_saturation") {
    expect_params(name, params, 3);
    return std::make_shared<TanhSaturation>(params[0], params[1], params[2], dim);
  }
  throw Error(ErrorCode::kSchema, "unknown perturbation '" + name + "'");
}

std::shared_ptr<const InteractionKernel> make_interaction(const std::string& name,
                                                          const std::vector<double>& params, int dim) {
  if (name == "linear_attraction") {
    expect_params(name, params, 1);
    return std::make_shared<LinearAttraction>(params[0], dim);
  }
  if (name == "tanh_attraction") {
    expect_params(name, params, 1);
    return std::make_shared<TanhAttraction>(params[0], dim);
  }
  throw Error(ErrorCode::kSchema, "unknown interaction kernel '" + name + "'");
}

std::vector<std::string> perturbation_names() { return {"zero", "scaled_sine", "smooth_bump", "tanh_saturation"}; }
std::vector<std::string> interaction_names() { return {"linear_attraction", "tanh_attraction"}; }

}  // namespace kergo
