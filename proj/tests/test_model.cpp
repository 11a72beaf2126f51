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

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numbers>

#include "kergo/error.hpp"
#include "kergo/model.hpp"
#include "kergo/rng.hpp"

using namespace kergo;

namespace {

PhasePoint pp(std::initializer_list<double> x, std::initializer_list<double> y) {
  Vec vx(static_cast<Eigen::Index>(x.size())), vy(static_cast<Eigen::Index>(y.size()));
  int i = 0;
  for (double v : x) vx(i++) = v;
  i = 0;
  for (double v : y) vy(i++) = v;
  return {vx, vy};
}

Vec random_vec(const CounterRng& rng, std::uint64_t stream, int n, double scale) {
  Vec v(n);
  rng.normals(stream, 0, {v.data(), static_cast<std::size_t>(n)});
  return scale * v;
}

// Central differences of the drift in the stacked phase coordinates.
Mat fd_jacobian(const DriftSpec& spec, const Vec& z, const Ensemble* mu, double h) {
  const int d = spec.dim();
  Mat j(d, 2 * d);
  for (int k = 0; k < 2 * d; ++k) {
    Vec zp = z, zm = z;
    zp(k) += h;
    zm(k) -= h;
    j.col(k) = (spec.eval(PhasePoint::from_stacked(zp), mu) - spec.eval(PhasePoint::from_stacked(zm), mu)) / (2 * h);
  }
  return j;
}

}  // namespace

TEST_CASE("eval_drift: linear case") {
  const DriftSpec spec(Mat::Identity(1, 1), 1.0);
  CHECK(spec.eval(pp({1.0}, {2.0}), nullptr)(0) == -3.0);
}

TEST_CASE("eval_drift: linear interaction averages the measure") {
  const DriftSpec spec(Mat::Identity(1, 1), 1.0, nullptr, make_interaction("linear_attraction", {0.1}, 1));
  const Ensemble mu = Ensemble::from_points({pp({1.0}, {0.0}), pp({3.0}, {0.0})});
  CHECK(spec.eval(pp({0.0}, {0.0}), &mu)(0) == doctest::Approx(0.2).epsilon(1e-15));
  // The generic pairwise average agrees with the separable fast path.
  const auto kernel = make_interaction("linear_attraction", {0.1}, 1);
  Vec acc = Vec::Zero(1);
  for (std::size_t i = 0; i < mu.size(); ++i) acc += kernel->value(Vec::Zero(2), mu.point(i));
  CHECK(acc(0) / 2.0 == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("eval_drift: scaled sine perturbation") {
  const DriftSpec spec(Mat::Identity(1, 1), 1.0, make_perturbation("scaled_sine", {0.5}, 1));
  const double x = std::numbers::pi / 2;
  // -x - y + 0.5 sin(x) with y = 0 and sin(pi/2) = 1.
  CHECK(spec.eval(pp({x}, {0.0}), nullptr)(0) == doctest::Approx(-std::numbers::pi / 2 + 0.5).epsilon(1e-15));
}

TEST_CASE("eval_drift: errors") {
  const DriftSpec plain(Mat::Identity(2, 2), 1.0);
  CHECK_THROWS_AS(plain.eval(pp({1.0}, {1.0}), nullptr), Error);
  const DriftSpec inter(Mat::Identity(1, 1), 1.0, nullptr, make_interaction("linear_attraction", {0.1}, 1));
  try {
    inter.eval(pp({0.0}, {0.0}), nullptr);
    FAIL("expected missing-measure error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMissingMeasure);
  }
  CHECK_THROWS_AS(PhasePoint(Vec::Zero(1), Vec::Zero(2)), Error);
  CHECK_THROWS_AS(DriftSpec(Mat::Identity(1, 1), -1.0), Error);
}

TEST_CASE("eval_jacobian: linear case is (-A, -gamma I)") {
  Mat a(2, 2);
  a << 1.0, 0.5, -0.5, 1.0;
  const DriftSpec spec(a, 0.7);
  const auto j = spec.jacobian(pp({0.3, -1.0}, {2.0, 0.1}), nullptr);
  CHECK((j.dx + a).norm() == 0.0);
  CHECK((j.dy + 0.7 * Mat::Identity(2, 2)).norm() == 0.0);
}

TEST_CASE("eval_jacobian: sine perturbation at x = 0 matches finite differences") {
  const DriftSpec spec(Mat::Identity(1, 1), 1.0, make_perturbation("scaled_sine", {0.5}, 1));
  const auto j = spec.jacobian(pp({0.0}, {0.0}), nullptr);
  CHECK(j.dx(0, 0) == -0.5);
  const Mat fd = fd_jacobian(spec, Vec::Zero(2), nullptr, 1e-5);
  CHECK(std::abs(fd(0, 0) - (-0.5)) < 1e-8);
}

TEST_CASE("eval_jacobian agrees with finite differences at random points") {
  const CounterRng rng(17);
  Mat a(2, 2);
  a << 1.0, 0.5, -0.5, 1.0;
  const Ensemble mu(2, random_vec(rng, 999, 4 * 6, 1.0).reshaped(4, 6));
  const std::vector<DriftSpec> specs = {
      DriftSpec(a, 1.0, make_perturbation("scaled_sine", {0.3}, 2)),
      DriftSpec(a, 1.0, make_perturbation("smooth_bump", {0.4, 1.5}, 2)),
      DriftSpec(a, 1.0, make_perturbation("tanh_saturation", {0.2, 1.0, -0.5}, 2)),
      DriftSpec(a, 1.0, make_perturbation("scaled_sine", {0.3}, 2), make_interaction("tanh_attraction", {0.2}, 2)),
      DriftSpec(a, 1.0, nullptr, make_interaction("linear_attraction", {0.05}, 2)),
  };
  for (const auto& spec : specs) {
    for (std::uint64_t k = 0; k < 100; ++k) {
      const Vec z = random_vec(rng, k, 4, 1.5);
      const auto j = spec.jacobian(PhasePoint::from_stacked(z), &mu);
      Mat analytic(2, 4);
      analytic << j.dx, j.dy;
      const Mat fd = fd_jacobian(spec, z, &mu, 1e-5);
      CHECK((analytic - fd).norm() <= 1e-6 * std::max(1.0, analytic.norm()));
    }
  }
}

TEST_CASE("no interaction: drift is bitwise independent of mu") {
  const DriftSpec spec(Mat::Identity(1, 1), 1.0, make_perturbation("scaled_sine", {0.5}, 1));
  const Ensemble mu1 = Ensemble::from_points({pp({1.0}, {0.0})});
  const Ensemble mu2 = Ensemble::from_points({pp({-7.0}, {3.0}), pp({2.0}, {2.0})});
  const PhasePoint z = pp({0.37}, {-1.2});
  const double a = spec.eval(z, &mu1)(0), b = spec.eval(z, &mu2)(0), c = spec.eval(z, nullptr)(0);
  CHECK(std::memcmp(&a, &b, sizeof a) == 0);
  CHECK(std::memcmp(&a, &c, sizeof a) == 0);
}

TEST_CASE("declared K_b must dominate the Lipschitz probe") {
  try {
    DriftSpec(Mat::Identity(1, 1), 1.0, nullptr, nullptr, 1.0);
    FAIL("expected K_b underdeclared");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kKbUnderdeclared);
  }
  const DriftSpec ok(Mat::Identity(1, 1), 1.0, nullptr, nullptr, 1.5);
  CHECK(ok.lipschitz_probe(1000, 1) <= 1.5);
  CHECK(ok.lipschitz_probe(1000, 1) > 1.4);  // sqrt(2) is the true constant
}

TEST_CASE("lift_to_system: N = 1 without interaction equals eval_drift") {
  const DriftSpec spec(Mat::Identity(1, 1), 1.0, make_perturbation("scaled_sine", {0.5}, 1));
  const SystemDrift sys = spec.lift(1);
  Vec z(2);
  z << 0.4, -0.9;
  CHECK(sys.eval(z)(0) == spec.eval(PhasePoint::from_stacked(z), nullptr)(0));
}

TEST_CASE("lift_to_system: two-particle linear interaction matrix") {
  const double k = 0.3;
  const DriftSpec spec(Mat::Identity(1, 1), 1.0, nullptr, make_interaction("linear_attraction", {k}, 1));
  const SystemDrift sys = spec.lift(2);
  // Stacked (x1, y1, x2, y2); particle i sees -x_i - y_i + k((x1 + x2)/2 - x_i).
  Mat expected(2, 4);
  expected << -1.0 - k / 2, -1.0, k / 2, 0.0,
              k / 2, 0.0, -1.0 - k / 2, -1.0;
  Mat assembled(2, 4);
  for (int c = 0; c < 4; ++c) assembled.col(c) = sys.eval(Vec::Unit(4, c));
  CHECK((assembled - expected).norm() < 1e-15);
}

TEST_CASE("lift_to_system: aggregated Lipschitz bound on random stacked pairs") {
  const DriftSpec spec(Mat::Identity(1, 1), 1.0, make_perturbation("scaled_sine", {0.3}, 1),
                       make_interaction("tanh_attraction", {0.2}, 1));
  const CounterRng rng(5);
  for (std::size_t n : {1u, 3u, 8u}) {
    const SystemDrift sys = spec.lift(n);
    const double bound = sys.lipschitz_bound();
    CHECK(bound == doctest::Approx(std::sqrt(2 * spec.kb() * spec.kb() + 2 * 0.2 * 0.2)));
    for (std::uint64_t p = 0; p < 1000; ++p) {
      const int len = static_cast<int>(2 * n);
      const Vec z = random_vec(rng, 2 * p, len, 2.0);
      const Vec zb = z + random_vec(rng, 2 * p + 1, len, (p % 2) ? 1.0 : 1e-3);
      CHECK((sys.eval(z) - sys.eval(zb)).norm() <= bound * (z - zb).norm() * (1 + 1e-12));
    }
  }
}

TEST_CASE("drift config round trip") {
  Mat a(2, 2);
  a << 1.0, 0.5, -0.5, 1.0;
  const DriftSpec spec(a, 1.2, make_perturbation("tanh_saturation", {0.2, 1.0, 0.5}, 2),
                       make_interaction("linear_attraction", {0.05}, 2), 2.0);
  const DriftSpec back = DriftSpec::from_json(spec.to_json());
  CHECK(back.to_json() == spec.to_json());
  CHECK_THROWS_AS(DriftSpec::from_json({{"dimension", 1}, {"perturbation", {{"name", "nope"}}}}), Error);
  CHECK_THROWS_AS(DriftSpec::from_json({{"dimension", 1}, {"perturbation", {{"name", "scaled_sine"}}}}), Error);
}

TEST_CASE("diffusion ellipticity bounds") {
  Mat s(2, 2);
  s << 1.0, 0.0, 0.5, 2.0;
  const DiffusionSpec diff(s);
  Eigen::SelfAdjointEigenSolver<Mat> eig(s * s.transpose());
  CHECK(diff.delta_lower() == doctest::Approx(eig.eigenvalues().minCoeff()));
  CHECK(diff.delta_upper() == doctest::Approx(eig.eigenvalues().maxCoeff()));
  CHECK(diff.min_eigenvalue() == doctest::Approx(eig.eigenvalues().minCoeff()));
  CHECK_THROWS_AS(DiffusionSpec(s, 1.0, 0.5), Error);  // declared upper bound too small
  CHECK_THROWS_AS(DiffusionSpec(Mat::Zero(1, 1)), Error);
  const DiffusionSpec back = DiffusionSpec::from_json(diff.to_json(), 2);
  CHECK((back.sigma() - s).norm() == 0.0);
}
