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

#include "kergo/dissipativity.hpp"
#include "kergo/error.hpp"
#include "kergo/rng.hpp"

using namespace kergo;

namespace {

DriftSpec damped() { return DriftSpec(Mat::Identity(1, 1), 1.0); }
DriftSpec expanding() { return DriftSpec(Mat::Constant(1, 1, -1.0), 0.0); }

PatdiOptions opts(std::size_t trials, std::uint64_t seed = 0) {
  PatdiOptions o;
  o.trials = trials;
  o.seed = seed;
  return o;
}

// Brute-force minimum of g on a uniform grid (independent of the optimizer).
double eta1_grid_oracle(double c, double lambda, double kb, std::size_t points, double tmax) {
  const double t0 = std::log(c) / lambda;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i <= points; ++i) {
    const double t = t0 + (tmax - t0) * static_cast<double>(i) / static_cast<double>(points);
    const double g = std::exp((1 + kb) * t) * std::sqrt(t) / (1 - c * std::exp(-lambda * t));
    best = std::min(best, g);
  }
  return 1.0 / best;
}

}  // namespace

TEST_CASE("cert construction rejects boundary inputs") {
  CHECK_THROWS_AS(DissipativityCert(0.0, 1, 0.5, 1), Error);
  CHECK_THROWS_AS(DissipativityCert(0.1, 0, 0.5, 1), Error);
  CHECK_THROWS_AS(DissipativityCert(0.1, 1, 1.0, 1), Error);
  CHECK_THROWS_AS(DissipativityCert(0.1, 1, -1.0, 1), Error);
  CHECK_THROWS_AS(DissipativityCert(0.1, 1, 0.5, 0), Error);
  CHECK(DissipativityCert(0.25, 1, 0.5, 1).interaction_budget() == doctest::Approx(0.25 / 1.5));
}

TEST_CASE("patdi_lhs matches the hand-expanded quadratic form for b = -x - y") {
  const DriftSpec drift = damped();
  const CounterRng rng(2);
  for (std::uint64_t k = 0; k < 50; ++k) {
    Vec z(2), zb(2);
    rng.normals(k, 0, {z.data(), 2});
    rng.normals(k, 1, {zb.data(), 2});
    const double u = z(0) - zb(0), v = z(1) - zb(1);
    const double expect = -0.5 * u * u - 0.5 * v * v - 0.5 * u * v;
    CHECK(patdi_lhs(drift, 1.0, 0.5, z, zb, nullptr) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("check_patdi: damped linear drift holds with the analytic cert") {
  const DissipativityCert cert(0.25, 1.0, 0.5, 1.0);
  const PatdiVerdict v = check_patdi(damped(), cert, nullptr, opts(20000));
  CHECK(v.holds);
  CHECK(!v.witness);
  CHECK(v.trials == 20000);
  CHECK(v.worst_margin <= 1e-12);
  CHECK(v.sample_rate >= 0.25 - 1e-12);
  CHECK(linear_patdi_rate(damped(), 1.0, 0.5) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("check_patdi: anti-dissipative drift is falsified with a genuine witness") {
  for (double r0 : {0.5, 0.0, -0.5}) {
    const DissipativityCert cert(0.1, 1.0, r0, 1.0);
    const PatdiVerdict v = check_patdi(expanding(), cert, nullptr, opts(2000));
    REQUIRE(!v.holds);
    REQUIRE(v.witness);
    const Witness& w = *v.witness;
    const double lhs = patdi_lhs(expanding(), 1.0, r0, w.z, w.zbar, nullptr);
    CHECK(lhs == doctest::Approx(w.lhs));
    CHECK(lhs > -0.1 * (w.z - w.zbar).squaredNorm());
    CHECK((w.z - w.zbar).norm() >= 1.0 - 1e-12);
    // First violating trial: no earlier trial violates.
    CHECK(w.trial < 2000);
  }
}

TEST_CASE("check_patdi: degenerate sampling range") {
  const DissipativityCert cert(0.25, 1.0, 0.5, 2.0);
  PatdiOptions o = opts(10);
  o.rmax = 2.0;
  try {
    check_patdi(damped(), cert, nullptr, o);
    FAIL("expected degenerate sampling");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerateSampling);
  }
}

TEST_CASE("check_patdi is monotone in theta on a fixed sample") {
  Mat a(2, 2);
  a << 1.0, 0.5, -0.5, 1.0;
  const DriftSpec drift(a, 1.0, make_perturbation("scaled_sine", {0.3}, 2));
  const PatdiOptions o = opts(3000, 8);
  const PatdiVerdict base = check_patdi(drift, DissipativityCert(1.0, 1.0, 0.5, 1.0), nullptr, o);
  const double rate = base.sample_rate;
  for (double theta : {0.1, 0.3, 0.6, 0.9, 1.2}) {
    const bool holds = check_patdi(drift, DissipativityCert(theta * rate, 1.0, 0.5, 1.0), nullptr, o).holds;
    CHECK(holds == (theta <= 1.0));
    if (holds) {
      CHECK(check_patdi(drift, DissipativityCert(0.5 * theta * rate, 1.0, 0.5, 1.0), nullptr, o).holds);
    }
  }
}

TEST_CASE("measure-independent drift: verdict ignores mu") {
  const DriftSpec drift(Mat::Identity(1, 1), 1.0, make_perturbation("scaled_sine", {0.3}, 1));
  const Ensemble mu(1, Mat::Random(2, 5));
  const DissipativityCert cert(0.2, 1.0, 0.5, 1.0);
  const PatdiVerdict a = check_patdi(drift, cert, nullptr, opts(1000, 3));
  const PatdiVerdict b = check_patdi(drift, cert, &mu, opts(1000, 3));
  CHECK(a.holds == b.holds);
  CHECK(a.worst_margin == b.worst_margin);
  CHECK(a.sample_rate == b.sample_rate);
}

TEST_CASE("interaction without a measure uses the probe set") {
  const DriftSpec drift(Mat::Identity(1, 1), 1.0, nullptr, make_interaction("tanh_attraction", {0.05}, 1));
  const PatdiVerdict v = check_patdi(drift, DissipativityCert(0.15, 1.0, 0.5, 1.0), nullptr, opts(500));
  CHECK(v.probes.size() == 3);
  CHECK(v.trials == 1500);
  CHECK(v.holds);
}

TEST_CASE("search_cert: damped linear drift") {
  SearchGrid grid = SearchGrid::standard();
  const SearchResult res = search_cert(damped(), grid);
  REQUIRE(res.cert);
  CHECK(res.cert->theta >= 0.2);
  CHECK(res.evaluated == grid.r.size() * grid.r0.size() * grid.radius.size());
  // Re-passes with a fresh seed.
  CHECK(check_patdi(damped(), *res.cert, nullptr, opts(20000, 12345)).holds);
  CHECK(res.cert->status == CertStatus::kAnalytic);
}

TEST_CASE("search_cert: anti-dissipative drift finds nothing") {
  const SearchResult res = search_cert(expanding(), SearchGrid::standard());
  CHECK(!res.cert);
  CHECK(res.falsified == res.evaluated);
}

TEST_CASE("search_cert: zero-amplitude perturbation matches the linear case") {
  const DriftSpec zero_f(Mat::Identity(1, 1), 1.0, make_perturbation("scaled_sine", {0.0}, 1));
  const SearchResult a = search_cert(damped(), SearchGrid::standard());
  const SearchResult b = search_cert(zero_f, SearchGrid::standard());
  REQUIRE(a.cert);
  REQUIRE(b.cert);
  CHECK(a.cert->theta == b.cert->theta);
  CHECK(a.cert->r == b.cert->r);
  CHECK(a.cert->r0 == b.cert->r0);
  CHECK(a.cert->radius == b.cert->radius);
}

TEST_CASE("search_cert: perturbed drift re-passes with fresh seeds") {
  Mat a(2, 2);
  a << 1.0, 0.5, -0.5, 1.0;
  const DriftSpec drift(a, 1.0, make_perturbation("tanh_saturation", {0.3, 1.0, 0.0}, 2));
  const SearchResult res = search_cert(drift, SearchGrid::standard());
  REQUIRE(res.cert);
  CHECK(res.cert->status == CertStatus::kCertifiedBySampling);
  for (std::uint64_t seed : {101u, 202u, 303u}) CHECK(check_patdi(drift, *res.cert, nullptr, opts(5000, seed)).holds);
}

TEST_CASE("search_cert: empty grid") {
  SearchGrid g;
  CHECK_THROWS_AS(search_cert(damped(), g), Error);
}

TEST_CASE("check_patdi_system: N = 1 without interaction reproduces check_patdi") {
  const DriftSpec drift(Mat::Identity(1, 1), 1.0, make_perturbation("scaled_sine", {0.3}, 1));
  for (double theta : {0.2, 0.5}) {
    const DissipativityCert cert(theta, 1.0, 0.5, 1.0);
    const PatdiVerdict a = check_patdi(drift, cert, nullptr, opts(2000, 4));
    const PatdiVerdict b = check_patdi_system(drift, cert, 1, opts(2000, 4));
    CHECK(a.holds == b.holds);
    CHECK(a.worst_margin == b.worst_margin);
    if (a.witness) CHECK(a.witness->trial == b.witness->trial);
  }
}

TEST_CASE("check_patdi_system: exhausted interaction budget") {
  const DissipativityCert cert(0.25, 1.0, 0.5, 1.0);
  const DriftSpec drift(Mat::Identity(1, 1), 1.0, nullptr,
                        make_interaction("linear_attraction", {cert.interaction_budget()}, 1));
  try {
    check_patdi_system(drift, cert, 4, opts(100));
    FAIL("expected exhausted budget");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInteractionBudgetExhausted);
  }
}

TEST_CASE("check_patdi_system: weak linear attraction keeps theta_eff = 0.235") {
  const DriftSpec drift(Mat::Identity(1, 1), 1.0, nullptr, make_interaction("linear_attraction", {0.01}, 1));
  const PatdiVerdict v = check_patdi_system(drift, DissipativityCert(0.25, 1.0, 0.5, 1.0), 4, opts(5000));
  CHECK(v.tested_theta == doctest::Approx(0.235).epsilon(1e-14));
  CHECK(v.holds);
}

TEST_CASE("compute_eta1 agrees with a dense grid oracle") {
  const Eta1Threshold e = compute_eta1(1.0, 1.0, 0.0);
  const double oracle = eta1_grid_oracle(1.0, 1.0, 0.0, 1000000, 10.0);
  CHECK(std::abs(e.value - oracle) <= 1e-6 * oracle);
  CHECK(e.minimizer_t > 0.0);
  CHECK(std::exp(-eta1_log_objective(e.minimizer_t, 1.0, 1.0, 0.0)) == doctest::Approx(e.value).epsilon(1e-12));
  for (auto [c, l, kb] : {std::tuple{2.0, 0.5, 1.0}, std::tuple{5.0, 3.0, 0.2}, std::tuple{1.5, 10.0, 2.0}}) {
    const Eta1Threshold t = compute_eta1(c, l, kb);
    const double t0 = std::log(c) / l;
    CHECK(t.minimizer_t > t0);
    const double o = eta1_grid_oracle(c, l, kb, 1000000, t0 + 10.0);
    CHECK(std::abs(t.value - o) <= 1e-6 * o);
  }
}

TEST_CASE("compute_eta1: monotone in K_b and lambda, stable under grid refinement") {
  const CounterRng rng(6, StreamPurpose::kProbe);
  for (std::uint64_t k = 0; k < 10; ++k) {
    const double c = 1.0 + 4.0 * rng.uniform(k, 0);
    const double l = 0.1 + 5.0 * rng.uniform(k, 1);
    const double kb = 0.1 + 2.0 * rng.uniform(k, 2);
    const Eta1Threshold a = compute_eta1(c, l, kb), b = compute_eta1(c, l, 2 * kb);
    CHECK(b.value < a.value);
    const Eta1Threshold fine = compute_eta1(c, l, kb, 8000);
    CHECK(std::abs(fine.value - a.value) <= 1e-6 * a.value);
  }
  CHECK(compute_eta1(2.0, 10.0, 1.0).value > compute_eta1(2.0, 1.0, 1.0).value);
  CHECK_THROWS_AS(compute_eta1(2.0, 0.0, 1.0), Error);
}

TEST_CASE("K_* surrogate is the smaller of the two thresholds") {
  const Eta1Threshold e = compute_eta1(2.0, 1.0, 1.0);
  const DissipativityCert big(10.0, 1.0, 0.5, 1.0), small(1e-4, 1.0, 0.5, 1.0);
  CHECK(kstar_surrogate(e, big) == e.value);
  CHECK(kstar_surrogate(e, small) == small.interaction_budget());
}
