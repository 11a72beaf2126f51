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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "kergo/error.hpp"
#include "kergo/gaussian.hpp"
#include "kergo/rng.hpp"
#include "kergo/transport.hpp"

using namespace kergo;

namespace {

Ensemble random_ensemble(int dim, std::size_t n, std::uint64_t seed, double scale = 1.0) {
  const CounterRng rng(seed, StreamPurpose::kSampling);
  Mat pts(2 * dim, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    rng.normals(i, 0, {pts.col(static_cast<Eigen::Index>(i)).data(), static_cast<std::size_t>(2 * dim)});
  }
  return Ensemble(dim, scale * pts);
}

// Integer-valued costs make ties common, which stresses degenerate pivots.
CostMatrix integer_costs(int n, int m, std::uint64_t seed, int range) {
  const CounterRng rng(seed);
  CostMatrix c;
  c.rows = n;
  c.cols = m;
  c.c.resize(static_cast<std::size_t>(n) * m);
  for (std::size_t k = 0; k < c.c.size(); ++k) c.c[k] = std::floor(range * rng.uniform(k, 0));
  return c;
}

double brute_force_assignment(const CostMatrix& c) {
  std::vector<int> perm(static_cast<std::size_t>(c.rows));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (int i = 0; i < c.rows; ++i) s += c(i, perm[i]);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// O(n^3) Hungarian method with row/column potentials (textbook form).
double hungarian(const CostMatrix& c) {
  const int n = c.rows;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = c(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  double total = 0.0;
  for (int j = 1; j <= n; ++j) total += c(p[j] - 1, j - 1);
  return total;
}

// Checks the plan is a coupling of the uniform marginals.
void check_marginals(const TransportResult& r, int n, int m) {
  std::vector<double> row(n, 0.0), col(m, 0.0);
  for (const auto& e : r.plan) {
    CHECK(e.mass > 0.0);
    row[e.source] += e.mass;
    col[e.sink] += e.mass;
  }
  for (double s : row) CHECK(s == doctest::Approx(1.0 / n).epsilon(1e-12));
  for (double s : col) CHECK(s == doctest::Approx(1.0 / m).epsilon(1e-12));
}

// Transport LP on n x m by brute force: replicate each source m times and
// each sink n times, then solve the n m assignment.
double replicated_lp(const CostMatrix& c) {
  const int k = c.rows * c.cols;
  CostMatrix big;
  big.rows = big.cols = k;
  big.c.resize(static_cast<std::size_t>(k) * k);
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) big.c[static_cast<std::size_t>(a) * k + b] = c(a / c.cols, b / c.rows);
  return hungarian(big) / k;
}

}  // namespace

TEST_CASE("assignment matches brute force over all permutations for n <= 8") {
  for (int n = 1; n <= 8; ++n) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      const CostMatrix c = CostMatrix::squared_distances(random_ensemble(1, n, 10 * n + seed),
                                                         random_ensemble(1, n, 1000 + 10 * n + seed));
      const AssignmentResult r = solve_assignment(c);
      CHECK(r.total_cost == doctest::Approx(brute_force_assignment(c)).epsilon(1e-12));
      std::vector<int> seen(r.row_to_col);
      std::sort(seen.begin(), seen.end());
      for (int i = 0; i < n; ++i) CHECK(seen[i] == i);
    }
  }
}

TEST_CASE("assignment matches brute force on tie-heavy integer costs") {
  for (int n = 2; n <= 8; ++n) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const CostMatrix c = integer_costs(n, n, 77 * n + seed, 4);
      CHECK(solve_assignment(c).total_cost == brute_force_assignment(c));
    }
  }
}

TEST_CASE("assignment matches the Hungarian oracle on larger instances") {
  for (int n : {16, 50, 200, 500}) {
    const CostMatrix c = CostMatrix::squared_distances(random_ensemble(2, n, n), random_ensemble(2, n, n + 1));
    CHECK(solve_assignment(c).total_cost == doctest::Approx(hungarian(c)).epsilon(1e-12));
    const CostMatrix ci = integer_costs(n, n, 3 * n, 10);
    CHECK(solve_assignment(ci).total_cost == hungarian(ci));
  }
}

TEST_CASE("network simplex matches assignment on square problems to 1e-9") {
  for (int n : {2, 3, 7, 40, 150}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const CostMatrix c =
          CostMatrix::squared_distances(random_ensemble(1, n, 5 * n + seed), random_ensemble(1, n, 9 * n + seed));
      const TransportResult t = solve_transport(c);
      const double lap = solve_assignment(c).total_cost / n;
      CHECK(std::abs(t.total_cost - lap) <= 1e-9);
      check_marginals(t, n, n);
      const CostMatrix ci = integer_costs(n, n, 11 * n + seed, 3);
      CHECK(std::abs(solve_transport(ci).total_cost - solve_assignment(ci).total_cost / n) <= 1e-9);
    }
  }
}

TEST_CASE("network simplex matches the replicated assignment LP on rectangular problems") {
  const int shapes[][2] = {{1, 1}, {1, 5}, {4, 1}, {2, 3}, {3, 2}, {4, 6}, {5, 3}, {6, 7}};
  for (const auto& s : shapes) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const CostMatrix c = CostMatrix::squared_distances(random_ensemble(1, s[0], 31 * seed + s[0]),
                                                         random_ensemble(1, s[1], 37 * seed + s[1] + 100));
      const TransportResult t = solve_transport(c);
      CHECK(t.total_cost == doctest::Approx(replicated_lp(c)).epsilon(1e-10));
      check_marginals(t, s[0], s[1]);
      const CostMatrix ci = integer_costs(s[0], s[1], 41 * seed + s[0] * 7 + s[1], 3);
      const TransportResult ti = solve_transport(ci);
      CHECK(ti.total_cost == doctest::Approx(replicated_lp(ci)).epsilon(1e-10));
      check_marginals(ti, s[0], s[1]);
    }
  }
}

TEST_CASE("w2_empirical: identical point sets in any order give zero") {
  const Ensemble a = random_ensemble(2, 100, 1);
  Mat shuffled = a.points();
  for (Eigen::Index i = 0; i < shuffled.cols(); ++i) shuffled.col(i) = a.points().col((i * 37) % 100);
  CHECK(w2_empirical(a, Ensemble(2, shuffled)) == 0.0);
  CHECK(w2_empirical_general(a, Ensemble(2, shuffled)) == doctest::Approx(0.0));
}

TEST_CASE("w2_empirical: singletons give the Euclidean distance") {
  const PhasePoint z(Vec::Constant(2, 1.0), Vec::Constant(2, -2.0));
  const PhasePoint zb(Vec::Constant(2, 0.0), Vec::Constant(2, 1.0));
  const double expect = (z.stacked() - zb.stacked()).norm();
  CHECK(w2_empirical(Ensemble::point_mass(z), Ensemble::point_mass(zb)) == doctest::Approx(expect).epsilon(1e-15));
  CHECK(w2_empirical_general(Ensemble::point_mass(z), Ensemble::point_mass(zb)) ==
        doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("w2_empirical matches the square root of the brute-force optimum") {
  for (int n = 1; n <= 7; ++n) {
    const Ensemble a = random_ensemble(1, n, 500 + n), b = random_ensemble(1, n, 600 + n);
    const double oracle = std::sqrt(brute_force_assignment(CostMatrix::squared_distances(a, b)) / n);
    CHECK(w2_empirical(a, b) == doctest::Approx(oracle).epsilon(1e-12));
  }
}

TEST_CASE("w2_empirical rejects unequal counts and mismatched dimensions") {
  const Ensemble a = random_ensemble(1, 5, 1), b = random_ensemble(1, 6, 2);
  try {
    (void)w2_empirical(a, b);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnequalCounts);
    CHECK(e.detail()["alternative"] == "w2_empirical_general");
  }
  CHECK_THROWS_AS((void)w2_empirical(a, random_ensemble(2, 5, 3)), Error);
}

TEST_CASE("w2_empirical_general: point mass against an ensemble is the RMS distance") {
  const PhasePoint z(Vec::Constant(1, 0.5), Vec::Constant(1, -0.25));
  const Ensemble b = random_ensemble(1, 37, 9);
  double ms = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) ms += (b.point(i) - z.stacked()).squaredNorm();
  const double expect = std::sqrt(ms / 37.0);
  CHECK(w2_empirical_general(Ensemble::point_mass(z), b) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(w2_empirical_general(b, Ensemble::point_mass(z)) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("w2_empirical_general: size cap is a structured error") {
  const Ensemble a = random_ensemble(1, 4000, 1), b = random_ensemble(1, 2501, 2);
  try {
    (void)w2_empirical_general(a, b);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSizeCap);
    CHECK(std::string(e.what()).find("subsample") != std::string::npos);
  }
}

TEST_CASE("w2_empirical is bit-exactly symmetric") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Ensemble a = random_ensemble(2, 64, seed), b = random_ensemble(2, 64, seed + 50);
    CHECK(w2_empirical(a, b) == w2_empirical(b, a));
    const Ensemble c = random_ensemble(2, 23, seed + 90);
    CHECK(w2_empirical_general(a, c) == w2_empirical_general(c, a));
  }
}

TEST_CASE("triangle inequality and permutation invariance") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Ensemble a = random_ensemble(1, 40, seed), b = random_ensemble(1, 40, seed + 100, 2.0),
                   c = random_ensemble(1, 40, seed + 200, 0.5);
    CHECK(w2_empirical(a, c) <= w2_empirical(a, b) + w2_empirical(b, c) + 1e-9);
    const Mat rev = a.points().rowwise().reverse();
    const double base = w2_empirical(a, b);
    CHECK(w2_empirical(Ensemble(1, rev), b) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("scaling all points by s scales W2 by |s|") {
  const Ensemble a = random_ensemble(2, 50, 4), b = random_ensemble(2, 50, 5);
  const double base = w2_empirical(a, b);
  for (double s : {-3.0, -0.5, 0.1, 2.0, 10.0}) {
    CHECK(w2_empirical(Ensemble(2, s * a.points()), Ensemble(2, s * b.points())) ==
          doctest::Approx(std::abs(s) * base).epsilon(1e-12));
  }
}

TEST_CASE("empirical W2 between Gaussian samples is within 5% of the closed form") {
  Vec m1 = Vec::Zero(4), m2(4);
  m2 << 2.0, -1.0, 0.5, 1.0;
  Mat c1 = Mat::Identity(4, 4), c2(4, 4);
  c2.setZero();
  c2.diagonal() << 2.0, 0.5, 1.5, 1.0;
  c2(0, 1) = c2(1, 0) = 0.3;
  const GaussianLaw p(m1, c1), q(m2, c2);
  const double exact = w2_gaussian(p, q);
  const Ensemble a = p.sample(2048, 1), b = q.sample(2048, 2);
  const double lap = w2_empirical(a, b);
  INFO("exact " << exact << " empirical " << lap);
  CHECK(std::abs(lap - exact) <= 0.05 * exact);
  const double ns = w2_empirical_general(a, b);
  CHECK(std::abs(ns - lap) <= 1e-9);
}

TEST_CASE("w2_to_reference: reused sample gives zero; point-mass reference gives RMS distance") {
  const Ensemble a = random_ensemble(1, 30, 8);
  const W2Estimate same = w2_to_reference(a, [&](std::size_t, std::uint64_t) { return a; }, 0, 3);
  for (double v : same.replicates) CHECK(v == 0.0);
  CHECK(same.mean == 0.0);

  const PhasePoint z(Vec::Constant(1, 1.0), Vec::Constant(1, 2.0));
  const W2Estimate pm = w2_to_reference(
      a, [&](std::size_t n, std::uint64_t) { return Ensemble(1, z.stacked().replicate(1, static_cast<Eigen::Index>(n))); },
      0, 2);
  double ms = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ms += (a.point(i) - z.stacked()).squaredNorm();
  CHECK(pm.mean == doctest::Approx(std::sqrt(ms / 30.0)).epsilon(1e-12));
  CHECK(pm.stderr_mean == doctest::Approx(0.0));
}

TEST_CASE("w2_to_reference: squared distance of a self-sample scales like N^(-1/2)") {
  const GaussianLaw law(Vec::Zero(2), Mat::Identity(2, 2));
  std::vector<double> logn, logw;
  for (std::size_t n = 64; n <= 4096; n *= 2) {
    const std::size_t reps = n <= 512 ? 32 : (n <= 1024 ? 8 : 4);
    double acc = 0.0;
    const std::size_t outer = n <= 512 ? 8 : (n <= 1024 ? 2 : 1);
    for (std::size_t k = 0; k < outer; ++k) {
      const Ensemble ak = law.sample(n, 9000 + 31 * n + k);
      const W2Estimate e = w2_to_reference(
          ak, [&](std::size_t m, std::uint64_t r) { return law.sample(m, 100000 + 97 * n + 13 * k + r); }, 0, reps);
      acc += e.mean_sq;
    }
    logn.push_back(std::log(static_cast<double>(n)));
    logw.push_back(std::log(acc / static_cast<double>(outer)));
  }
  const double mx = std::accumulate(logn.begin(), logn.end(), 0.0) / logn.size();
  const double my = std::accumulate(logw.begin(), logw.end(), 0.0) / logw.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < logn.size(); ++i) {
    sxy += (logn[i] - mx) * (logw[i] - my);
    sxx += (logn[i] - mx) * (logn[i] - mx);
  }
  const double slope = sxy / sxx;
  INFO("fitted log-log slope " << slope);
  CHECK(slope >= -0.65);
  CHECK(slope <= -0.35);
}

TEST_CASE("assignment on 4096 points finishes in reasonable time") {
  const Ensemble a = random_ensemble(1, 4096, 1), b = random_ensemble(1, 4096, 2);
  const auto t0 = std::chrono::steady_clock::now();
  const double w = w2_empirical(a, b);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  INFO("seconds " << secs);
  CHECK(std::isfinite(w));
  CHECK(secs < 60.0);
}
