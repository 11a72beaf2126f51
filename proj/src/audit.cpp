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

#include "kergo/audit.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "kergo/error.hpp"
#include "kergo/rng.hpp"

namespace kergo {

nlohmann::json ProbeDesign::to_json() const {
  return {{"probes_per_set", probes_per_set}, {"sets", sets}, {"mean_scale", mean_scale},
          {"cov_scale", cov_scale}, {"seed", seed}};
}

namespace {

Mat symmetric_exp(const Mat& s) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(s);
  return eig.eigenvectors() * eig.eigenvalues().array().exp().matrix().asDiagonal() * eig.eigenvectors().transpose();
}

// Pairs where W2 is this small are treated as coincident.
constexpr double kCoincident = 1e-24;
// The ascent keeps |theta| at or above this radius; the best constant is
// often approached as nu -> mu, where the ratio itself loses precision.
constexpr double kMinProbeRadius = 1e-3;
constexpr std::size_t kAscentStarts = 16;

Mat symmetric_log(const Mat& s) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(s);
  return eig.eigenvectors() * eig.eigenvalues().array().log().matrix().asDiagonal() * eig.eigenvectors().transpose();
}

// Probe laws in whitened coordinates: nu = N(mean + R m, R exp(H) R) with
// R = S^{1/2}, packed as theta = (m, upper triangle of H).
struct ProbeChart {
  const GaussianLaw& mu;
  Mat root, root_inv;
  int p;

  explicit ProbeChart(const GaussianLaw& law)
      : mu(law), root(psd_sqrt(law.cov)), root_inv(root.inverse()), p(law.size()) {}

  std::size_t size() const { return static_cast<std::size_t>(p + p * (p + 1) / 2); }

  Vec encode(const GaussianLaw& nu) const {
    Vec theta(size());
    theta.head(p) = root_inv * (nu.mean - mu.mean);
    const Mat h = symmetric_log(root_inv * nu.cov * root_inv.transpose());
    Eigen::Index k = p;
    for (int r = 0; r < p; ++r)
      for (int c = r; c < p; ++c) theta(k++) = h(r, c);
    return theta;
  }

  GaussianLaw decode(const Vec& theta) const {
    Mat h(p, p);
    Eigen::Index k = p;
    for (int r = 0; r < p; ++r)
      for (int c = r; c < p; ++c) h(r, c) = h(c, r) = theta(k++);
    return GaussianLaw(mu.mean + root * theta.head(p), root * symmetric_exp(h) * root);
  }
};

// Ent(P_t nu | mu) / W2(nu, mu)^2, or -inf where the ratio is ill-conditioned.
double entropy_ratio(const LinearModel& model, const GaussianLaw& mu, const GaussianLaw& nu, double t) {
  const double w = w2_gaussian(nu, mu);
  if (!(w * w > kCoincident)) return -INFINITY;
  return kl_gaussian(transition_law(model, nu, t), mu) / (w * w);
}

// Compass search from `start`: try +-step on each coordinate and a radial
// rescaling of theta, keep any improvement, halve the step when none helps.
// Trials inside the minimum radius are pushed back onto it, so the search
// can still turn once it reaches the small-perturbation regime.
double ascend_ratio(const LinearModel& model, const ProbeChart& chart, const GaussianLaw& start, double t) {
  const auto clamp = [](Vec v) {
    const double n = v.norm();
    return n < kMinProbeRadius && n > 0.0 ? Vec(v * (kMinProbeRadius / n)) : v;
  };
  Vec theta = clamp(chart.encode(start));
  double best = entropy_ratio(model, chart.mu, chart.decode(theta), t);
  double step = 0.25;
  int evals = 0;
  while (step > 1e-7 && evals < 20000) {
    bool moved = false;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      for (double sign : {1.0, -1.0}) {
        Vec trial = theta;
        trial(k) += sign * step;
        trial = clamp(trial);
        const double r = entropy_ratio(model, chart.mu, chart.decode(trial), t);
        ++evals;
        if (r > best) {
          best = r;
          theta = trial;
          moved = true;
          break;
        }
      }
    }
    for (double sign : {1.0, -1.0}) {
      const Vec trial = clamp(theta * (1.0 + sign * step));
      const double r = entropy_ratio(model, chart.mu, chart.decode(trial), t);
      ++evals;
      if (r > best) {
        best = r;
        theta = trial;
        moved = true;
        break;
      }
    }
    if (!moved) step *= 0.5;
  }
  return best;
}

}  // namespace

std::vector<std::vector<GaussianLaw>> random_probe_sets(const GaussianLaw& invariant, const ProbeDesign& design) {
  require(design.probes_per_set >= 1 && design.sets >= 1, ErrorCode::kInvalidArgument, "need at least one probe");
  const int p = invariant.size();
  const Mat root = psd_sqrt(invariant.cov);
  const CounterRng rng(design.seed, StreamPurpose::kProbe);
  std::vector<std::vector<GaussianLaw>> sets(design.sets);
  for (std::size_t s = 0; s < design.sets; ++s) {
    for (std::size_t i = 0; i < design.probes_per_set; ++i) {
      RngCursor cur(rng, s * design.probes_per_set + i);
      Vec xi(p);
      for (int k = 0; k < p; ++k) xi(k) = cur.normal();
      Mat g(p, p);
      for (int r = 0; r < p; ++r)
        for (int c = 0; c < p; ++c) g(r, c) = cur.normal();
      const Mat cov = root * symmetric_exp(design.cov_scale * (g + g.transpose())) * root;
      sets[s].emplace_back(invariant.mean + design.mean_scale * root * xi, cov);
    }
  }
  return sets;
}

nlohmann::json AuditReport::to_json() const {
  return {{"t_probe", t_probe},
          {"poincare_constant", poincare},
          {"probes", probes},
          {"talagrand_violations", talagrand_violations},
          {"talagrand_worst_ratio", talagrand_worst_ratio},
          {"c1_probe_max_per_set", c1_probe_max_per_set},
          {"c1_per_set", c1_per_set},
          {"c1", c1},
          {"c1_spread", c1_spread},
          {"identity_zero", identity_zero}};
}

AuditReport talagrand_harnack_audit(const LinearModel& model, double t_probe,
                                    const std::vector<std::vector<GaussianLaw>>& probe_sets) {
  require(t_probe > 0.0, ErrorCode::kInvalidArgument, "t_probe must be > 0");
  const GaussianLaw mu = invariant_law(model);
  AuditReport rep;
  rep.t_probe = t_probe;
  rep.poincare = poincare_constant(mu);
  rep.identity_zero = std::pow(w2_gaussian(mu, mu), 2) < 1e-12 && std::abs(kl_gaussian(mu, mu)) < 1e-12 &&
                      std::abs(kl_gaussian(transition_law(model, mu, t_probe), mu)) < 1e-9;
  const ProbeChart chart(mu);
  for (const auto& set : probe_sets) {
    double best = 0.0;
    std::vector<std::pair<double, const GaussianLaw*>> ranked;
    for (const GaussianLaw& nu : set) {
      const double w = w2_gaussian(nu, mu);
      const double w2 = w * w;
      const double ent = kl_gaussian(nu, mu);
      ++rep.probes;
      const double rhs = 4.0 * rep.poincare * ent;
      if (w2 > rhs * (1.0 + 1e-12) + 1e-15) ++rep.talagrand_violations;
      if (w2 > kCoincident) {
        rep.talagrand_worst_ratio = std::max(rep.talagrand_worst_ratio, rhs > 0.0 ? w2 / rhs : INFINITY);
        const double r = kl_gaussian(transition_law(model, nu, t_probe), mu) / w2;
        best = std::max(best, r);
        ranked.emplace_back(r, &nu);
      }
    }
    rep.c1_probe_max_per_set.push_back(best);
    // The ratio has several local maxima, so ascend from the leading probes.
    const std::size_t starts = std::min(ranked.size(), kAscentStarts);
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(starts), ranked.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first; });
    double refined = best;
    for (std::size_t k = 0; k < starts; ++k)
      refined = std::max(refined, ascend_ratio(model, chart, *ranked[k].second, t_probe));
    rep.c1_per_set.push_back(refined);
  }
  if (!rep.c1_per_set.empty()) {
    std::vector<double> sorted = rep.c1_per_set;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    rep.c1 = sorted.back();
    for (double c : rep.c1_per_set) rep.c1_spread = std::max(rep.c1_spread, std::abs(c / median - 1.0));
  }
  return rep;
}

AuditReport talagrand_harnack_audit(const LinearModel& model, double t_probe, const ProbeDesign& design) {
  return talagrand_harnack_audit(model, t_probe, random_probe_sets(invariant_law(model), design));
}

}  // namespace kergo
