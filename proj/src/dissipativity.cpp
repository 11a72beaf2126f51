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

#include "kergo/dissipativity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "kergo/error.hpp"
#include "kergo/parallel.hpp"
#include "kergo/rng.hpp"

namespace kergo {

std::string to_string(CertStatus status) {
  switch (status) {
    case CertStatus::kUnchecked: return "unchecked";
    case CertStatus::kCertifiedBySampling: return "certified-by-sampling";
    case CertStatus::kFalsified: return "falsified";
    case CertStatus::kAnalytic: return "analytic";
  }
  return "unknown";
}

DissipativityCert::DissipativityCert(double theta_, double r_, double r0_, double radius_)
    : theta(theta_), r(r_), r0(r0_), radius(radius_) {
  require(std::isfinite(theta) && theta > 0.0, ErrorCode::kInvalidArgument, "cert needs theta > 0");
  require(std::isfinite(r) && r > 0.0, ErrorCode::kInvalidArgument, "cert needs r > 0");
  require(std::isfinite(r0) && r0 > -1.0 && r0 < 1.0, ErrorCode::kInvalidArgument, "cert needs r0 in (-1, 1)");
  require(std::isfinite(radius) && radius > 0.0, ErrorCode::kInvalidArgument, "cert needs R > 0");
}

DissipativityCert DissipativityCert::with_theta(double t) const { return {t, r, r0, radius}; }

double DissipativityCert::interaction_budget() const { return theta / (1.0 + std::abs(r * r0)); }

namespace {

nlohmann::json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

nlohmann::json witness_json(const Witness& w) {
  return {{"z", vec_json(w.z)}, {"zbar", vec_json(w.zbar)}, {"lhs", w.lhs},
          {"threshold", w.threshold}, {"trial", w.trial}, {"probe", w.probe}};
}

}  // namespace

nlohmann::json DissipativityCert::to_json() const {
  nlohmann::json j = {{"theta", theta}, {"r", r}, {"r0", r0}, {"R", radius}, {"status", kergo::to_string(status)}};
  if (witness) j["witness"] = witness_json(*witness);
  return j;
}

nlohmann::json PatdiVerdict::to_json() const {
  nlohmann::json j = {{"holds", holds},       {"trials", trials},           {"worst_margin", worst_margin},
                      {"sample_rate", sample_rate}, {"tested_theta", tested_theta}, {"probes", probes}};
  if (witness) j["witness"] = witness_json(*witness);
  return j;
}

double patdi_lhs(const DriftSpec& drift, double r, double r0, const ConstVecRef& z, const ConstVecRef& zbar,
                 const MeasureSummary* mu) {
  const int d = drift.dim();
  Vec b(d), bb(d);
  drift.eval_into(z, mu, b);
  drift.eval_into(zbar, mu, bb);
  const auto u = z.head(d) - zbar.head(d);
  const auto v = z.tail(d) - zbar.tail(d);
  return (r * r * u + r * r0 * v).dot(v) + (v + r * r0 * u).dot(b - bb);
}

namespace {

struct Sampler {
  CounterRng rng;
  int len;        // length of the sampled vectors
  double lo, hi;  // |dz| range
  double ball;    // radius of the base-point ball
  std::size_t trials;

  // Base point uniform in the ball, direction uniform on the sphere,
  // magnitude log-uniform within the trial's stratum.
  void draw(std::size_t i, Vec& z, Vec& zbar) const {
    Vec base(len), dir(len);
    rng.normals(i, 0, {base.data(), static_cast<std::size_t>(len)});
    rng.normals(i, 1, {dir.data(), static_cast<std::size_t>(len)});
    double u[2];
    rng.uniforms(i, 2, {u, 2});
    const double bn = base.norm();
    const double radial = ball * std::pow(u[0], 1.0 / len);
    z = bn > 0 ? Vec(base * (radial / bn)) : Vec::Zero(len);
    const double frac = (static_cast<double>(i) + u[1]) / static_cast<double>(trials);
    const double mag = lo * std::pow(hi / lo, frac);
    const double dn = dir.norm();
    zbar = z + dir * (mag / (dn > 0 ? dn : 1.0));
  }
};

struct Probe {
  std::string name;
  std::optional<Ensemble> measure;
};

// Point mass at the origin, a standard Gaussian sample and a heavy-tailed
// (Student t, 3 degrees of freedom) sample.
std::vector<Probe> probe_measures(int d, std::uint64_t seed) {
  const CounterRng rng(seed, StreamPurpose::kProbe);
  const std::size_t n = 64;
  Mat gauss(2 * d, n), heavy(2 * d, n);
  for (std::size_t i = 0; i < n; ++i) {
    rng.normals(1000 + i, 0, {gauss.col(i).data(), static_cast<std::size_t>(2 * d)});
    Vec g(2 * d), chi(3 * 2 * d);
    rng.normals(2000 + i, 0, {g.data(), static_cast<std::size_t>(2 * d)});
    rng.normals(2000 + i, 1, {chi.data(), static_cast<std::size_t>(chi.size())});
    for (int k = 0; k < 2 * d; ++k) {
      const double c = chi.segment(3 * k, 3).squaredNorm() / 3.0;
      heavy(k, i) = g(k) / std::sqrt(c);
    }
  }
  std::vector<Probe> out;
  out.push_back({"point-mass", Ensemble(d, Mat::Zero(2 * d, 1))});
  out.push_back({"gaussian", Ensemble(d, gauss)});
  out.push_back({"heavy-tailed", Ensemble(d, heavy)});
  return out;
}

// Rounding slack on the normalized margin; tight certs sit exactly at 0.
constexpr double kMarginTolerance = 1e-12;

struct TrialOutcome {
  double margin;  // (lhs + theta |dz|^2) / |dz|^2
  double rate;    // -lhs / |dz|^2
  double lhs;
};

template <typename Eval>
void run_trials(const Sampler& sampler, double theta, const std::string& probe, Eval&& lhs_of,
                PatdiVerdict& verdict) {
  const std::size_t n = sampler.trials;
  std::vector<TrialOutcome> outcome(n);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    Vec z, zbar;
    for (std::size_t i = begin; i < end; ++i) {
      sampler.draw(i, z, zbar);
      const double dz2 = (z - zbar).squaredNorm();
      const double lhs = lhs_of(z, zbar);
      outcome[i] = {(lhs + theta * dz2) / dz2, -lhs / dz2, lhs};
    }
  });
  for (std::size_t i = 0; i < n; ++i) {
    verdict.worst_margin = std::max(verdict.worst_margin, outcome[i].margin);
    verdict.sample_rate = std::min(verdict.sample_rate, outcome[i].rate);
    if (outcome[i].margin > kMarginTolerance && !verdict.witness) {
      Vec z, zbar;
      sampler.draw(i, z, zbar);
      verdict.holds = false;
      verdict.witness = Witness{z, zbar, outcome[i].lhs, -theta * (z - zbar).squaredNorm(), i, probe};
    }
  }
  verdict.trials += n;
}

Sampler make_sampler(const DissipativityCert& cert, const PatdiOptions& options, int len, double scale) {
  const double rmax = options.rmax > 0.0 ? options.rmax : 100.0 * cert.radius;
  if (!(rmax > cert.radius)) {
    throw Error(ErrorCode::kDegenerateSampling, "sampling needs rmax > R",
                {{"R", cert.radius}, {"rmax", rmax}});
  }
  require(options.trials >= 1, ErrorCode::kInvalidArgument, "at least one trial is required");
  return {CounterRng(options.seed, StreamPurpose::kProbe), len, scale * cert.radius, scale * rmax, scale * rmax,
          options.trials};
}

}  // namespace

PatdiVerdict check_patdi(const DriftSpec& drift, const DissipativityCert& cert, const Ensemble* mu,
                         const PatdiOptions& options) {
  const int d = drift.dim();
  const Sampler sampler = make_sampler(cert, options, 2 * d, 1.0);
  PatdiVerdict verdict;
  verdict.tested_theta = cert.theta;

  std::vector<Probe> probes;
  if (!drift.has_interaction()) {
    probes.push_back({"none", std::nullopt});
  } else if (mu) {
    require(mu->dim() == d, ErrorCode::kDimensionMismatch, "measure dimension differs from drift");
    probes.push_back({"supplied", *mu});
  } else {
    probes = probe_measures(d, options.seed);
  }
  for (const auto& probe : probes) {
    std::optional<MeasureSummary> summary;
    if (probe.measure) summary = MeasureSummary::of(*probe.measure);
    const MeasureSummary* ms = summary ? &*summary : nullptr;
    run_trials(sampler, cert.theta, probe.name,
               [&](const Vec& z, const Vec& zbar) { return patdi_lhs(drift, cert.r, cert.r0, z, zbar, ms); },
               verdict);
    verdict.probes.push_back(probe.name);
  }
  return verdict;
}

PatdiVerdict check_patdi_system(const DriftSpec& drift, const DissipativityCert& cert, std::size_t particles,
                                const PatdiOptions& options) {
  require(particles >= 1, ErrorCode::kInvalidArgument, "particle count must be >= 1");
  const double theta_eff = cert.theta - drift.ki() * (1.0 + std::abs(cert.r * cert.r0));
  if (theta_eff <= 1e-12 * cert.theta) {
    throw Error(ErrorCode::kInteractionBudgetExhausted, "interaction budget exhausted: theta_eff <= 0",
                {{"theta", cert.theta}, {"K_I", drift.ki()}, {"theta_eff", theta_eff}});
  }
  const int d = drift.dim();
  const int len = static_cast<int>(2 * d * particles);
  const Sampler sampler = make_sampler(cert, options, len, std::sqrt(static_cast<double>(particles)));
  const SystemDrift system = drift.lift(particles);
  PatdiVerdict verdict;
  verdict.tested_theta = theta_eff;
  const double r = cert.r, rr0 = cert.r * cert.r0;
  run_trials(sampler, theta_eff, "empirical",
             [&](const Vec& z, const Vec& zbar) {
               const Vec db = system.eval(z) - system.eval(zbar);
               double lhs = 0.0;
               for (std::size_t i = 0; i < particles; ++i) {
                 const auto off = static_cast<Eigen::Index>(2 * d * i);
                 const auto u = z.segment(off, d) - zbar.segment(off, d);
                 const auto v = z.segment(off + d, d) - zbar.segment(off + d, d);
                 lhs += (r * r * u + rr0 * v).dot(v) + (v + rr0 * u).dot(db.segment(d * i, d));
               }
               return lhs;
             },
             verdict);
  verdict.probes.push_back("empirical");
  return verdict;
}

double linear_patdi_rate(const DriftSpec& drift, double r, double r0) {
  require(drift.is_linear(), ErrorCode::kInvalidArgument, "analytic rate needs a linear drift");
  const int d = drift.dim();
  const Mat& a = drift.linear_position();
  const double g = drift.friction();
  const Mat id = Mat::Identity(d, d);
  Mat k(2 * d, 2 * d);
  k << -r * r0 * a, (r * r - r * r0 * g) * id, -a, (r * r0 - g) * id;
  const Mat s = 0.5 * (k + k.transpose());
  return -Eigen::SelfAdjointEigenSolver<Mat>(s).eigenvalues().maxCoeff();
}

SearchGrid SearchGrid::standard() {
  SearchGrid g;
  g.r = {0.25, 0.5, 1.0, 1.5, 2.0};
  g.r0 = {-0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75};
  g.radius = {0.5, 1.0, 2.0, 5.0};
  g.options.trials = 2000;
  return g;
}

nlohmann::json SearchGrid::to_json() const {
  return {{"r", r}, {"r0", r0}, {"R", radius}, {"trials", options.trials}, {"rmax", options.rmax},
          {"seed", options.seed}};
}

SearchResult search_cert(const DriftSpec& drift, const SearchGrid& grid, const Ensemble* mu) {
  require(!grid.r.empty() && !grid.r0.empty() && !grid.radius.empty(), ErrorCode::kInvalidArgument,
          "search grid is empty");
  SearchResult result;
  for (double radius : grid.radius) {
    for (double r : grid.r) {
      for (double r0 : grid.r0) {
        ++result.evaluated;
        // Probe with a token theta to obtain the sample rate.
        const DissipativityCert probe(1.0, r, r0, radius);
        const PatdiVerdict pv = check_patdi(drift, probe, mu, grid.options);
        const double theta = kSearchSafety * pv.sample_rate;
        if (!(theta > 0.0)) {
          ++result.falsified;
          continue;
        }
        if (result.cert && theta <= result.cert->theta) continue;
        DissipativityCert cert(theta, r, r0, radius);
        const PatdiVerdict again = check_patdi(drift, cert, mu, grid.options);
        if (!again.holds) {
          ++result.falsified;
          continue;
        }
        cert.status = (drift.is_linear() && theta <= linear_patdi_rate(drift, r, r0))
                          ? CertStatus::kAnalytic
                          : CertStatus::kCertifiedBySampling;
        result.cert = cert;
      }
    }
  }
  return result;
}

nlohmann::json Eta1Threshold::to_json() const {
  return {{"eta1", value}, {"minimizer_t", minimizer_t}, {"log_min", log_min},
          {"c_tilde", c_tilde}, {"lambda", lambda}, {"K_b", kb}};
}

namespace {

// log g at t = t0 + u, with 1 - c e^{-lambda t} = -expm1(-lambda u).
double log_g_shifted(double u, double t0, double lambda, double kb) {
  const double t = t0 + u;
  return (1.0 + kb) * t + 0.5 * std::log(t) - std::log(-std::expm1(-lambda * u));
}

}  // namespace

double eta1_log_objective(double t, double c_tilde, double lambda, double kb) {
  const double t0 = std::log(c_tilde) / lambda;
  if (!(t > std::max(t0, 0.0))) return std::numeric_limits<double>::infinity();
  return log_g_shifted(t - t0, t0, lambda, kb);
}

Eta1Threshold compute_eta1(double c_tilde, double lambda, double kb, std::size_t grid_points) {
  require(std::isfinite(lambda) && lambda > 0.0, ErrorCode::kInvalidArgument, "lambda must be > 0");
  require(std::isfinite(c_tilde) && c_tilde >= 1.0, ErrorCode::kInvalidArgument, "c_tilde must be >= 1");
  require(std::isfinite(kb) && kb >= 0.0, ErrorCode::kInvalidArgument, "K_b must be >= 0");
  require(grid_points >= 16, ErrorCode::kInvalidArgument, "eta1 grid needs at least 16 points");
  const double t0 = std::log(c_tilde) / lambda;
  // Natural scale of the problem; the minimizer sits well inside [1e-9, 1e3] of it.
  const double scale = 1.0 / (lambda + 1.0 + kb);
  const double lo = std::log(1e-9 * scale), hi = std::log(1e3 * (scale + t0));
  std::vector<double> us(grid_points), vals(grid_points);
  std::size_t best = 0;
  for (std::size_t i = 0; i < grid_points; ++i) {
    us[i] = std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid_points - 1));
    vals[i] = log_g_shifted(us[i], t0, lambda, kb);
    if (vals[i] < vals[best]) best = i;
  }
  double a = us[best == 0 ? 0 : best - 1];
  double b = us[std::min(best + 1, grid_points - 1)];
  if (best == 0) a = 0.5 * us[0];
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a), e = a + inv_phi * (b - a);
  double fc = log_g_shifted(c, t0, lambda, kb), fe = log_g_shifted(e, t0, lambda, kb);
  for (int it = 0; it < 200 && (b - a) > 1e-14 * std::max(1.0, b); ++it) {
    if (fc < fe) {
      b = e, e = c, fe = fc;
      c = b - inv_phi * (b - a);
      fc = log_g_shifted(c, t0, lambda, kb);
    } else {
      a = c, c = e, fc = fe;
      e = a + inv_phi * (b - a);
      fe = log_g_shifted(e, t0, lambda, kb);
    }
  }
  const double u = 0.5 * (a + b);
  double log_min = log_g_shifted(u, t0, lambda, kb);
  double u_star = u;
  if (vals[best] < log_min) log_min = vals[best], u_star = us[best];
  if (!std::isfinite(log_min)) {
    throw Error(ErrorCode::kNonFinite, "eta1 objective has no finite minimum",
                {{"c_tilde", c_tilde}, {"lambda", lambda}, {"K_b", kb}});
  }
  return {std::exp(-log_min), t0 + u_star, log_min, c_tilde, lambda, kb};
}

double kstar_surrogate(const Eta1Threshold& eta1, const DissipativityCert& cert) {
  return std::min(eta1.value, cert.interaction_budget());
}

}  // namespace kergo
