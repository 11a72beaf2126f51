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

#include "kergo/hypo.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "kergo/error.hpp"
#include "kergo/parallel.hpp"
#include "kergo/rng.hpp"

namespace kergo {

nlohmann::json HypoConstants::to_json() const {
  return {{"K_b", kb},       {"delta1_min_eig", delta1}, {"M", m},
          {"eps", eps},      {"C_PI", c_pi},             {"eps_M_minus_delta1", velocity_coefficient()},
          {"decay_coefficient", decay_coefficient()}};
}

HypoConstants build_constants(double kb, double delta1, double c_pi) {
  require(std::isfinite(kb) && kb >= 0.0, ErrorCode::kInvalidArgument, "K_b must be >= 0");
  require(std::isfinite(delta1) && delta1 > 0.0, ErrorCode::kInvalidArgument, "delta1 must be > 0");
  require(std::isfinite(c_pi) && c_pi > 0.0, ErrorCode::kInvalidArgument, "C_PI must be > 0");
  const double s = 2.0 * kb + 1.0;
  HypoConstants c{};
  c.kb = kb;
  c.delta1 = delta1;
  c.m = 2.0 * s * s + s;
  c.eps = delta1 / (c.m + 0.5);
  c.c_pi = c_pi;
  return c;
}

HypoWeight build_weight(const HypoConstants& consts, int dim, double t) {
  require(std::isfinite(t) && t >= 0.0, ErrorCode::kInvalidArgument, "weight time must be >= 0");
  require(dim >= 1, ErrorCode::kInvalidArgument, "dimension must be >= 1");
  HypoWeight w;
  w.t = t;
  w.alpha = -std::expm1(-t / 3.0);
  w.alpha_rate = std::exp(-t / 3.0) / 3.0;
  const double a = w.alpha, da = w.alpha_rate, e = consts.eps;
  const Mat id = Mat::Identity(dim, dim);
  w.g.resize(2 * dim, 2 * dim);
  w.g << e * a * a * a * id, -e * a * a * id, -e * a * a * id, e * a * id;
  w.g_rate.resize(2 * dim, 2 * dim);
  w.g_rate << 3.0 * e * a * a * da * id, -2.0 * e * a * da * id, -2.0 * e * a * da * id, e * da * id;
  return w;
}

double alpha_sq_integral(double t) {
  require(t >= 0.0, ErrorCode::kInvalidArgument, "integration time must be >= 0");
  // int (1 - 2 e^{-s/3} + e^{-2s/3}) ds
  return t + 6.0 * std::expm1(-t / 3.0) - 1.5 * std::expm1(-2.0 * t / 3.0);
}

double functional_decay_bound(const HypoConstants& consts, double t, double n0) {
  return std::exp(-consts.decay_coefficient() * alpha_sq_integral(t)) * n0;
}

Mat dissipation_matrix(const HypoWeight& w, const Mat& sigma_sigma_t, const Mat& jac_x, const Mat& jac_y) {
  const Eigen::Index d = jac_x.rows();
  Mat j = Mat::Zero(2 * d, 2 * d);
  j.topRightCorner(d, d) = jac_x.transpose();
  j.bottomLeftCorner(d, d).setIdentity();
  j.bottomRightCorner(d, d) = jac_y.transpose();
  Mat r = w.g_rate + 2.0 * w.g * j;
  r.bottomRightCorner(d, d) -= sigma_sigma_t;
  return r;
}

nlohmann::json RtReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& t : times)
    rows.push_back({{"t", t.t}, {"alpha", t.alpha}, {"sampled_margin", t.sampled_margin}, {"eigen_margin", t.eigen_margin}});
  return {{"holds", holds},
          {"worst_margin", worst_margin},
          {"max_jac_x_norm", max_jac_x_norm},
          {"max_jac_y_norm", max_jac_y_norm},
          {"directions_per_time", directions},
          {"times", rows}};
}

RtReport check_rt_negativity(const DriftSpec& spec, const HypoConstants& consts, const DiffusionSpec& diff,
                             const std::vector<double>& t_grid, std::size_t z_trials, const RtOptions& opts) {
  const int d = spec.dim();
  require(diff.dim() == d, ErrorCode::kDimensionMismatch, "diffusion and drift dimensions differ");
  require(opts.states >= 1 && z_trials >= 1, ErrorCode::kInvalidArgument, "need at least one state and direction");
  if (spec.has_interaction() && !opts.mu)
    throw Error(ErrorCode::kMissingMeasure, "interacting drift needs a measure argument for its Jacobian");
  std::optional<MeasureSummary> summary;
  if (opts.mu) summary = MeasureSummary::of(*opts.mu);
  const MeasureSummary* mu = summary ? &*summary : nullptr;
  const Mat sst = diff.sigma_sigma_t(mu);
  const CounterRng rng(opts.seed, StreamPurpose::kProbe);

  RtReport report;
  report.directions = z_trials;
  std::vector<Mat> jx(opts.states, Mat(d, d)), jy(opts.states, Mat(d, d));
  const double kb_cap = consts.kb * (1.0 + 1e-12) + 1e-15;
  for (std::size_t s = 0; s < opts.states; ++s) {
    Vec z(2 * d);
    rng.normals(s, 0, {z.data(), static_cast<std::size_t>(2 * d)});
    z *= opts.state_scale;
    spec.jacobian_into(z, mu, jx[s], jy[s]);
    const double nx = Eigen::JacobiSVD<Mat>(jx[s]).singularValues()(0);
    const double ny = Eigen::JacobiSVD<Mat>(jy[s]).singularValues()(0);
    report.max_jac_x_norm = std::max(report.max_jac_x_norm, nx);
    report.max_jac_y_norm = std::max(report.max_jac_y_norm, ny);
    if (nx > kb_cap || ny > kb_cap) {
      throw Error(ErrorCode::kKbUnderdeclared, "a drift Jacobian block exceeds the declared K_b",
                  {{"state", std::vector<double>(z.data(), z.data() + z.size())},
                   {"jac_x_norm", nx},
                   {"jac_y_norm", ny},
                   {"declared_kb", consts.kb}});
    }
  }

  const double tol = kRtMarginTolerance * (1.0 + consts.delta1 + consts.eps * consts.m);
  report.worst_margin = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    const HypoWeight w = build_weight(consts, d, t_grid[k]);
    Vec bound_diag(2 * d);
    bound_diag.head(d).setConstant(-0.5 * consts.eps * w.alpha * w.alpha);
    bound_diag.tail(d).setConstant(consts.velocity_coefficient());
    RtTimeReport row{t_grid[k], w.alpha, -std::numeric_limits<double>::infinity(),
                     -std::numeric_limits<double>::infinity()};
    std::vector<Mat> r(opts.states);
    for (std::size_t s = 0; s < opts.states; ++s) {
      r[s] = dissipation_matrix(w, sst, jx[s], jy[s]);
      Mat gap = 0.5 * (r[s] + r[s].transpose());
      gap.diagonal() -= bound_diag;
      const double top = Eigen::SelfAdjointEigenSolver<Mat>(gap, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
      row.eigen_margin = std::max(row.eigen_margin, top);
    }
    Vec z(2 * d);
    for (std::size_t i = 0; i < z_trials; ++i) {
      rng.normals(1000 + i, k, {z.data(), static_cast<std::size_t>(2 * d)});
      z.normalize();
      const Mat& rs = r[i % opts.states];
      const double lhs = z.dot(rs * z);
      const double rhs = bound_diag.dot(z.cwiseProduct(z));
      row.sampled_margin = std::max(row.sampled_margin, lhs - rhs);
    }
    const double worst = std::max(row.sampled_margin, row.eigen_margin);
    report.worst_margin = std::max(report.worst_margin, worst);
    if (worst > tol) report.holds = false;
    report.times.push_back(row);
  }
  return report;
}

TestFunction TestFunction::linear(Vec v) {
  TestFunction f;
  f.name = "linear";
  f.value = [v](const Vec& z) { return v.dot(z); };
  f.gradient = [v](const Vec&) { return v; };
  return f;
}

TestFunction TestFunction::quadratic(Mat h, Vec v) {
  const Mat hs = 0.5 * (h + h.transpose());
  TestFunction f;
  f.name = "quadratic";
  f.value = [hs, v](const Vec& z) { return 0.5 * z.dot(hs * z) + v.dot(z); };
  f.gradient = [hs, v](const Vec& z) { return Vec(hs * z + v); };
  return f;
}

TestFunction TestFunction::bounded(Vec v) {
  TestFunction f;
  f.name = "bounded";
  f.value = [v](const Vec& z) { return std::tanh(v.dot(z)); };
  f.gradient = [v](const Vec& z) {
    const double th = std::tanh(v.dot(z));
    return Vec((1.0 - th * th) * v);
  };
  return f;
}

nlohmann::json HypoFunctional::to_json() const {
  return {{"t", t},         {"alpha", alpha},     {"stationary_mean", stationary_mean},
          {"l2", l2},       {"l2_se", l2_se},     {"weighted", weighted},
          {"weighted_se", weighted_se},           {"value", value},
          {"value_se", value_se},                 {"grad_sq", grad_sq},
          {"grad_sq_se", grad_sq_se},             {"outer", outer},
          {"inner", inner}};
}

namespace {

struct MeanSe {
  double mean;
  double se;
};

MeanSe mean_se(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += x;
  const double m = s / n;
  if (v.size() < 2) return {m, 0.0};
  double q = 0.0;
  for (double x : v) q += (x - m) * (x - m);
  return {m, std::sqrt(q / (n - 1.0) / n)};
}

// Half-sample sums of f(Z_t) and D_t^T grad f(Z_t) at each grid time.
struct HalfSums {
  std::vector<double> f[2];
  std::vector<Vec> g[2];
  HalfSums(std::size_t times, int phase_dim) {
    for (int h = 0; h < 2; ++h) {
      f[h].assign(times, 0.0);
      g[h].assign(times, Vec::Zero(phase_dim));
    }
  }
};

}  // namespace

std::vector<HypoFunctional> eval_functional_curve(const DriftSpec& spec, const DiffusionSpec& diff,
                                                  const Ensemble& stationary, const HypoConstants& consts,
                                                  const TestFunction& f, const std::vector<double>& t_grid,
                                                  const FunctionalMcConfig& mc) {
  const int d = spec.dim();
  const int pd = 2 * d;
  require(stationary.dim() == d, ErrorCode::kDimensionMismatch, "stationary ensemble has wrong dimension");
  require(!t_grid.empty(), ErrorCode::kInvalidArgument, "time grid is empty");
  require(mc.outer >= 2 && mc.inner >= 2, ErrorCode::kInvalidArgument, "need outer >= 2 and inner >= 2");
  require(static_cast<bool>(f.value) && static_cast<bool>(f.gradient), ErrorCode::kInvalidArgument,
          "test function needs a value and a gradient");
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    require(std::isfinite(t_grid[k]) && t_grid[k] >= 0.0, ErrorCode::kInvalidArgument, "grid times must be >= 0");
    require(k == 0 || t_grid[k] > t_grid[k - 1], ErrorCode::kInvalidArgument, "grid times must increase");
  }
  const Ensemble* frozen = spec.has_interaction() ? &stationary : nullptr;

  double f_mean = 0.0;
  for (std::size_t i = 0; i < stationary.size(); ++i) f_mean += f.value(stationary.point(i));
  f_mean /= static_cast<double>(stationary.size());

  const Ensemble outer = stationary.stride_subsample(mc.outer);
  const std::size_t n_outer = outer.size();
  const std::size_t nt = t_grid.size();
  const double horizon = t_grid.back();

  IntegratorConfig cfg;
  cfg.scheme = mc.scheme;
  cfg.dt = mc.dt;
  cfg.seed = mc.seed;
  cfg.horizon = std::max(horizon, mc.dt);
  cfg.snapshot_times = t_grid;
  // Map grid times to the recorded snapshot slots.
  std::vector<std::size_t> slot(nt);
  {
    const auto steps = cfg.snapshot_steps();
    for (std::size_t k = 0; k < nt; ++k) {
      const auto s = std::min(cfg.steps(), static_cast<std::size_t>(std::llround(t_grid[k] / mc.dt)));
      slot[k] = static_cast<std::size_t>(std::lower_bound(steps.begin(), steps.end(), s) - steps.begin());
    }
  }

  // q[j][k]: per-outer-point contributions to l2, weighted, grad_sq.
  std::vector<HypoWeight> weights;
  for (double t : t_grid) weights.push_back(build_weight(consts, d, t));
  std::vector<double> q_l2(n_outer * nt), q_w(n_outer * nt), q_g(n_outer * nt);
  const std::size_t half = mc.inner / 2;

  parallel_for(n_outer, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      HalfSums sums(nt, pd);
      const PhasePoint z0 = outer.phase_point(j);
      for (std::size_t r = 0; r < mc.inner; ++r) {
        const int h = r < half ? 0 : 1;
        const std::uint64_t stream = static_cast<std::uint64_t>(j) * mc.inner + r;
        if (mc.gradient == GradientMethod::kTangentFlow) {
          const TangentFlow flow = tangent_flow(spec, diff, z0, cfg, frozen, stream);
          for (std::size_t k = 0; k < nt; ++k) {
            const Vec& zt = flow.path[slot[k]];
            sums.f[h][k] += f.value(zt);
            sums.g[h][k] += flow.jacobians[slot[k]].transpose() * f.gradient(zt);
          }
        } else {
          // Central differences with common random numbers.
          auto run = [&](const Vec& start) {
            return simulate(spec, diff, Ensemble(d, start), cfg, frozen, stream);
          };
          const Vec base = z0.stacked();
          const EnsemblePath p0 = run(base);
          for (std::size_t k = 0; k < nt; ++k) sums.f[h][k] += f.value(p0.snapshots[slot[k]].point(0));
          for (int c = 0; c < pd; ++c) {
            Vec up = base, dn = base;
            up(c) += mc.fd_step;
            dn(c) -= mc.fd_step;
            const EnsemblePath pu = run(up), pn = run(dn);
            for (std::size_t k = 0; k < nt; ++k) {
              sums.g[h][k](c) += (f.value(pu.snapshots[slot[k]].point(0)) - f.value(pn.snapshots[slot[k]].point(0))) /
                                 (2.0 * mc.fd_step);
            }
          }
        }
      }
      const double na = static_cast<double>(half), nb = static_cast<double>(mc.inner - half);
      for (std::size_t k = 0; k < nt; ++k) {
        const double fa = sums.f[0][k] / na - f_mean, fb = sums.f[1][k] / nb - f_mean;
        const Vec ga = sums.g[0][k] / na, gb = sums.g[1][k] / nb;
        q_l2[j * nt + k] = fa * fb;
        q_w[j * nt + k] = ga.dot(weights[k].g * gb);
        q_g[j * nt + k] = ga.dot(gb);
      }
    }
  });

  std::vector<HypoFunctional> out;
  std::vector<double> col(n_outer), sum(n_outer);
  for (std::size_t k = 0; k < nt; ++k) {
    HypoFunctional h;
    h.t = t_grid[k];
    h.alpha = weights[k].alpha;
    h.stationary_mean = f_mean;
    h.outer = n_outer;
    h.inner = mc.inner;
    for (std::size_t j = 0; j < n_outer; ++j) col[j] = q_l2[j * nt + k];
    const MeanSe l2 = mean_se(col);
    for (std::size_t j = 0; j < n_outer; ++j) {
      sum[j] = col[j] + q_w[j * nt + k];
      col[j] = q_w[j * nt + k];
    }
    const MeanSe wt = mean_se(col);
    const MeanSe tot = mean_se(sum);
    for (std::size_t j = 0; j < n_outer; ++j) col[j] = q_g[j * nt + k];
    const MeanSe gs = mean_se(col);
    h.l2 = l2.mean;
    h.l2_se = l2.se;
    h.weighted = wt.mean;
    h.weighted_se = wt.se;
    h.value = tot.mean;
    h.value_se = tot.se;
    h.grad_sq = gs.mean;
    h.grad_sq_se = gs.se;
    out.push_back(h);
  }
  return out;
}

SemigroupPoint semigroup_at(const DriftSpec& spec, const DiffusionSpec& diff, const PhasePoint& z,
                            const TestFunction& f, double t, const FunctionalMcConfig& mc, const Ensemble* frozen_mu) {
  require(mc.inner >= 2, ErrorCode::kInvalidArgument, "need inner >= 2");
  require(std::isfinite(t) && t > 0.0, ErrorCode::kInvalidArgument, "time must be > 0");
  IntegratorConfig cfg;
  cfg.scheme = mc.scheme;
  cfg.dt = mc.dt;
  cfg.seed = mc.seed;
  cfg.horizon = t;
  cfg.snapshot_times = {t};
  std::vector<double> values(mc.inner);
  std::vector<Vec> grads(mc.inner);
  parallel_for(mc.inner, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      const TangentFlow flow = tangent_flow(spec, diff, z, cfg, frozen_mu, r);
      values[r] = f.value(flow.final_state());
      grads[r] = flow.final_jacobian().transpose() * f.gradient(flow.final_state());
    }
  });
  SemigroupPoint out;
  const MeanSe v = mean_se(values);
  out.value = v.mean;
  out.value_se = v.se;
  out.gradient = Vec::Zero(z.stacked().size());
  for (const Vec& g : grads) out.gradient += g;
  out.gradient /= static_cast<double>(mc.inner);
  return out;
}

HypoFunctional eval_functional(const DriftSpec& spec, const DiffusionSpec& diff, const Ensemble& stationary,
                               const HypoConstants& consts, const TestFunction& f, double t,
                               const FunctionalMcConfig& mc) {
  return eval_functional_curve(spec, diff, stationary, consts, f, {t}, mc).front();
}

}  // namespace kergo
