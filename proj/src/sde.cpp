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

#include "kergo/sde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

#include "integrator.hpp"
#include "kergo/error.hpp"
#include "kergo/parallel.hpp"
#include "kergo/rng.hpp"

namespace kergo {

Scheme scheme_from_string(const std::string& name) {
  if (name == "euler-maruyama") return Scheme::kEulerMaruyama;
  if (name == "kinetic-splitting") return Scheme::kKineticSplitting;
  throw Error(ErrorCode::kSchema, "unknown scheme '" + name + "'");
}

std::string to_string(Scheme scheme) {
  return scheme == Scheme::kEulerMaruyama ? "euler-maruyama" : "kinetic-splitting";
}

std::size_t IntegratorConfig::steps() const {
  return static_cast<std::size_t>(std::llround(horizon / dt));
}

std::vector<std::string> IntegratorConfig::validate(double kb) const {
  require(std::isfinite(dt) && dt > 0.0, ErrorCode::kInvalidArgument, "dt must be > 0");
  require(std::isfinite(horizon) && horizon > 0.0, ErrorCode::kInvalidArgument, "horizon must be > 0");
  require(dt <= horizon, ErrorCode::kInvalidArgument, "dt must not exceed the horizon");
  std::vector<std::string> warnings;
  const double cap = 0.1 / std::max(1.0, kb);
  if (dt > cap) {
    std::ostringstream msg;
    msg << "dt=" << dt << " exceeds 0.1/max(1,K_b)=" << cap;
    if (!allow_large_step) throw Error(ErrorCode::kInvalidArgument, msg.str());
    warnings.push_back(msg.str());
  }
  return warnings;
}

std::vector<std::size_t> IntegratorConfig::snapshot_steps() const {
  const std::size_t n = steps();
  std::vector<std::size_t> out;
  if (snapshot_times.empty()) {
    out = {0, n};
  } else {
    for (double t : snapshot_times) {
      require(std::isfinite(t) && t >= 0.0, ErrorCode::kInvalidArgument, "snapshot times must be >= 0");
      out.push_back(std::min(n, static_cast<std::size_t>(std::llround(t / dt))));
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<double> snapshot_grid(double horizon, double every) {
  require(every > 0.0 && horizon > 0.0, ErrorCode::kInvalidArgument, "snapshot grid needs positive spacing");
  std::vector<double> times;
  const auto count = static_cast<std::size_t>(std::floor(horizon / every + 1e-9));
  for (std::size_t k = 0; k <= count; ++k) times.push_back(static_cast<double>(k) * every);
  if (horizon - times.back() > 1e-9 * horizon) times.push_back(horizon);
  return times;
}

namespace {

struct FrozenSetup {
  std::optional<MeasureSummary> summary;
  Mat sigma;
  const MeasureSummary* mu() const { return summary ? &*summary : nullptr; }
};

FrozenSetup prepare(const DriftSpec& drift, const DiffusionSpec& diffusion, const Ensemble* frozen_mu) {
  require(drift.dim() == diffusion.dim(), ErrorCode::kDimensionMismatch, "drift and diffusion dimensions differ");
  FrozenSetup setup;
  if (frozen_mu) {
    require(frozen_mu->dim() == drift.dim(), ErrorCode::kDimensionMismatch, "frozen measure dimension differs");
    setup.summary = MeasureSummary::of(*frozen_mu);
  } else if (drift.has_interaction()) {
    throw Error(ErrorCode::kMissingMeasure,
                "drift has an interaction kernel: supply a frozen measure or use the particle system");
  }
  setup.sigma = diffusion.sigma(setup.mu());
  return setup;
}

}  // namespace

EnsemblePath simulate(const DriftSpec& drift, const DiffusionSpec& diffusion, const Ensemble& initial,
                      const IntegratorConfig& cfg, const Ensemble* frozen_mu, std::uint64_t stream_offset) {
  require(initial.dim() == drift.dim(), ErrorCode::kDimensionMismatch, "initial ensemble dimension differs");
  EnsemblePath path;
  path.warnings = cfg.validate(drift.kb());
  const FrozenSetup setup = prepare(drift, diffusion, frozen_mu);
  const detail::StepKernel kernel(drift, setup.sigma, cfg.dt, cfg.scheme);
  const CounterRng rng(cfg.seed, StreamPurpose::kNoise);

  const auto snaps = cfg.snapshot_steps();
  const std::size_t n = initial.size();
  std::vector<Mat> storage(snaps.size(), Mat(initial.phase_dim(), static_cast<Eigen::Index>(n)));
  std::vector<std::optional<std::size_t>> failed_step(n);

  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    detail::StepScratch scratch(kernel);
    Vec z(initial.phase_dim());
    for (std::size_t i = begin; i < end; ++i) {
      z = initial.point(i);
      std::size_t next = 0;
      const std::uint64_t stream = stream_offset + i;
      for (std::size_t step = 0;; ++step) {
        while (next < snaps.size() && snaps[next] == step) storage[next++].col(static_cast<Eigen::Index>(i)) = z;
        if (next == snaps.size()) break;
        detail::step_frozen(kernel, setup.mu(), z, rng, stream, step, scratch);
        if (detail::diverged(z)) {
          failed_step[i] = step + 1;
          break;
        }
      }
    }
  });

  std::optional<std::pair<std::size_t, std::size_t>> first;
  for (std::size_t i = 0; i < n; ++i)
    if (failed_step[i] && (!first || *failed_step[i] < first->first)) first = {{*failed_step[i], i}};
  if (first) detail::throw_divergence(first->first, first->second, static_cast<double>(first->first) * cfg.dt);

  for (std::size_t k = 0; k < snaps.size(); ++k) {
    path.times.push_back(static_cast<double>(snaps[k]) * cfg.dt);
    path.snapshots.emplace_back(initial.dim(), std::move(storage[k]));
  }
  return path;
}

CoupledPath simulate_coupled(const DriftSpec& drift, const DiffusionSpec& diffusion, const PhasePoint& z0,
                             const PhasePoint& zbar0, const IntegratorConfig& cfg, const Ensemble* mu,
                             const Ensemble* nu, std::uint64_t stream) {
  require(z0.dim() == drift.dim() && zbar0.dim() == drift.dim(), ErrorCode::kDimensionMismatch,
          "coupled start points have wrong dimension");
  cfg.validate(drift.kb());
  const FrozenSetup a = prepare(drift, diffusion, mu);
  const FrozenSetup b = prepare(drift, diffusion, nu ? nu : mu);
  const detail::StepKernel ka(drift, a.sigma, cfg.dt, cfg.scheme);
  const detail::StepKernel kb(drift, b.sigma, cfg.dt, cfg.scheme);
  const CounterRng rng(cfg.seed, StreamPurpose::kNoise);
  detail::StepScratch sa(ka), sb(kb);

  CoupledPath out;
  Vec z = z0.stacked(), zb = zbar0.stacked();
  const std::size_t n = cfg.steps();
  out.times.reserve(n + 1);
  for (std::size_t step = 0;; ++step) {
    out.times.push_back(static_cast<double>(step) * cfg.dt);
    out.z_path.push_back(z);
    out.zbar_path.push_back(zb);
    out.gap.push_back((z - zb).squaredNorm());
    if (step == n) break;
    detail::step_frozen(ka, a.mu(), z, rng, stream, step, sa);
    detail::step_frozen(kb, b.mu(), zb, rng, stream, step, sb);
    if (detail::diverged(z) || detail::diverged(zb))
      detail::throw_divergence(step + 1, stream, static_cast<double>(step + 1) * cfg.dt);
  }
  return out;
}

CoupledGapStats simulate_coupled_ensemble(const DriftSpec& drift, const DiffusionSpec& diffusion,
                                          const Ensemble& initial, const Ensemble& initial_bar,
                                          const IntegratorConfig& cfg, const Ensemble* mu, const Ensemble* nu) {
  require(initial.size() == initial_bar.size(), ErrorCode::kUnequalCounts, "coupled ensembles differ in size");
  cfg.validate(drift.kb());
  const FrozenSetup a = prepare(drift, diffusion, mu);
  const FrozenSetup b = prepare(drift, diffusion, nu ? nu : mu);
  const detail::StepKernel ka(drift, a.sigma, cfg.dt, cfg.scheme);
  const detail::StepKernel kb(drift, b.sigma, cfg.dt, cfg.scheme);
  const CounterRng rng(cfg.seed, StreamPurpose::kNoise);
  const std::size_t steps = cfg.steps();
  const std::size_t reps = initial.size();

  Mat gaps(static_cast<Eigen::Index>(steps + 1), static_cast<Eigen::Index>(reps));
  std::vector<std::optional<std::size_t>> failed(reps);
  parallel_for(reps, [&](std::size_t begin, std::size_t end) {
    detail::StepScratch sa(ka), sb(kb);
    for (std::size_t r = begin; r < end; ++r) {
      Vec z = initial.point(r), zb = initial_bar.point(r);
      for (std::size_t step = 0;; ++step) {
        gaps(static_cast<Eigen::Index>(step), static_cast<Eigen::Index>(r)) = (z - zb).squaredNorm();
        if (step == steps) break;
        detail::step_frozen(ka, a.mu(), z, rng, r, step, sa);
        detail::step_frozen(kb, b.mu(), zb, rng, r, step, sb);
        if (detail::diverged(z) || detail::diverged(zb)) {
          failed[r] = step + 1;
          break;
        }
      }
    }
  });
  for (std::size_t r = 0; r < reps; ++r)
    if (failed[r]) detail::throw_divergence(*failed[r], r, static_cast<double>(*failed[r]) * cfg.dt);

  CoupledGapStats stats;
  const double n = static_cast<double>(reps);
  for (std::size_t step = 0; step <= steps; ++step) {
    const auto row = gaps.row(static_cast<Eigen::Index>(step));
    const double mean = row.mean();
    const double var = reps > 1 ? (row.array() - mean).square().sum() / (n - 1.0) : 0.0;
    stats.times.push_back(static_cast<double>(step) * cfg.dt);
    stats.mean_gap.push_back(mean);
    stats.stderr_gap.push_back(std::sqrt(var / n));
  }
  return stats;
}

TangentFlow tangent_flow(const DriftSpec& drift, const DiffusionSpec& diffusion, const PhasePoint& z0,
                         const IntegratorConfig& cfg, const Ensemble* frozen_mu, std::uint64_t stream) {
  require(z0.dim() == drift.dim(), ErrorCode::kDimensionMismatch, "start point has wrong dimension");
  cfg.validate(drift.kb());
  const FrozenSetup setup = prepare(drift, diffusion, frozen_mu);
  const detail::StepKernel kernel(drift, setup.sigma, cfg.dt, cfg.scheme);
  const CounterRng rng(cfg.seed, StreamPurpose::kNoise);
  detail::StepScratch s(kernel);
  const int d = drift.dim();
  const double dt = cfg.dt;

  Vec z = z0.stacked();
  Mat big_d = Mat::Identity(2 * d, 2 * d);
  Mat jx(d, d), jy(d, d), step_jac(2 * d, 2 * d);
  const auto snaps = cfg.snapshot_steps();
  TangentFlow out;
  std::size_t next = 0;

  // Kick Jacobian [[I, 0], [Jx h, I + Jy h]] applied on the left of D.
  auto apply_kick = [&](double h) {
    drift.jacobian_into(z, setup.mu(), jx, jy);
    const Mat top = big_d.topRows(d);
    big_d.bottomRows(d) += h * (jx * top + jy * big_d.bottomRows(d));
  };

  for (std::size_t step = 0;; ++step) {
    while (next < snaps.size() && snaps[next] == step) {
      out.times.push_back(static_cast<double>(step) * dt);
      out.path.push_back(z);
      out.jacobians.push_back(big_d);
      ++next;
    }
    if (next == snaps.size()) break;
    detail::draw_noise(kernel, rng, stream, step, s);
    if (cfg.scheme == Scheme::kEulerMaruyama) {
      drift.jacobian_into(z, setup.mu(), jx, jy);
      step_jac.setIdentity();
      step_jac.topRightCorner(d, d) += dt * Mat::Identity(d, d);
      step_jac.bottomLeftCorner(d, d) = dt * jx;
      step_jac.bottomRightCorner(d, d) += dt * jy;
      big_d = step_jac * big_d;
      drift.eval_into(z, setup.mu(), s.b);
      z.head(d) += dt * z.tail(d);
      z.tail(d) += dt * s.b + s.noise;
    } else {
      apply_kick(0.5 * dt);
      drift.eval_into(z, setup.mu(), s.b);
      z.tail(d) += (0.5 * dt) * s.b;
      big_d.topRows(d) += dt * big_d.bottomRows(d);
      z.head(d) += dt * z.tail(d);
      z.tail(d) += s.noise;
      apply_kick(0.5 * dt);
      drift.eval_into(z, setup.mu(), s.b);
      z.tail(d) += (0.5 * dt) * s.b;
    }
    if (detail::diverged(z) || !big_d.allFinite())
      detail::throw_divergence(step + 1, stream, static_cast<double>(step + 1) * dt);
  }
  return out;
}

}  // namespace kergo
