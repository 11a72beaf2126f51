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

#include "kergo/meanfield.hpp"

#include <cmath>
#include <optional>
#include <sstream>

#include "integrator.hpp"
#include "kergo/error.hpp"
#include "kergo/parallel.hpp"
#include "kergo/rng.hpp"

namespace kergo {

double rd(int d, std::size_t n) {
  require(d >= 1, ErrorCode::kInvalidArgument, "rd needs d >= 1");
  require(n >= 1, ErrorCode::kInvalidArgument, "rd needs N >= 1");
  const double nn = static_cast<double>(n);
  if (d < 2) return 1.0 / std::sqrt(nn);
  if (d == 2) return std::log1p(nn) / std::sqrt(nn);
  return std::pow(nn, -2.0 / d);
}

double stationarity_threshold(std::size_t n, std::size_t replicates) {
  const double samples = static_cast<double>(n) * static_cast<double>(std::max<std::size_t>(replicates, 1));
  return std::max(kStationarityTolerance, 6.0 / std::sqrt(samples));
}

namespace {

// Below this many particles a step runs on the calling thread.
constexpr std::size_t kParallelParticles = 1024;

template <typename Body>
void for_particles(std::size_t n, Body&& body) {
  if (n < kParallelParticles) {
    body(std::size_t{0}, n);
  } else {
    parallel_for(n, body);
  }
}

double w2_any(const Ensemble& a, const Ensemble& b) {
  if (a.size() == b.size()) return w2_empirical(a, b);
  const Ensemble sa = a.stride_subsample(2048), sb = b.stride_subsample(2048);
  return sa.size() == sb.size() ? w2_empirical(sa, sb) : w2_empirical_general(sa, sb);
}

}  // namespace

EnsemblePath simulate_particles(const DriftSpec& drift, const DiffusionSpec& diffusion, const Ensemble& initial,
                                const IntegratorConfig& cfg, const std::vector<std::uint64_t>& streams) {
  require(drift.dim() == diffusion.dim(), ErrorCode::kDimensionMismatch, "drift and diffusion dimensions differ");
  require(initial.dim() == drift.dim(), ErrorCode::kDimensionMismatch, "initial particles have wrong dimension");
  require(!diffusion.measure_dependent(), ErrorCode::kInvalidArgument,
          "the particle system requires a measure-independent diffusion");
  const std::size_t n = initial.size();
  require(streams.empty() || streams.size() == n, ErrorCode::kInvalidArgument, "one stream per particle required");
  EnsemblePath path;
  path.warnings = cfg.validate(drift.kb());
  const detail::StepKernel kernel(drift, diffusion.sigma(), cfg.dt, cfg.scheme);
  const CounterRng rng(cfg.seed, StreamPurpose::kNoise);
  const int d = drift.dim();
  const double dt = cfg.dt;
  const double h = 0.5 * dt;
  const bool split = cfg.scheme == Scheme::kKineticSplitting;
  const bool interacting = drift.has_interaction();

  Ensemble cur = initial;
  Mat& z = cur.mutable_points();
  Mat b(d, static_cast<Eigen::Index>(n));
  Mat w(d, static_cast<Eigen::Index>(n));
  const auto snaps = cfg.snapshot_steps();
  std::size_t next = 0;

  auto eval_all = [&](const MeasureSummary* mu) {
    for_particles(n, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const auto c = static_cast<Eigen::Index>(i);
        drift.eval_into(z.col(c), mu, b.col(c));
      }
    });
  };

  for (std::size_t step = 0;; ++step) {
    while (next < snaps.size() && snaps[next] == step) {
      path.times.push_back(static_cast<double>(step) * dt);
      path.snapshots.push_back(cur);
      ++next;
    }
    if (next == snaps.size()) break;

    std::optional<MeasureSummary> mu;
    if (interacting) mu = MeasureSummary::of(cur);
    for_particles(n, [&](std::size_t begin, std::size_t end) {
      detail::StepScratch s(kernel);
      for (std::size_t i = begin; i < end; ++i) {
        const std::uint64_t stream = streams.empty() ? i : streams[i];
        detail::draw_noise(kernel, rng, stream, step, s);
        w.col(static_cast<Eigen::Index>(i)) = s.noise;
      }
    });
    eval_all(mu ? &*mu : nullptr);
    for_particles(n, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        double* x = z.col(static_cast<Eigen::Index>(i)).data();
        double* y = x + d;
        const double* bi = b.col(static_cast<Eigen::Index>(i)).data();
        const double* wi = w.col(static_cast<Eigen::Index>(i)).data();
        if (split) {
          for (int k = 0; k < d; ++k) {
            y[k] += h * bi[k];
            x[k] += dt * y[k];
            y[k] += wi[k];
          }
        } else {
          for (int k = 0; k < d; ++k) {
            x[k] += dt * y[k];
            y[k] += dt * bi[k] + wi[k];
          }
        }
      }
    });
    if (split) {
      if (interacting) mu = MeasureSummary::of(cur);
      eval_all(mu ? &*mu : nullptr);
      for (std::size_t i = 0; i < n; ++i) {
        double* y = z.col(static_cast<Eigen::Index>(i)).data() + d;
        const double* bi = b.col(static_cast<Eigen::Index>(i)).data();
        for (int k = 0; k < d; ++k) y[k] += h * bi[k];
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (detail::diverged(z.col(static_cast<Eigen::Index>(i))))
        detail::throw_divergence(step + 1, i, static_cast<double>(step + 1) * dt);
    }
  }
  return path;
}

nlohmann::json FrozenConfig::to_json() const {
  nlohmann::json j = {{"relax_time", relax_time}, {"particles", particles}, {"dt", dt},
                      {"scheme", to_string(scheme)}, {"seed", seed}};
  if (cert) j["cert"] = cert->to_json();
  return j;
}

namespace {

DissipativityCert resolve_cert(const DriftSpec& drift, const Ensemble& mu, const FrozenConfig& cfg) {
  if (cfg.cert) return *cfg.cert;
  const Ensemble probe = mu.stride_subsample(256);
  const SearchResult found = search_cert(drift, SearchGrid::standard(), &probe);
  if (!found.cert) {
    throw Error(ErrorCode::kNoneFound, "no dissipativity cert found for the frozen drift; supply relax_time",
                {{"evaluated", found.evaluated}, {"falsified", found.falsified}});
  }
  return *found.cert;
}

}  // namespace

double frozen_relaxation_time(const DriftSpec& drift, const Ensemble& mu, const FrozenConfig& cfg) {
  if (cfg.relax_time > 0.0) return cfg.relax_time;
  require(cfg.relax_time == 0.0, ErrorCode::kInvalidArgument, "relax_time must be >= 0");
  return 10.0 / resolve_cert(drift, mu, cfg).theta;
}

Ensemble frozen_stationary(const DriftSpec& drift, const DiffusionSpec& diffusion, const Ensemble& mu,
                           const FrozenConfig& cfg, const Ensemble* start) {
  require(cfg.particles >= 1, ErrorCode::kInvalidArgument, "frozen_stationary needs particles >= 1");
  IntegratorConfig icfg;
  icfg.scheme = cfg.scheme;
  icfg.dt = cfg.dt;
  icfg.seed = cfg.seed;
  icfg.horizon = frozen_relaxation_time(drift, mu, cfg);
  icfg.snapshot_times = {icfg.horizon};
  const Ensemble init = start ? (start->size() == cfg.particles ? *start : start->resized(cfg.particles))
                              : mu.resized(cfg.particles);
  return simulate(drift, diffusion, init, icfg, &mu).final();
}

double measured_contraction(const DriftSpec& drift, const DiffusionSpec& diffusion, const Ensemble& mu,
                            const Ensemble& nu, const FrozenConfig& cfg) {
  FrozenConfig c = cfg;
  c.relax_time = frozen_relaxation_time(drift, mu, cfg);
  const Ensemble start = mu.resized(cfg.particles);
  const double before = w2_any(mu, nu);
  require(before > 0.0, ErrorCode::kInvalidArgument, "measures coincide; contraction undefined");
  const double after = w2_any(frozen_stationary(drift, diffusion, mu, c, &start),
                              frozen_stationary(drift, diffusion, nu, c, &start));
  return after / before;
}

nlohmann::json FixedPointState::to_json() const {
  const Vec m = mu.mean();
  return {{"iteration", iteration},
          {"gaps", gaps},
          {"w2_gap", w2_gap()},
          {"converged", converged},
          {"warnings", warnings},
          {"particles", mu.size()},
          {"mean", std::vector<double>(m.data(), m.data() + m.size())}};
}

FixedPointState picard_fixed_point(const DriftSpec& drift, const DiffusionSpec& diffusion, const Ensemble& mu0,
                                   double tol, std::size_t max_iter, const FrozenConfig& inner) {
  require(tol > 0.0, ErrorCode::kInvalidArgument, "tolerance must be > 0");
  require(max_iter >= 1, ErrorCode::kInvalidArgument, "max_iter must be >= 1");
  FixedPointState state{mu0, 0, {}, false, {}};
  FrozenConfig cfg = inner;
  if (cfg.relax_time == 0.0) {
    const DissipativityCert cert = resolve_cert(drift, mu0, inner);
    cfg.relax_time = 10.0 / cert.theta;
    cfg.cert = cert;
  }
  if (cfg.cert && drift.ki() > cfg.cert->interaction_budget()) {
    std::ostringstream msg;
    msg << "K_I=" << drift.ki() << " exceeds the cert's interaction budget " << cfg.cert->interaction_budget()
        << "; contraction is not guaranteed";
    state.warnings.push_back(msg.str());
  }
  const Ensemble start = mu0.resized(cfg.particles);
  for (std::size_t k = 1; k <= max_iter; ++k) {
    Ensemble next = frozen_stationary(drift, diffusion, state.mu, cfg, &start);
    state.gaps.push_back(w2_any(state.mu, next));
    state.mu = std::move(next);
    state.iteration = k;
    if (state.gaps.back() < tol) {
      state.converged = true;
      break;
    }
    const std::size_t g = state.gaps.size();
    if (g >= 4 && state.gaps[g - 1] > state.gaps[g - 2] && state.gaps[g - 2] > state.gaps[g - 3] &&
        state.gaps[g - 3] > state.gaps[g - 4]) {
      throw Error(ErrorCode::kNonContraction, "Picard gap grew three iterations in a row",
                  {{"gaps", state.gaps}, {"iteration", k}});
    }
  }
  return state;
}

nlohmann::json ChaosScanResult::to_json() const {
  return {{"N_values", n_values},       {"mean_sq_w2", mean_sq_w2}, {"stderr_sq_w2", stderr_sq_w2},
          {"rd_pred", rd_pred},         {"stationarity_drift", stationarity_drift},
          {"slope", slope},             {"slope_stderr", slope_stderr}, {"warnings", warnings}};
}

std::string ChaosScanResult::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "N,mean_sq_w2,stderr,rd_pred\n";
  for (std::size_t k = 0; k < n_values.size(); ++k)
    out << n_values[k] << ',' << mean_sq_w2[k] << ',' << stderr_sq_w2[k] << ',' << rd_pred[k] << '\n';
  return out.str();
}

namespace {

// Upper triangle of the (uncentered) second-moment matrix.
Vec moment_vector(const Ensemble& e) {
  const Mat m = e.points() * e.points().transpose() / static_cast<double>(e.size());
  const Eigen::Index p = m.rows();
  Vec v(p * (p + 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = i; j < p; ++j) v(k++) = m(i, j);
  return v;
}

}  // namespace

ChaosScanResult chaos_scan(const DriftSpec& drift, const DiffusionSpec& diffusion, const std::vector<std::size_t>& n_list,
                           double t_stat, std::size_t replicates, const ChaosConfig& cfg) {
  require(!n_list.empty(), ErrorCode::kInvalidArgument, "chaos_scan needs at least one N");
  for (std::size_t k = 0; k < n_list.size(); ++k) {
    require(n_list[k] >= 1, ErrorCode::kInvalidArgument, "N values must be >= 1");
    require(k == 0 || n_list[k] > n_list[k - 1], ErrorCode::kInvalidArgument, "N values must increase strictly");
  }
  require(replicates >= 1, ErrorCode::kInvalidArgument, "chaos_scan needs replicates >= 1");
  require(static_cast<bool>(cfg.reference), ErrorCode::kInvalidArgument, "chaos_scan needs a reference sampler");
  require(cfg.stationarity_snapshots >= 2, ErrorCode::kInvalidArgument, "need at least two stationarity snapshots");
  const int rate_dim = cfg.rate_dimension > 0 ? cfg.rate_dimension : drift.dim();

  ChaosScanResult out;
  for (const std::size_t n : n_list) {
    IntegratorConfig icfg;
    icfg.scheme = cfg.scheme;
    icfg.dt = cfg.dt;
    icfg.horizon = t_stat;
    // Stationarity window: the second half of the run.
    for (std::size_t s = 0; s < cfg.stationarity_snapshots; ++s)
      icfg.snapshot_times.push_back(0.5 * t_stat * (1.0 + static_cast<double>(s) / (cfg.stationarity_snapshots - 1)));

    std::vector<double> sq(replicates);
    Vec first, second;
    const std::size_t half = cfg.stationarity_snapshots / 2;
    for (std::size_t r = 0; r < replicates; ++r) {
      const std::uint64_t key = static_cast<std::uint64_t>(n) * 1000003ULL + r;
      icfg.seed = splitmix64(cfg.seed ^ splitmix64(key));
      const Ensemble init = cfg.reference(n, key);
      require(init.size() == n && init.dim() == drift.dim(), ErrorCode::kDimensionMismatch,
              "reference sampler returned the wrong shape");
      const EnsemblePath path = simulate_particles(drift, diffusion, init, icfg);
      for (std::size_t s = 0; s < path.snapshots.size(); ++s) {
        const Vec m = moment_vector(path.snapshots[s]);
        Vec& acc = s < half ? first : second;
        if (acc.size() == 0) acc = Vec::Zero(m.size());
        acc += m;
      }
      const Ensemble fresh = cfg.reference(n, key + (1ULL << 40));
      const double w = w2_empirical(path.final(), fresh);
      sq[r] = w * w;
    }
    double mean = 0.0;
    for (double v : sq) mean += v;
    mean /= static_cast<double>(replicates);
    double var = 0.0;
    for (double v : sq) var += (v - mean) * (v - mean);
    const double se = replicates > 1 ? std::sqrt(var / (replicates - 1.0) / replicates) : 0.0;
    first /= static_cast<double>(half * replicates);
    second /= static_cast<double>((cfg.stationarity_snapshots - half) * replicates);
    const double drift_rel = (first - second).norm() / std::max(first.norm(), 1e-300);

    out.n_values.push_back(n);
    out.mean_sq_w2.push_back(mean);
    out.stderr_sq_w2.push_back(se);
    out.rd_pred.push_back(rd(rate_dim, n));
    out.stationarity_drift.push_back(drift_rel);
    if (drift_rel >= stationarity_threshold(n, replicates)) {
      std::ostringstream msg;
      msg << "N=" << n << ": second moments moved by " << drift_rel * 100.0
          << "% between window halves (stationarity not confirmed)";
      out.warnings.push_back(msg.str());
    }
  }
  if (n_list.size() >= 2) {
    std::vector<double> lx, ly;
    for (std::size_t k = 0; k < n_list.size(); ++k) {
      lx.push_back(std::log(static_cast<double>(n_list[k])));
      ly.push_back(std::log(out.mean_sq_w2[k]));
    }
    const LineFit f = fit_line(lx, ly);
    out.slope = f.slope;
    out.slope_stderr = f.slope_stderr;
  }
  return out;
}

}  // namespace kergo
