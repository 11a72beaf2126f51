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

#pragma once

// Shared single-trajectory stepping kernels for the sde and meanfield modules.

#include <cmath>
#include <span>

#include "kergo/error.hpp"
#include "kergo/model.hpp"
#include "kergo/rng.hpp"
#include "kergo/sde.hpp"

namespace kergo::detail {

struct StepKernel {
  const DriftSpec* drift;
  Mat sigma;
  double dt;
  double sqrt_dt;
  Scheme scheme;
  int d;
  int m;

  StepKernel(const DriftSpec& spec, Mat sigma_matrix, double step, Scheme s)
      : drift(&spec),
        sigma(std::move(sigma_matrix)),
        dt(step),
        sqrt_dt(std::sqrt(step)),
        scheme(s),
        d(spec.dim()),
        m(static_cast<int>(sigma.cols())) {}
};

/// Scratch buffers reused across steps of one trajectory.
struct StepScratch {
  Vec b;
  Vec xi;
  Vec noise;
  explicit StepScratch(const StepKernel& k) : b(k.d), xi(k.m), noise(k.d) {}
};

inline void draw_noise(const StepKernel& k, const CounterRng& rng, std::uint64_t stream, std::uint64_t step,
                       StepScratch& s) {
  rng.normals(stream, step, {s.xi.data(), static_cast<std::size_t>(s.xi.size())});
  const double* sig = k.sigma.data();
  for (int i = 0; i < k.d; ++i) {
    double acc = 0.0;
    for (int j = 0; j < k.m; ++j) acc += sig[i + j * k.d] * s.xi(j);
    s.noise(i) = k.sqrt_dt * acc;
  }
}

/// One step with the measure argument fixed across the step.
inline void step_frozen(const StepKernel& k, const MeasureSummary* mu, VecRef z, const CounterRng& rng,
                        std::uint64_t stream, std::uint64_t step, StepScratch& s) {
  const int d = k.d;
  const double dt = k.dt;
  double* x = z.data();
  double* y = x + d;
  double* b = s.b.data();
  const double* w = s.noise.data();
  draw_noise(k, rng, stream, step, s);
  k.drift->eval_into(z, mu, s.b);
  if (k.scheme == Scheme::kEulerMaruyama) {
    for (int i = 0; i < d; ++i) {
      x[i] += dt * y[i];
      y[i] += dt * b[i] + w[i];
    }
  } else {
    const double h = 0.5 * dt;
    for (int i = 0; i < d; ++i) {
      y[i] += h * b[i];
      x[i] += dt * y[i];
      y[i] += w[i];
    }
    k.drift->eval_into(z, mu, s.b);
    for (int i = 0; i < d; ++i) y[i] += h * b[i];
  }
}

inline bool diverged(const ConstVecRef& z) {
  const double n2 = z.squaredNorm();
  return !(n2 <= kDivergenceCap * kDivergenceCap);
}

[[noreturn]] inline void throw_divergence(std::size_t step, std::size_t trajectory, double t) {
  throw Error(ErrorCode::kDivergence, "state left the finite region",
              {{"step", step}, {"trajectory", trajectory}, {"time", t}});
}

}  // namespace kergo::detail
