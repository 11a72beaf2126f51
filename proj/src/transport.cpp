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

#include <algorithm>
#include <cmath>
#include <cstring>

#include "kergo/error.hpp"
#include "kergo/parallel.hpp"
#include "kergo/transport.hpp"

namespace kergo {

CostMatrix CostMatrix::squared_distances(const Ensemble& a, const Ensemble& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "ensembles live in different dimensions",
                {{"a_dim", a.dim()}, {"b_dim", b.dim()}});
  }
  CostMatrix out;
  out.rows = static_cast<int>(a.size());
  out.cols = static_cast<int>(b.size());
  out.c.resize(a.size() * b.size());
  const int k = a.phase_dim();
  const double* pa = a.points().data();
  const double* pb = b.points().data();
  for (int i = 0; i < out.rows; ++i) {
    const double* zi = pa + static_cast<std::size_t>(i) * k;
    double* row = out.c.data() + static_cast<std::size_t>(i) * out.cols;
    for (int j = 0; j < out.cols; ++j) {
      const double* zj = pb + static_cast<std::size_t>(j) * k;
      double s = 0.0;
      for (int l = 0; l < k; ++l) {
        const double diff = zi[l] - zj[l];
        s += diff * diff;
      }
      row[j] = s;
    }
  }
  return out;
}

namespace {

// Orders the pair canonically so that f(a, b) and f(b, a) run the identical
// computation.
bool swap_for_symmetry(const Ensemble& a, const Ensemble& b) {
  if (a.size() != b.size()) return a.size() > b.size();
  const std::size_t bytes = static_cast<std::size_t>(a.points().size()) * sizeof(double);
  return std::memcmp(a.points().data(), b.points().data(), bytes) > 0;
}

double checked_sqrt(double sq) {
  if (!std::isfinite(sq)) throw Error(ErrorCode::kNonFinite, "transport cost is not finite");
  return std::sqrt(std::max(0.0, sq));
}

}  // namespace

double w2_empirical(const Ensemble& a, const Ensemble& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "ensembles live in different dimensions",
                {{"a_dim", a.dim()}, {"b_dim", b.dim()}});
  }
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kUnequalCounts, "w2_empirical needs equal sample counts; use w2_empirical_general",
                {{"a_size", a.size()}, {"b_size", b.size()}, {"alternative", "w2_empirical_general"}});
  }
  if (a.size() > kExactAssignmentCap) {
    return w2_empirical(a.stride_subsample(kExactAssignmentCap), b.stride_subsample(kExactAssignmentCap));
  }
  const bool swap = swap_for_symmetry(a, b);
  const Ensemble& lhs = swap ? b : a;
  const Ensemble& rhs = swap ? a : b;
  const CostMatrix cost = CostMatrix::squared_distances(lhs, rhs);
  const AssignmentResult res = solve_assignment(cost);
  return checked_sqrt(res.total_cost / static_cast<double>(a.size()));
}

double w2_empirical_general(const Ensemble& a, const Ensemble& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "ensembles live in different dimensions",
                {{"a_dim", a.dim()}, {"b_dim", b.dim()}});
  }
  if (a.size() * b.size() > kTransportArcCap) {
    throw Error(ErrorCode::kSizeCap, "n m exceeds the transport cap; subsample with Ensemble::stride_subsample",
                {{"a_size", a.size()}, {"b_size", b.size()}, {"cap", kTransportArcCap}});
  }
  const bool swap = swap_for_symmetry(a, b);
  const Ensemble& lhs = swap ? b : a;
  const Ensemble& rhs = swap ? a : b;
  const TransportResult res = solve_transport(CostMatrix::squared_distances(lhs, rhs));
  return checked_sqrt(res.total_cost);
}

W2Estimate w2_to_reference(const Ensemble& a, const ReferenceSampler& sampler, std::size_t n_ref,
                           std::size_t replicates) {
  require(replicates >= 1, ErrorCode::kInvalidArgument, "w2_to_reference needs at least one replicate");
  require(static_cast<bool>(sampler), ErrorCode::kInvalidArgument, "reference sampler is empty");
  const std::size_t n = n_ref == 0 ? a.size() : n_ref;
  W2Estimate out;
  out.replicates.assign(replicates, 0.0);
  parallel_for(replicates, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      const Ensemble ref = sampler(n, r);
      out.replicates[r] = ref.size() == a.size() ? w2_empirical(a, ref) : w2_empirical_general(a, ref);
    }
  });
  const double k = static_cast<double>(replicates);
  double s1 = 0.0, s2 = 0.0;
  for (double v : out.replicates) {
    s1 += v;
    s2 += v * v;
  }
  out.mean = s1 / k;
  out.mean_sq = s2 / k;
  if (replicates > 1) {
    double v1 = 0.0, v2 = 0.0;
    for (double v : out.replicates) {
      v1 += (v - out.mean) * (v - out.mean);
      v2 += (v * v - out.mean_sq) * (v * v - out.mean_sq);
    }
    out.stderr_mean = std::sqrt(v1 / (k - 1.0) / k);
    out.stderr_sq = std::sqrt(v2 / (k - 1.0) / k);
  }
  return out;
}

}  // namespace kergo
