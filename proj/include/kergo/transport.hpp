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

#include <cstdint>
#include <functional>
#include <vector>

#include "kergo/model.hpp"

namespace kergo {

/// Dense row-major cost matrix c[i][j] = |a_i - b_j|^2.
struct CostMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> c;

  static CostMatrix squared_distances(const Ensemble& a, const Ensemble& b);
  double operator()(int i, int j) const { return c[static_cast<std::size_t>(i) * cols + j]; }
};

struct AssignmentResult {
  std::vector<int> row_to_col;
  double total_cost = 0.0;
};

/// Exact minimum-cost perfect matching on a square cost matrix
/// (Jonker-Volgenant shortest augmenting paths with reduction phases).
AssignmentResult solve_assignment(const CostMatrix& cost);

struct PlanEntry {
  int source;
  int sink;
  double mass;
};

struct TransportResult {
  double total_cost = 0.0;  ///< sum of mass * cost
  std::vector<PlanEntry> plan;
  std::size_t pivots = 0;
};

/// Exact transport between uniform marginals (1/rows each row, 1/cols each
/// column) by the primal network simplex method.
TransportResult solve_transport(const CostMatrix& cost);

inline constexpr std::size_t kExactAssignmentCap = 4096;
inline constexpr std::size_t kTransportArcCap = 10'000'000;

/// W2 between equal-size empirical measures via exact assignment. Inputs
/// above kExactAssignmentCap points are stride-subsampled to the cap.
double w2_empirical(const Ensemble& a, const Ensemble& b);

/// W2 between empirical measures of any sizes via the transport LP.
/// Throws kSizeCap if n m exceeds kTransportArcCap.
double w2_empirical_general(const Ensemble& a, const Ensemble& b);

/// Draws an i.i.d. reference sample of the requested size for a replicate.
using ReferenceSampler = std::function<Ensemble(std::size_t n, std::uint64_t replicate)>;

struct W2Estimate {
  double mean = 0.0;  ///< mean of W2 over replicates
  double stderr_mean = 0.0;
  double mean_sq = 0.0;  ///< mean of W2^2 over replicates
  double stderr_sq = 0.0;
  std::vector<double> replicates;
};

/// Averages W2(a, fresh reference sample of size n_ref) over replicates.
/// n_ref = 0 uses |a|.
W2Estimate w2_to_reference(const Ensemble& a, const ReferenceSampler& sampler, std::size_t n_ref,
                           std::size_t replicates);

}  // namespace kergo
