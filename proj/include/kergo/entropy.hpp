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
#include <string>
#include <vector>

#include <json.hpp>

#include "kergo/gaussian.hpp"
#include "kergo/model.hpp"
#include "kergo/sde.hpp"

namespace kergo {

/// Exact k-nearest-neighbor search over a fixed point set (k-d tree).
class KdTree {
 public:
  /// Points are the columns of `points`; the tree keeps its own copy.
  explicit KdTree(const Mat& points, int leaf_size = 16);

  int dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return n_; }

  /// Squared distance from `query` to its k-th nearest point, skipping the
  /// point with index `exclude` (pass npos to keep all).
  double kth_squared_distance(const double* query, int k, std::size_t exclude = npos) const;
  /// Indices and squared distances of the k nearest points, nearest first.
  std::vector<std::pair<std::size_t, double>> nearest(const double* query, int k,
                                                       std::size_t exclude = npos) const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  struct Node {
    int split_dim;
    double split;
    std::size_t begin, end;
    int left, right;  ///< -1 for leaves
  };
  int build(std::size_t begin, std::size_t end, int leaf_size);
  void search(int node, const double* q, int k, std::size_t exclude, std::vector<std::pair<double, std::size_t>>& heap) const;

  int dim_;
  std::size_t n_;
  std::vector<double> data_;         ///< points in tree order, row-major
  std::vector<std::size_t> index_;   ///< original index of each stored point
  std::vector<Node> nodes_;
};

struct KlEstimate {
  double value = 0.0;  ///< may be negative
  int k = 0;
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t floored_radii = 0;  ///< zero radii replaced by kRadiusFloor

  nlohmann::json to_json() const;
};

inline constexpr int kDefaultNeighbors = 5;
inline constexpr double kRadiusFloor = 1e-12;

/// Two-sample k-NN estimate of Ent(p | q) in phase dimension D = 2d:
/// (D/n) sum_i ln(nu_k(i) / rho_k(i)) + ln(m / (n - 1)).
KlEstimate kl_knn(const Ensemble& p_samples, const Ensemble& q_samples, int k = kDefaultNeighbors);

enum class KlMode { kKnn, kGaussianFit };
std::string to_string(KlMode mode);
KlMode kl_mode_from_string(const std::string& name);

struct KlCurve {
  KlMode mode = KlMode::kKnn;
  std::vector<double> times;
  std::vector<KlEstimate> estimates;

  std::vector<double> values() const;
  /// Gaussian-fit curves are exact only for linear models.
  bool model_specific() const { return mode == KlMode::kGaussianFit; }
  nlohmann::json to_json() const;
};

/// KL of each snapshot against a sampled reference. k-NN mode needs the
/// reference to have at least as many points as each snapshot; Gaussian-fit
/// mode fits mean and covariance on both sides.
KlCurve kl_decay_curve(const EnsemblePath& path, const Ensemble& reference, KlMode mode = KlMode::kKnn,
                       int k = kDefaultNeighbors);

/// KL of each snapshot against a Gaussian law. Gaussian-fit mode applies the
/// closed form to the fitted snapshot; k-NN mode draws a reference sample of
/// the snapshot size from `law` with `seed`.
KlCurve kl_decay_curve(const EnsemblePath& path, const GaussianLaw& law, KlMode mode = KlMode::kGaussianFit,
                       int k = kDefaultNeighbors, std::uint64_t seed = 0);

}  // namespace kergo
