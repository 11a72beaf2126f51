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

#include "kergo/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "kergo/error.hpp"
#include "kergo/parallel.hpp"

namespace kergo {

KdTree::KdTree(const Mat& points, int leaf_size)
    : dim_(static_cast<int>(points.rows())), n_(static_cast<std::size_t>(points.cols())) {
  require(n_ > 0, ErrorCode::kInsufficientPoints, "k-d tree needs at least one point");
  require(leaf_size >= 1, ErrorCode::kInvalidArgument, "leaf size must be positive");
  index_.resize(n_);
  std::iota(index_.begin(), index_.end(), std::size_t{0});
  // Partition indices, then copy coordinates in tree order.
  data_.assign(points.data(), points.data() + points.size());
  nodes_.reserve(2 * n_ / static_cast<std::size_t>(leaf_size) + 2);
  build(0, n_, leaf_size);
  std::vector<double> ordered(data_.size());
  for (std::size_t i = 0; i < n_; ++i)
    std::copy_n(points.data() + index_[i] * dim_, dim_, ordered.data() + i * dim_);
  data_ = std::move(ordered);
}

int KdTree::build(std::size_t begin, std::size_t end, int leaf_size) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({-1, 0.0, begin, end, -1, -1});
  if (end - begin <= static_cast<std::size_t>(leaf_size)) return id;
  int best_dim = 0;
  double best_spread = -1.0;
  for (int d = 0; d < dim_; ++d) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = begin; i < end; ++i) {
      const double v = data_[index_[i] * dim_ + d];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo > best_spread) {
      best_spread = hi - lo;
      best_dim = d;
    }
  }
  if (best_spread <= 0.0) return id;  // all points coincide
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(index_.begin() + static_cast<std::ptrdiff_t>(begin), index_.begin() + static_cast<std::ptrdiff_t>(mid),
                   index_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t a, std::size_t b) {
                     return data_[a * dim_ + best_dim] < data_[b * dim_ + best_dim];
                   });
  const double split = data_[index_[mid] * dim_ + best_dim];
  const int left = build(begin, mid, leaf_size);
  const int right = build(mid, end, leaf_size);
  nodes_[id].split_dim = best_dim;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::search(int node, const double* q, int k, std::size_t exclude,
                    std::vector<std::pair<double, std::size_t>>& heap) const {
  const Node& nd = nodes_[node];
  if (nd.left < 0) {
    for (std::size_t i = nd.begin; i < nd.end; ++i) {
      if (index_[i] == exclude) continue;
      const double* p = data_.data() + i * dim_;
      double s = 0.0;
      for (int d = 0; d < dim_; ++d) {
        const double diff = p[d] - q[d];
        s += diff * diff;
      }
      if (static_cast<int>(heap.size()) < k) {
        heap.push_back({s, index_[i]});
        std::push_heap(heap.begin(), heap.end());
      } else if (s < heap.front().first) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = {s, index_[i]};
        std::push_heap(heap.begin(), heap.end());
      }
    }
    return;
  }
  const double diff = q[nd.split_dim] - nd.split;
  const int near = diff < 0.0 ? nd.left : nd.right;
  const int far = diff < 0.0 ? nd.right : nd.left;
  search(near, q, k, exclude, heap);
  if (static_cast<int>(heap.size()) < k || diff * diff < heap.front().first) search(far, q, k, exclude, heap);
}

std::vector<std::pair<std::size_t, double>> KdTree::nearest(const double* query, int k, std::size_t exclude) const {
  require(k >= 1, ErrorCode::kInvalidArgument, "neighbor order must be at least 1");
  const std::size_t available = n_ - (exclude < n_ ? 1 : 0);
  require(static_cast<std::size_t>(k) <= available, ErrorCode::kInsufficientPoints,
          "fewer points than the requested neighbor order");
  std::vector<std::pair<double, std::size_t>> heap;
  heap.reserve(static_cast<std::size_t>(k));
  search(0, query, k, exclude, heap);
  std::sort_heap(heap.begin(), heap.end());
  std::vector<std::pair<std::size_t, double>> out;
  out.reserve(heap.size());
  for (const auto& [d2, i] : heap) out.push_back({i, d2});
  return out;
}

double KdTree::kth_squared_distance(const double* query, int k, std::size_t exclude) const {
  std::vector<std::pair<double, std::size_t>> heap;
  heap.reserve(static_cast<std::size_t>(k));
  search(0, query, k, exclude, heap);
  return heap.front().first;
}

nlohmann::json KlEstimate::to_json() const {
  return {{"value", value}, {"k", k}, {"n", n}, {"m", m}, {"floored_radii", floored_radii}};
}

KlEstimate kl_knn(const Ensemble& p_samples, const Ensemble& q_samples, int k) {
  require(k >= 1, ErrorCode::kInvalidArgument, "kl_knn needs k >= 1");
  if (p_samples.dim() != q_samples.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "sample sets live in different dimensions",
                {{"p_dim", p_samples.dim()}, {"q_dim", q_samples.dim()}});
  }
  const std::size_t n = p_samples.size(), m = q_samples.size();
  if (n <= static_cast<std::size_t>(k) || m <= static_cast<std::size_t>(k)) {
    throw Error(ErrorCode::kInsufficientPoints, "kl_knn needs more samples than the neighbor order",
                {{"n", n}, {"m", m}, {"k", k}});
  }
  const KdTree self(p_samples.points());
  const KdTree cross(q_samples.points());
  const double floor2 = kRadiusFloor * kRadiusFloor;
  std::vector<double> log_ratio(n);
  std::vector<unsigned char> floored(n, 0);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double* z = p_samples.points().col(static_cast<Eigen::Index>(i)).data();
      double rho2 = self.kth_squared_distance(z, k, i);
      double nu2 = cross.kth_squared_distance(z, k);
      if (rho2 < floor2) {
        rho2 = floor2;
        ++floored[i];
      }
      if (nu2 < floor2) {
        nu2 = floor2;
        ++floored[i];
      }
      log_ratio[i] = 0.5 * (std::log(nu2) - std::log(rho2));
    }
  });
  KlEstimate out;
  out.k = k;
  out.n = n;
  out.m = m;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += log_ratio[i];
    out.floored_radii += floored[i];
  }
  const double phase_dim = p_samples.phase_dim();
  out.value = phase_dim / static_cast<double>(n) * sum +
              std::log(static_cast<double>(m) / static_cast<double>(n - 1));
  return out;
}

std::string to_string(KlMode mode) { return mode == KlMode::kKnn ? "knn" : "gaussian-fit"; }

KlMode kl_mode_from_string(const std::string& name) {
  if (name == "knn") return KlMode::kKnn;
  if (name == "gaussian-fit") return KlMode::kGaussianFit;
  throw Error(ErrorCode::kInvalidArgument, "unknown KL mode '" + name + "'", {{"allowed", {"knn", "gaussian-fit"}}});
}

std::vector<double> KlCurve::values() const {
  std::vector<double> v;
  v.reserve(estimates.size());
  for (const auto& e : estimates) v.push_back(e.value);
  return v;
}

nlohmann::json KlCurve::to_json() const {
  nlohmann::json est = nlohmann::json::array();
  for (const auto& e : estimates) est.push_back(e.to_json());
  return {{"mode", to_string(mode)}, {"model_specific", model_specific()}, {"times", times}, {"estimates", est}};
}

namespace {

KlEstimate gaussian_fit_estimate(const Ensemble& snapshot, const GaussianLaw& reference, std::size_t m, int k) {
  KlEstimate e;
  e.k = k;
  e.n = snapshot.size();
  e.m = m;
  e.value = kl_gaussian(GaussianLaw::fit(snapshot), reference);
  return e;
}

}  // namespace

KlCurve kl_decay_curve(const EnsemblePath& path, const Ensemble& reference, KlMode mode, int k) {
  KlCurve curve;
  curve.mode = mode;
  curve.times = path.times;
  if (mode == KlMode::kGaussianFit) {
    const GaussianLaw ref = GaussianLaw::fit(reference);
    for (const auto& s : path.snapshots) curve.estimates.push_back(gaussian_fit_estimate(s, ref, reference.size(), k));
    return curve;
  }
  for (const auto& s : path.snapshots) {
    if (reference.size() < s.size()) {
      throw Error(ErrorCode::kInsufficientPoints, "reference sample is smaller than a snapshot",
                  {{"reference", reference.size()}, {"snapshot", s.size()}});
    }
    curve.estimates.push_back(kl_knn(s, reference, k));
  }
  return curve;
}

KlCurve kl_decay_curve(const EnsemblePath& path, const GaussianLaw& law, KlMode mode, int k, std::uint64_t seed) {
  KlCurve curve;
  curve.mode = mode;
  curve.times = path.times;
  for (const auto& s : path.snapshots) {
    if (mode == KlMode::kGaussianFit) {
      curve.estimates.push_back(gaussian_fit_estimate(s, law, 0, k));
    } else {
      curve.estimates.push_back(kl_knn(s, law.sample(s.size(), seed), k));
    }
  }
  return curve;
}

}  // namespace kergo
