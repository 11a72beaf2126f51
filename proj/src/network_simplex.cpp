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
#include <cstdint>
#include <limits>
#include <vector>

#include "kergo/error.hpp"
#include "kergo/transport.hpp"

namespace kergo {
namespace {

// Primal network simplex on the bipartite transportation graph with integer
// supplies. Sources 0..n-1 carry supply, sinks n..n+m-1 carry demand; arc
// a = i m + j runs from source i to sink j. Supplies are perturbed so that
// every basis is non-degenerate, which rules out cycling.
class TransportSimplex {
 public:
  TransportSimplex(const CostMatrix& cost, std::vector<std::int64_t> supply)
      : n_(cost.rows), m_(cost.cols), cost_(cost), supply_(std::move(supply)) {}

  std::size_t solve() {
    build_initial_tree();
    const std::size_t arcs = static_cast<std::size_t>(n_) * m_;
    double max_cost = 0.0;
    for (double v : cost_.c) max_cost = std::max(max_cost, v);
    const double tol = 1e-13 * std::max(1.0, max_cost);
    const std::size_t block = std::max<std::size_t>(64, static_cast<std::size_t>(std::sqrt(double(arcs))));
    std::size_t next = 0, pivots = 0;
    for (;;) {
      // Block search: scan arcs cyclically, pick the most negative reduced
      // cost within the first block that contains one.
      std::size_t best = arcs;
      double best_rc = -tol;
      std::size_t scanned = 0, in_block = 0;
      while (scanned < arcs) {
        const std::size_t a = next;
        next = next + 1 == arcs ? 0 : next + 1;
        ++scanned;
        ++in_block;
        const int i = static_cast<int>(a / m_), j = static_cast<int>(a % m_);
        if (!in_tree_[a]) {
          const double rc = cost_.c[a] + pi_[i] - pi_[n_ + j];
          if (rc < best_rc) {
            best_rc = rc;
            best = a;
          }
        }
        if (in_block >= block) {
          if (best < arcs) break;
          in_block = 0;
        }
      }
      if (best == arcs) break;
      pivot(best);
      ++pivots;
    }
    return pivots;
  }

  // Flows for the original (unperturbed) supplies on the final tree.
  std::vector<std::int64_t> tree_flows(const std::vector<std::int64_t>& supply) const {
    const int nodes = n_ + m_;
    std::vector<std::int64_t> excess(supply);
    std::vector<std::int64_t> flow(static_cast<std::size_t>(nodes), 0);  // flow on pred arc of node
    // Process nodes deepest first.
    std::vector<int> order(static_cast<std::size_t>(nodes));
    for (int u = 0; u < nodes; ++u) order[u] = u;
    std::sort(order.begin(), order.end(), [&](int a, int b) { return depth_[a] > depth_[b]; });
    for (int u : order) {
      if (u == root_) continue;
      // Node u must push its excess through the pred arc.
      const std::int64_t e = excess[u];
      // forward: arc u -> parent carries +e; otherwise parent -> u carries -e.
      flow[u] = forward_[u] ? e : -e;
      excess[parent_[u]] += e;
    }
    return flow;
  }

  int parent(int u) const { return parent_[u]; }
  std::size_t pred_arc(int u) const { return pred_[u]; }
  int root() const { return root_; }
  int nodes() const { return n_ + m_; }

 private:
  int source_of(std::size_t a) const { return static_cast<int>(a / m_); }
  int target_of(std::size_t a) const { return n_ + static_cast<int>(a % m_); }
  std::size_t arc(int i, int j) const { return static_cast<std::size_t>(i) * m_ + j; }

  void build_initial_tree() {
    const int nodes = n_ + m_;
    const std::size_t arcs = static_cast<std::size_t>(n_) * m_;
    in_tree_.assign(arcs, 0);
    flow_.assign(arcs, 0);
    parent_.assign(nodes, -1);
    pred_.assign(nodes, 0);
    forward_.assign(nodes, 0);
    depth_.assign(nodes, 0);
    pi_.assign(nodes, 0.0);
    first_child_.assign(nodes, -1);
    next_sibling_.assign(nodes, -1);
    prev_sibling_.assign(nodes, -1);

    // Northwest corner rule.
    std::vector<std::int64_t> s(supply_.begin(), supply_.begin() + n_);
    std::vector<std::int64_t> d(static_cast<std::size_t>(m_));
    for (int j = 0; j < m_; ++j) d[j] = -supply_[n_ + j];
    std::vector<std::vector<std::pair<int, std::size_t>>> adj(nodes);
    int i = 0, j = 0;
    while (i < n_ && j < m_) {
      const std::int64_t f = std::min(s[i], d[j]);
      const std::size_t a = arc(i, j);
      in_tree_[a] = 1;
      flow_[a] = f;
      adj[i].push_back({n_ + j, a});
      adj[n_ + j].push_back({i, a});
      s[i] -= f;
      d[j] -= f;
      if (i == n_ - 1 && j == m_ - 1) break;
      if (s[i] == 0 && i < n_ - 1) {
        ++i;
      } else {
        ++j;
      }
    }

    root_ = 0;
    std::vector<int> stack = {root_};
    std::vector<char> seen(nodes, 0);
    seen[root_] = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (auto [w, a] : adj[u]) {
        if (seen[w]) continue;
        seen[w] = 1;
        attach(w, u, a);
        depth_[w] = depth_[u] + 1;
        pi_[w] = potential_from_parent(w);
        stack.push_back(w);
      }
    }
    for (int u = 0; u < nodes; ++u)
      if (!seen[u]) throw Error(ErrorCode::kInvalidArgument, "initial transport tree is not spanning");
  }

  // Tree arcs have zero reduced cost: cost + pi[src] - pi[tgt] = 0.
  double potential_from_parent(int u) const {
    const std::size_t a = pred_[u];
    const int p = parent_[u];
    return forward_[u] ? pi_[p] - cost_.c[a] : pi_[p] + cost_.c[a];
  }

  void attach(int child, int parent, std::size_t a) {
    parent_[child] = parent;
    pred_[child] = a;
    forward_[child] = source_of(a) == child ? 1 : 0;
    prev_sibling_[child] = -1;
    next_sibling_[child] = first_child_[parent];
    if (first_child_[parent] >= 0) prev_sibling_[first_child_[parent]] = child;
    first_child_[parent] = child;
  }

  void detach(int child) {
    const int p = parent_[child];
    if (prev_sibling_[child] >= 0) {
      next_sibling_[prev_sibling_[child]] = next_sibling_[child];
    } else {
      first_child_[p] = next_sibling_[child];
    }
    if (next_sibling_[child] >= 0) prev_sibling_[next_sibling_[child]] = prev_sibling_[child];
    prev_sibling_[child] = next_sibling_[child] = -1;
    parent_[child] = -1;
  }

  void pivot(std::size_t entering) {
    const int s = source_of(entering), t = target_of(entering);
    // Join node.
    int a = s, b = t;
    while (a != b) {
      if (depth_[a] > depth_[b]) {
        a = parent_[a];
      } else if (depth_[b] > depth_[a]) {
        b = parent_[b];
      } else {
        a = parent_[a];
        b = parent_[b];
      }
    }
    const int join = a;

    // Flow is pushed s -> t along the entering arc, then t up to join and
    // join down to s. Only arcs traversed against their direction limit it.
    std::int64_t delta = std::numeric_limits<std::int64_t>::max();
    int leave = -1;
    int side = 0;
    for (int u = s; u != join; u = parent_[u]) {
      if (forward_[u] && flow_[pred_[u]] < delta) {
        delta = flow_[pred_[u]];
        leave = u;
        side = 1;
      }
    }
    for (int u = t; u != join; u = parent_[u]) {
      if (!forward_[u] && flow_[pred_[u]] <= delta) {
        delta = flow_[pred_[u]];
        leave = u;
        side = 2;
      }
    }
    if (leave < 0) throw Error(ErrorCode::kInvalidArgument, "transport LP is unbounded");

    flow_[entering] += delta;
    for (int u = s; u != join; u = parent_[u]) flow_[pred_[u]] += forward_[u] ? -delta : delta;
    for (int u = t; u != join; u = parent_[u]) flow_[pred_[u]] += forward_[u] ? delta : -delta;

    const std::size_t leaving_arc = pred_[leave];
    in_tree_[leaving_arc] = 0;
    in_tree_[entering] = 1;

    // Re-hang the detached subtree: the path from the entering endpoint on
    // the leaving side up to `leave` is reversed.
    const int start = side == 1 ? s : t;
    const int other = side == 1 ? t : s;
    std::vector<int>& path = path_;
    path.clear();
    for (int u = start;; u = parent_[u]) {
      path.push_back(u);
      if (u == leave) break;
    }
    std::vector<std::size_t>& arcs = arcs_;
    arcs.clear();
    for (int u : path) arcs.push_back(pred_[u]);
    for (int u : path) detach(u);
    attach(path[0], other, entering);
    for (std::size_t k = 1; k < path.size(); ++k) attach(path[k], path[k - 1], arcs[k - 1]);

    // Depths and potentials of the re-hung subtree.
    std::vector<int>& stack = stack_;
    stack.clear();
    stack.push_back(start);
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      depth_[u] = depth_[parent_[u]] + 1;
      pi_[u] = potential_from_parent(u);
      for (int c = first_child_[u]; c >= 0; c = next_sibling_[c]) stack.push_back(c);
    }
  }

  int n_, m_;
  const CostMatrix& cost_;
  std::vector<std::int64_t> supply_;
  std::vector<char> in_tree_;
  std::vector<std::int64_t> flow_;
  std::vector<int> parent_;
  std::vector<std::size_t> pred_;
  std::vector<char> forward_;
  std::vector<int> depth_;
  std::vector<double> pi_;
  std::vector<int> first_child_, next_sibling_, prev_sibling_;
  std::vector<int> path_, stack_;
  std::vector<std::size_t> arcs_;
  int root_ = 0;
};

}  // namespace

TransportResult solve_transport(const CostMatrix& cost) {
  require(cost.rows >= 1 && cost.cols >= 1, ErrorCode::kInvalidArgument, "transport needs non-empty marginals");
  const std::size_t arcs = static_cast<std::size_t>(cost.rows) * static_cast<std::size_t>(cost.cols);
  if (arcs > kTransportArcCap) {
    throw Error(ErrorCode::kSizeCap, "transport problem exceeds the arc cap; subsample the ensembles",
                {{"rows", cost.rows}, {"cols", cost.cols}, {"cap", kTransportArcCap}});
  }
  const int n = cost.rows, m = cost.cols;
  TransportResult out;
  if (n == 1 || m == 1) {
    // Unique coupling.
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j) {
        const double mass = 1.0 / (static_cast<double>(n) * m);
        out.plan.push_back({i, j, mass});
        out.total_cost += mass * cost(i, j);
      }
    return out;
  }
  // Unit masses: source i carries m, sink j absorbs n (total n m).
  std::vector<std::int64_t> supply(static_cast<std::size_t>(n + m));
  for (int i = 0; i < n; ++i) supply[i] = m;
  for (int j = 0; j < m; ++j) supply[n + j] = -static_cast<std::int64_t>(n);
  // Perturbation: scale by K, add 1 to each source, n to the last sink.
  const std::int64_t k = static_cast<std::int64_t>(n) + m + 1;
  std::vector<std::int64_t> perturbed(supply.size());
  for (std::size_t u = 0; u < supply.size(); ++u) perturbed[u] = supply[u] * k;
  for (int i = 0; i < n; ++i) perturbed[i] += 1;
  perturbed[n + m - 1] -= n;

  TransportSimplex simplex(cost, perturbed);
  out.pivots = simplex.solve();
  const std::vector<std::int64_t> flow = simplex.tree_flows(supply);
  const double total = static_cast<double>(n) * m;
  std::vector<PlanEntry> plan;
  for (int u = 0; u < simplex.nodes(); ++u) {
    if (u == simplex.root()) continue;
    if (flow[u] < 0) throw Error(ErrorCode::kInvalidArgument, "transport basis infeasible after perturbation");
    if (flow[u] == 0) continue;
    const std::size_t a = simplex.pred_arc(u);
    plan.push_back({static_cast<int>(a / m), static_cast<int>(a % m), static_cast<double>(flow[u]) / total});
  }
  std::sort(plan.begin(), plan.end(),
            [](const PlanEntry& x, const PlanEntry& y) { return x.source != y.source ? x.source < y.source : x.sink < y.sink; });
  for (const auto& e : plan) out.total_cost += e.mass * cost(e.source, e.sink);
  out.plan = std::move(plan);
  return out;
}

}  // namespace kergo
