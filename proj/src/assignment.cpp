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
#include <limits>

#include "kergo/error.hpp"
#include "kergo/transport.hpp"

namespace kergo {

AssignmentResult solve_assignment(const CostMatrix& cost) {
  require(cost.rows == cost.cols && cost.rows >= 1, ErrorCode::kUnequalCounts,
          "assignment needs a square non-empty cost matrix");
  const int n = cost.rows;
  const double inf = std::numeric_limits<double>::infinity();
  auto c = [&](int i, int j) { return cost.c[static_cast<std::size_t>(i) * n + j]; };

  std::vector<int> rowsol(n, -1), colsol(n, -1), matches(n, 0), free_rows(n), collist(n), pred(n);
  std::vector<double> v(n), d(n);

  // Column reduction.
  for (int j = n - 1; j >= 0; --j) {
    double best = c(0, j);
    int imin = 0;
    for (int i = 1; i < n; ++i) {
      if (c(i, j) < best) {
        best = c(i, j);
        imin = i;
      }
    }
    v[j] = best;
    if (++matches[imin] == 1) {
      rowsol[imin] = j;
      colsol[j] = imin;
    } else {
      colsol[j] = -1;
    }
  }
  for (int j = 0; j < n; ++j) {
    const int i = colsol[j];
    if (i >= 0 && rowsol[i] != j) colsol[j] = -1;
  }

  // Reduction transfer.
  int numfree = 0;
  for (int i = 0; i < n; ++i) {
    if (matches[i] == 0) {
      free_rows[numfree++] = i;
    } else if (matches[i] == 1) {
      const int j1 = rowsol[i];
      double m = inf;
      for (int j = 0; j < n; ++j)
        if (j != j1) m = std::min(m, c(i, j) - v[j]);
      if (m < inf) v[j1] -= m;
    } else {
      // Row claimed several columns; keep only the recorded one.
      free_rows[numfree++] = i;
      rowsol[i] = -1;
    }
  }
  for (int j = 0; j < n; ++j)
    if (colsol[j] >= 0 && rowsol[colsol[j]] != j) colsol[j] = -1;

  // Augmenting row reduction, two passes with a work cap.
  for (int pass = 0; pass < 2 && numfree > 0; ++pass) {
    int k = 0;
    const int prvnumfree = numfree;
    numfree = 0;
    long long budget = 8LL * n + 64;
    while (k < prvnumfree) {
      const int i = free_rows[k++];
      double umin = c(i, 0) - v[0], usubmin = inf;
      int j1 = 0, j2 = -1;
      for (int j = 1; j < n; ++j) {
        const double h = c(i, j) - v[j];
        if (h < usubmin) {
          if (h >= umin) {
            usubmin = h;
            j2 = j;
          } else {
            usubmin = umin;
            umin = h;
            j2 = j1;
            j1 = j;
          }
        }
      }
      int i0 = colsol[j1];
      const bool strict = umin < usubmin;
      if (strict) {
        v[j1] -= usubmin - umin;
      } else if (i0 >= 0 && j2 >= 0) {
        j1 = j2;
        i0 = colsol[j2];
      }
      if (i0 >= 0) rowsol[i0] = -1;
      rowsol[i] = j1;
      colsol[j1] = i;
      if (i0 >= 0) {
        if (strict && --budget > 0) {
          free_rows[--k] = i0;
        } else {
          free_rows[numfree++] = i0;
        }
      }
    }
  }

  // Shortest augmenting paths for the remaining free rows.
  for (int f = 0; f < numfree; ++f) {
    const int freerow = free_rows[f];
    for (int j = 0; j < n; ++j) {
      d[j] = c(freerow, j) - v[j];
      pred[j] = freerow;
      collist[j] = j;
    }
    int low = 0, up = 0, last = 0, endofpath = -1;
    double m = 0.0;
    bool found = false;
    while (!found) {
      if (up == low) {
        last = low - 1;
        m = d[collist[up++]];
        for (int k = up; k < n; ++k) {
          const int j = collist[k];
          const double h = d[j];
          if (h <= m) {
            if (h < m) {
              up = low;
              m = h;
            }
            collist[k] = collist[up];
            collist[up++] = j;
          }
        }
        for (int k = low; k < up; ++k) {
          if (colsol[collist[k]] < 0) {
            endofpath = collist[k];
            found = true;
            break;
          }
        }
      }
      if (!found) {
        const int j1 = collist[low++];
        const int i = colsol[j1];
        const double h = c(i, j1) - v[j1] - m;
        for (int k = up; k < n; ++k) {
          const int j = collist[k];
          const double v2 = c(i, j) - v[j] - h;
          if (v2 < d[j]) {
            pred[j] = i;
            if (v2 == m) {
              if (colsol[j] < 0) {
                endofpath = j;
                found = true;
                break;
              }
              collist[k] = collist[up];
              collist[up++] = j;
            }
            d[j] = v2;
          }
        }
      }
    }
    for (int k = 0; k <= last; ++k) {
      const int j1 = collist[k];
      v[j1] += d[j1] - m;
    }
    int i;
    do {
      i = pred[endofpath];
      colsol[endofpath] = i;
      const int j1 = endofpath;
      endofpath = rowsol[i];
      rowsol[i] = j1;
    } while (i != freerow);
  }

  AssignmentResult out;
  out.row_to_col = rowsol;
  for (int i = 0; i < n; ++i) {
    require(rowsol[i] >= 0, ErrorCode::kInvalidArgument, "assignment left a row unmatched");
    out.total_cost += c(i, rowsol[i]);
  }
  return out;
}

}  // namespace kergo
