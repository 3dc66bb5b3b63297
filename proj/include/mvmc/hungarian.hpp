#pragma once

#include <Eigen/Dense>
#include <limits>
#include <vector>

namespace mvmc {

struct AssignmentSolution {
  std::vector<int> row_to_col;  // -1 where unassigned
  double total_cost = 0.0;
};

/// Optimal bipartite assignment (Hungarian algorithm with potentials,
/// O(n^2 m)). Minimizes the sum of cost(i, row_to_col[i]) over assigned rows.
/// Entries >= forbidden_above are treated as unassignable; rows left without
/// an admissible column come back as -1.
inline AssignmentSolution solve_assignment(
    const Eigen::MatrixXd& cost,
    double forbidden_above = std::numeric_limits<double>::infinity()) {
  const int nr = static_cast<int>(cost.rows());
  const int nc = static_cast<int>(cost.cols());
  AssignmentSolution out;
  out.row_to_col.assign(nr, -1);
  if (nr == 0 || nc == 0) return out;

  // Work on a matrix with rows <= cols; transpose if needed.
  const bool transposed = nr > nc;
  const Eigen::MatrixXd a = transposed ? cost.transpose() : cost;
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(a.cols());

  // Forbidden entries become a large finite cost so the algorithm can always
  // complete; such matches are stripped afterwards.
  const double big = 1e15;
  auto entry = [&](int i, int j) {
    const double c = a(i, j);
    return (c >= forbidden_above || !std::isfinite(c)) ? big : c;
  };

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1, 0);

  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = entry(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }

  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j) {
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  }
  for (int i = 0; i < n; ++i) {
    const int j = row_to_col[i];
    if (j < 0) continue;
    if (entry(i, j) >= big) {
      row_to_col[i] = -1;  // gated pair
      continue;
    }
    const int r = transposed ? j : i;
    const int c = transposed ? i : j;
    out.row_to_col[r] = c;
    out.total_cost += cost(r, c);
  }
  return out;
}

}  // namespace mvmc
