#pragma once

#include "tphd/error.hpp"

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <vector>

namespace tphd {

struct Assignment {
    std::vector<int> row_to_col;  ///< -1 when the row is unassigned
    double cost = 0.0;
};

/// Minimum-cost assignment on a rectangular cost matrix (Hungarian method
/// with potentials, O(n^2 m)). Every row is assigned when rows <= cols and
/// every column otherwise.
inline Assignment solve_assignment(const Eigen::MatrixXd& cost) {
    const auto rows = static_cast<int>(cost.rows());
    const auto cols = static_cast<int>(cost.cols());
    if (!cost.allFinite()) throw InvalidParameter("assignment costs must be finite");
    Assignment out;
    out.row_to_col.assign(static_cast<std::size_t>(rows), -1);
    if (rows == 0 || cols == 0) return out;

    if (rows > cols) {
        const Assignment t = solve_assignment(cost.transpose());
        for (int c = 0; c < cols; ++c)
            if (t.row_to_col[static_cast<std::size_t>(c)] >= 0)
                out.row_to_col[static_cast<std::size_t>(t.row_to_col[static_cast<std::size_t>(c)])] = c;
        out.cost = t.cost;
        return out;
    }

    const int n = rows, m = cols;
    constexpr double inf = std::numeric_limits<double>::infinity();
    // 1-based potentials; p[j] is the row matched to column j, 0 for none.
    std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(m) + 1, 0.0);
    std::vector<int> p(static_cast<std::size_t>(m) + 1, 0), way(static_cast<std::size_t>(m) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<std::size_t>(m) + 1, inf);
        std::vector<char> used(static_cast<std::size_t>(m) + 1, 0);
        do {
            used[static_cast<std::size_t>(j0)] = 1;
            const int i0 = p[static_cast<std::size_t>(j0)];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= m; ++j) {
                if (used[static_cast<std::size_t>(j)]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
                if (cur < minv[static_cast<std::size_t>(j)]) {
                    minv[static_cast<std::size_t>(j)] = cur;
                    way[static_cast<std::size_t>(j)] = j0;
                }
                if (minv[static_cast<std::size_t>(j)] < delta) {
                    delta = minv[static_cast<std::size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[static_cast<std::size_t>(j)]) {
                    u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
                    v[static_cast<std::size_t>(j)] -= delta;
                } else {
                    minv[static_cast<std::size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<std::size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<std::size_t>(j0)];
            p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    for (int j = 1; j <= m; ++j)
        if (p[static_cast<std::size_t>(j)] != 0) out.row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
    for (int i = 0; i < n; ++i) out.cost += cost(i, out.row_to_col[static_cast<std::size_t>(i)]);
    return out;
}

}  // namespace tphd
