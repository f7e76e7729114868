#include "touchlab/hungarian.hpp"

#include <cmath>
#include <limits>

#include "touchlab/common.hpp"

namespace touchlab {

Assignment hungarian_assign(const std::vector<std::vector<double>>& cost, double pad) {
    const int n = static_cast<int>(cost.size());
    const int m = n ? static_cast<int>(cost[0].size()) : 0;
    if (n > 64 || m > 64) throw Error(ErrorCode::InvalidArgument, "assignment matrix larger than 64");
    for (const auto& row : cost) {
        if (static_cast<int>(row.size()) != m) throw Error(ErrorCode::InvalidArgument, "ragged cost matrix");
        for (double c : row) {
            if (!std::isfinite(c)) throw Error(ErrorCode::NonFiniteCost, "cost matrix contains a non-finite entry");
        }
    }
    Assignment out;
    out.row_to_col.assign(n, -1);
    if (n == 0 || m == 0) return out;

    const int N = std::max(n, m);
    auto a = [&](int i, int j) { return (i < n && j < m) ? cost[i][j] : pad; };

    // Shortest augmenting path with potentials; 1-based with a virtual column 0.
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> u(N + 1, 0.0), v(N + 1, 0.0);
    std::vector<int> p(N + 1, 0), way(N + 1, 0);
    for (int i = 1; i <= N; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(N + 1, kInf);
        std::vector<char> used(N + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = kInf;
            int j1 = 0;
            for (int j = 1; j <= N; ++j) {
                if (used[j]) continue;
                const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= N; ++j) {
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

    for (int j = 1; j <= N; ++j) {
        const int i = p[j] - 1;
        const int c = j - 1;
        if (i >= n || c >= m) continue;
        if (cost[i][c] >= pad) continue;
        out.row_to_col[i] = c;
        out.total_cost += cost[i][c];
    }
    return out;
}

}  // namespace touchlab
