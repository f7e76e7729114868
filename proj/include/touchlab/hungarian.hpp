#pragma once

#include <vector>

namespace touchlab {

struct Assignment {
    std::vector<int> row_to_col;  // -1 when unassigned
    double total_cost = 0.0;      // sum over the assigned rows
};

/// Minimum-cost one-to-one assignment on an n x m matrix (n, m <= 64). The matrix is padded to
/// square with `pad`; rows whose matched cost is >= pad, or that land on padding, are unassigned.
/// Throws NonFiniteCost for NaN/inf entries.
Assignment hungarian_assign(const std::vector<std::vector<double>>& cost, double pad = 1e6);

}  // namespace touchlab
