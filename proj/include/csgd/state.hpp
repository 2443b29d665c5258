#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "csgd/geometry.hpp"

namespace csgd {

/// Mutable iterate of the block solvers. Only the coordinator writes it.
struct SolverState {
    std::vector<double> x;  // voxel values
    std::vector<double> r;  // residual over all measurements
    /// z[j][i] = cached A_{I_i}^{J_j} contribution; empty until first touched.
    std::vector<std::vector<std::vector<double>>> z;
    std::vector<double> x_hat;                // last epoch's accumulated proposals (per voxel)
    std::vector<std::size_t> update_counts;  // last epoch's updates per column block
    std::size_t version = 0;                 // committed epochs

    /// x = 0, z = 0, r = y.
    static SolverState initial(const Partition& partition, std::size_t voxels, std::span<const double> y);

    /// y_i - sum_j z^j_i over the rows of one row block, summing j in ascending order.
    void refresh_rows(const Partition& partition, std::size_t row_block, std::span<const double> y);

    /// Recomputes y - sum_j z^j everywhere and returns |r - r_full| / |r_full|.
    double audit(const Partition& partition, std::span<const double> y) const;
};

}  // namespace csgd
