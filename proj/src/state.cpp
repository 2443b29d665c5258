#include "csgd/state.hpp"

#include <cmath>

#include "csgd/errors.hpp"

namespace csgd {

SolverState SolverState::initial(const Partition& partition, std::size_t voxels, std::span<const double> y) {
    SolverState s;
    s.x.assign(voxels, 0.0);
    s.r.assign(y.begin(), y.end());
    s.z.assign(partition.col_block_count(), std::vector<std::vector<double>>(partition.row_block_count()));
    s.x_hat.assign(voxels, 0.0);
    s.update_counts.assign(partition.col_block_count(), 0);
    return s;
}

void SolverState::refresh_rows(const Partition& partition, std::size_t row_block, std::span<const double> y) {
    const RowBlock& rb = partition.row_blocks[row_block];
    for (std::size_t r = 0; r < rb.size(); ++r) {
        double v = y[rb.measurements[r]];
        for (const auto& zj : z) {
            if (!zj[row_block].empty()) {
                v -= zj[row_block][r];
            }
        }
        this->r[rb.measurements[r]] = v;
    }
}

double SolverState::audit(const Partition& partition, std::span<const double> y) const {
    if (y.size() != r.size()) {
        throw ContractError("audit: y and r lengths differ");
    }
    std::vector<double> full(y.begin(), y.end());
    for (std::size_t i = 0; i < partition.row_block_count(); ++i) {
        const RowBlock& rb = partition.row_blocks[i];
        for (std::size_t row = 0; row < rb.size(); ++row) {
            double v = y[rb.measurements[row]];
            for (const auto& zj : z) {
                if (!zj[i].empty()) {
                    v -= zj[i][row];
                }
            }
            full[rb.measurements[row]] = v;
        }
    }
    long double diff = 0.0L;
    long double ref = 0.0L;
    for (std::size_t k = 0; k < full.size(); ++k) {
        const long double d = static_cast<long double>(r[k]) - full[k];
        diff += d * d;
        ref += static_cast<long double>(full[k]) * full[k];
    }
    if (ref == 0.0L) {
        return static_cast<double>(std::sqrt(diff));
    }
    return static_cast<double>(std::sqrt(diff / ref));
}

}  // namespace csgd
