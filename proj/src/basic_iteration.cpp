#include "csgd/basic_iteration.hpp"

#include <cmath>
#include <string>

#include "csgd/errors.hpp"

namespace csgd {

BasicStep basic_iteration(const SystemMatrix& matrix, std::span<const std::size_t> row_blocks,
                          std::size_t col_block, std::span<const double> r_rows, std::span<const double> x_block,
                          double beta) {
    if (!(beta >= 0.0) || !std::isfinite(beta)) {
        throw ContractError("basic_iteration: beta must be finite and non-negative");
    }
    const std::size_t cols = matrix.partition().col_blocks[col_block].size();
    if (x_block.size() != cols) {
        throw ContractError("basic_iteration: x_J has " + std::to_string(x_block.size()) + " entries, block has " +
                            std::to_string(cols));
    }
    // Trace each block once; on-the-fly handles get a private copy for the three passes.
    std::vector<BlockMatrix> local;
    std::vector<SubmatrixHandle> handles;
    std::size_t rows = 0;
    handles.reserve(row_blocks.size());
    local.reserve(row_blocks.size());
    for (std::size_t i : row_blocks) {
        SubmatrixHandle h = matrix.block(i, col_block);
        if (!h.cached()) {
            local.push_back(materialize(h));
            h = SubmatrixHandle(matrix.geometry(), matrix.partition(), i, col_block, &local.back());
        }
        rows += h.rows();
        handles.push_back(h);
    }
    if (r_rows.size() != rows) {
        throw ContractError("basic_iteration: r_I has " + std::to_string(r_rows.size()) + " entries, group has " +
                            std::to_string(rows) + " rows");
    }

    std::vector<long double> g_acc(cols, 0.0L);
    std::size_t offset = 0;
    for (const auto& h : handles) {
        h.for_each_row([&](std::size_t r, std::span<const std::uint32_t> c, std::span<const double> v) {
            const long double rv = r_rows[offset + r];
            for (std::size_t k = 0; k < c.size(); ++k) {
                g_acc[c[k]] += static_cast<long double>(v[k]) * rv;
            }
        });
        offset += h.rows();
    }
    std::vector<double> g(cols);
    long double gg = 0.0L;
    for (std::size_t k = 0; k < cols; ++k) {
        g[k] = static_cast<double>(g_acc[k]);
        gg += static_cast<long double>(g[k]) * g[k];
    }

    BasicStep step;
    step.gradient_norm_sq = static_cast<double>(gg);
    step.z.resize(rows);
    std::vector<double> ag(rows);
    long double denom = 0.0L;
    offset = 0;
    for (const auto& h : handles) {
        h.for_each_row([&](std::size_t r, std::span<const std::uint32_t> c, std::span<const double> v) {
            long double dg = 0.0L;
            long double dx = 0.0L;
            for (std::size_t k = 0; k < c.size(); ++k) {
                dg += static_cast<long double>(v[k]) * g[c[k]];
                dx += static_cast<long double>(v[k]) * x_block[c[k]];
            }
            ag[offset + r] = static_cast<double>(dg);
            step.z[offset + r] = static_cast<double>(dx);
            denom += dg * dg;
        });
        offset += h.rows();
    }

    step.x_new.assign(x_block.begin(), x_block.end());
    if (gg == 0.0L) {
        return step;
    }
    if (denom < kNullSpaceTolerance) {
        step.null_space = true;
        return step;
    }
    step.mu = static_cast<double>(static_cast<long double>(beta) * gg / denom);
    for (std::size_t k = 0; k < cols; ++k) {
        step.x_new[k] += step.mu * g[k];
    }
    for (std::size_t r = 0; r < rows; ++r) {
        step.z[r] += step.mu * ag[r];
    }
    return step;
}

}  // namespace csgd
