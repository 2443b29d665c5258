#include "csgd/projector.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "csgd/errors.hpp"

namespace csgd {
namespace {

constexpr double kParamEps = 1e-12;

}  // namespace

double SparseRow::sum() const {
    long double acc = 0.0L;
    for (double v : lengths) {
        acc += v;
    }
    return static_cast<double>(acc);
}

namespace detail {

void trace_into(Vec3 source, Vec3 target, const VolumeGrid& grid, const ColBlock& block, TraceScratch& scratch) {
    scratch.entries.clear();
    scratch.cols.clear();
    scratch.lengths.clear();

    const Vec3 d = target - source;
    const double length = norm(d);
    if (!(length > 0.0)) {
        throw GeometryError("degenerate ray: source equals detector pixel centre");
    }
    const Cuboid box = block.bounds(grid);

    // Slab clip of t in [0, 1]; rays parallel to an axis use the half-open voxel convention.
    double t_min = 0.0;
    double t_max = 1.0;
    for (int a = 0; a < 3; ++a) {
        const double s = source[a];
        const double da = d[a];
        if (da == 0.0) {
            if (s < box.lo[a] || s >= box.hi[a]) {
                return;
            }
            continue;
        }
        double t0 = (box.lo[a] - s) / da;
        double t1 = (box.hi[a] - s) / da;
        if (t0 > t1) {
            std::swap(t0, t1);
        }
        t_min = std::max(t_min, t0);
        t_max = std::min(t_max, t1);
    }
    if (t_max - t_min <= kParamEps) {
        return;
    }

    std::array<long, 3> idx{};
    std::array<long, 3> lo{};
    std::array<long, 3> hi{};
    std::array<double, 3> t_next{};
    for (int a = 0; a < 3; ++a) {
        lo[a] = static_cast<long>(block.lo[a]);
        hi[a] = static_cast<long>(block.hi[a]);
        const double p = source[a] + t_min * d[a];
        const auto cell = static_cast<long>(std::floor((p - grid.origin[a]) / grid.voxel_size[a]));
        idx[a] = std::clamp(cell, lo[a], hi[a] - 1);
    }
    auto next_crossing = [&](int a) {
        if (d[a] > 0.0) {
            return (grid.origin[a] + static_cast<double>(idx[a] + 1) * grid.voxel_size[a] - source[a]) / d[a];
        }
        if (d[a] < 0.0) {
            return (grid.origin[a] + static_cast<double>(idx[a]) * grid.voxel_size[a] - source[a]) / d[a];
        }
        return std::numeric_limits<double>::infinity();
    };
    for (int a = 0; a < 3; ++a) {
        t_next[a] = next_crossing(a);
    }

    const std::size_t w0 = block.hi[0] - block.lo[0];
    const std::size_t w1 = block.hi[1] - block.lo[1];
    double t = t_min;
    for (;;) {
        int a = 0;
        if (t_next[1] < t_next[a]) {
            a = 1;
        }
        if (t_next[2] < t_next[a]) {
            a = 2;
        }
        const double t_end = std::min(t_next[a], t_max);
        if (t_end - t > kParamEps) {
            const std::size_t local = static_cast<std::size_t>(idx[0] - lo[0]) +
                                      w0 * (static_cast<std::size_t>(idx[1] - lo[1]) +
                                            w1 * static_cast<std::size_t>(idx[2] - lo[2]));
            scratch.entries.push_back({static_cast<std::uint32_t>(local), (t_end - t) * length});
        }
        if (t_next[a] >= t_max) {
            break;
        }
        t = std::max(t, t_end);
        idx[a] += d[a] > 0.0 ? 1 : -1;
        if (idx[a] < lo[a] || idx[a] >= hi[a]) {
            break;
        }
        t_next[a] = next_crossing(a);
    }

    std::sort(scratch.entries.begin(), scratch.entries.end(),
              [](const TraceScratch::Entry& x, const TraceScratch::Entry& y) { return x.col < y.col; });
    scratch.cols.reserve(scratch.entries.size());
    scratch.lengths.reserve(scratch.entries.size());
    for (const auto& e : scratch.entries) {
        // a voxel can only be visited once along a straight line, but guard anyway
        if (!scratch.cols.empty() && scratch.cols.back() == e.col) {
            scratch.lengths.back() += e.length;
            continue;
        }
        scratch.cols.push_back(e.col);
        scratch.lengths.push_back(e.length);
    }
}

}  // namespace detail

SparseRow trace_ray(Vec3 source, Vec3 target, const VolumeGrid& grid, const ColBlock& block) {
    detail::TraceScratch scratch;
    detail::trace_into(source, target, grid, block, scratch);
    return {std::move(scratch.cols), std::move(scratch.lengths)};
}

std::vector<double> apply(const SubmatrixHandle& handle, std::span<const double> x_block) {
    if (x_block.size() != handle.cols()) {
        throw ContractError("apply: x_J has " + std::to_string(x_block.size()) + " entries, block has " +
                            std::to_string(handle.cols()) + " columns");
    }
    std::vector<double> out(handle.rows(), 0.0);
    handle.for_each_row([&](std::size_t r, std::span<const std::uint32_t> cols, std::span<const double> vals) {
        long double acc = 0.0L;
        for (std::size_t k = 0; k < cols.size(); ++k) {
            acc += static_cast<long double>(vals[k]) * x_block[cols[k]];
        }
        out[r] = static_cast<double>(acc);
    });
    return out;
}

std::vector<double> apply_transpose(const SubmatrixHandle& handle, std::span<const double> r_block) {
    if (r_block.size() != handle.rows()) {
        throw ContractError("apply_transpose: r_I has " + std::to_string(r_block.size()) +
                            " entries, block has " + std::to_string(handle.rows()) + " rows");
    }
    std::vector<long double> acc(handle.cols(), 0.0L);
    handle.for_each_row([&](std::size_t r, std::span<const std::uint32_t> cols, std::span<const double> vals) {
        const long double rv = r_block[r];
        for (std::size_t k = 0; k < cols.size(); ++k) {
            acc[cols[k]] += static_cast<long double>(vals[k]) * rv;
        }
    });
    return {acc.begin(), acc.end()};
}

BlockMatrix materialize(const SubmatrixHandle& handle, std::size_t budget_bytes) {
    BlockMatrix m;
    m.rows = handle.rows();
    m.cols = handle.cols();
    m.row_ptr.reserve(m.rows + 1);
    handle.for_each_row([&](std::size_t r, std::span<const std::uint32_t> cols, std::span<const double> vals) {
        m.col_index.insert(m.col_index.end(), cols.begin(), cols.end());
        m.value.insert(m.value.end(), vals.begin(), vals.end());
        if (m.value.size() > std::numeric_limits<std::uint32_t>::max()) {
            throw ResourceError("block (" + std::to_string(handle.row_block()) + "," +
                                std::to_string(handle.col_block()) + ") exceeds 32-bit nonzero indexing");
        }
        m.row_ptr.push_back(static_cast<std::uint32_t>(m.value.size()));
        const std::size_t used = (r + 2) * sizeof(std::uint32_t) + m.nnz() * (sizeof(std::uint32_t) + sizeof(double));
        if (used > budget_bytes) {
            throw ResourceError("materializing block (" + std::to_string(handle.row_block()) + "," +
                                std::to_string(handle.col_block()) + ") needs more than " +
                                std::to_string(budget_bytes) + " bytes (" + std::to_string(used) +
                                " used after " + std::to_string(r + 1) + " of " + std::to_string(m.rows) +
                                " rows)");
        }
    });
    return m;
}

void write_triplets(const SubmatrixHandle& handle, std::ostream& os) {
    const RowBlock& rb = handle.partition().row_blocks[handle.row_block()];
    const ColBlock& cb = handle.partition().col_blocks[handle.col_block()];
    const auto old_precision = os.precision(17);
    handle.for_each_row([&](std::size_t r, std::span<const std::uint32_t> cols, std::span<const double> vals) {
        for (std::size_t k = 0; k < cols.size(); ++k) {
            os << rb.measurements[r] << ' ' << cb.voxels[cols[k]] << ' ' << vals[k] << '\n';
        }
    });
    os.precision(old_precision);
}

SystemMatrix::SystemMatrix(const ScanGeometry& geometry, const Partition& partition, ProjectorOptions options)
    : geometry_(&geometry), partition_(&partition) {
    if (!options.cache_rows) {
        return;
    }
    const std::size_t m = partition.row_block_count();
    const std::size_t n = partition.col_block_count();
    cache_.reserve(m * n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            SubmatrixHandle h(geometry, partition, i, j);
            cache_.push_back(materialize(h, options.max_cache_bytes - cache_bytes_));
            cache_bytes_ += cache_.back().bytes();
        }
    }
}

SubmatrixHandle SystemMatrix::block(std::size_t row_block, std::size_t col_block) const {
    const BlockMatrix* cached =
        cache_.empty() ? nullptr : &cache_[row_block * partition_->col_block_count() + col_block];
    return {*geometry_, *partition_, row_block, col_block, cached};
}

std::vector<double> SystemMatrix::forward(std::span<const double> x) const {
    if (x.size() != geometry_->grid.voxel_count()) {
        throw ContractError("forward: x has " + std::to_string(x.size()) + " entries, grid has " +
                            std::to_string(geometry_->grid.voxel_count()));
    }
    std::vector<double> y(geometry_->measurement_count(), 0.0);
    std::vector<double> x_block;
    for (std::size_t j = 0; j < partition_->col_block_count(); ++j) {
        const ColBlock& cb = partition_->col_blocks[j];
        x_block.resize(cb.size());
        for (std::size_t k = 0; k < cb.size(); ++k) {
            x_block[k] = x[cb.voxels[k]];
        }
        for (std::size_t i = 0; i < partition_->row_block_count(); ++i) {
            const auto part = csgd::apply(block(i, j), std::span<const double>(x_block));
            const RowBlock& rb = partition_->row_blocks[i];
            for (std::size_t r = 0; r < part.size(); ++r) {
                y[rb.measurements[r]] += part[r];
            }
        }
    }
    return y;
}

}  // namespace csgd
