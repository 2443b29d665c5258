#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "csgd/geometry.hpp"

namespace csgd {

/// One ray's intersections with a column block. Columns are local to the block
/// (position in ColBlock::voxels) and strictly increasing.
struct SparseRow {
    std::vector<std::uint32_t> cols;
    std::vector<double> lengths;

    std::size_t size() const { return cols.size(); }
    double sum() const;
};

/// Exact Siddon intersection lengths of the segment source -> target with the
/// voxels of `block`. Voxels own the half-open interval [lo, hi) on each axis.
SparseRow trace_ray(Vec3 source, Vec3 target, const VolumeGrid& grid, const ColBlock& block);

/// Explicit sub-matrix A_I^J in CSR layout; rows follow RowBlock::measurements.
struct BlockMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint32_t> row_ptr{0};
    std::vector<std::uint32_t> col_index;
    std::vector<double> value;

    std::size_t nnz() const { return value.size(); }
    std::size_t bytes() const {
        return row_ptr.size() * sizeof(std::uint32_t) + col_index.size() * sizeof(std::uint32_t) +
               value.size() * sizeof(double);
    }
    friend bool operator==(const BlockMatrix&, const BlockMatrix&) = default;
};

namespace detail {

struct TraceScratch {
    struct Entry {
        std::uint32_t col;
        double length;
    };
    std::vector<Entry> entries;
    std::vector<std::uint32_t> cols;
    std::vector<double> lengths;
};

/// Traces into scratch.cols / scratch.lengths (cleared first), sorted by column.
void trace_into(Vec3 source, Vec3 target, const VolumeGrid& grid, const ColBlock& block, TraceScratch& scratch);

}  // namespace detail

/// Lightweight reference to A_I^J; rows are traced on demand unless a
/// materialized copy is attached.
class SubmatrixHandle {
public:
    SubmatrixHandle(const ScanGeometry& geometry, const Partition& partition, std::size_t row_block,
                    std::size_t col_block, const BlockMatrix* cache = nullptr)
        : geometry_(&geometry), partition_(&partition), row_block_(row_block), col_block_(col_block),
          cache_(cache) {}

    std::size_t row_block() const { return row_block_; }
    std::size_t col_block() const { return col_block_; }
    std::size_t rows() const { return partition_->row_blocks[row_block_].size(); }
    std::size_t cols() const { return partition_->col_blocks[col_block_].size(); }
    bool cached() const { return cache_ != nullptr; }
    const ScanGeometry& geometry() const { return *geometry_; }
    const Partition& partition() const { return *partition_; }

    /// Calls f(local_row, cols, lengths) for every row of the block, in order.
    template <typename F>
    void for_each_row(F&& f) const {
        if (cache_ != nullptr) {
            for (std::size_t r = 0; r < cache_->rows; ++r) {
                const std::size_t b = cache_->row_ptr[r];
                const std::size_t e = cache_->row_ptr[r + 1];
                f(r, std::span<const std::uint32_t>(cache_->col_index.data() + b, e - b),
                  std::span<const double>(cache_->value.data() + b, e - b));
            }
            return;
        }
        detail::TraceScratch scratch;
        const RowBlock& rb = partition_->row_blocks[row_block_];
        const ColBlock& cb = partition_->col_blocks[col_block_];
        for (std::size_t r = 0; r < rb.measurements.size(); ++r) {
            const Ray ray = geometry_->ray(rb.measurements[r]);
            detail::trace_into(ray.source, ray.target, geometry_->grid, cb, scratch);
            f(r, std::span<const std::uint32_t>(scratch.cols), std::span<const double>(scratch.lengths));
        }
    }

private:
    const ScanGeometry* geometry_;
    const Partition* partition_;
    std::size_t row_block_;
    std::size_t col_block_;
    const BlockMatrix* cache_;
};

/// A_I^J x_J.
std::vector<double> apply(const SubmatrixHandle& handle, std::span<const double> x_block);

/// (A_I^J)^T r_I.
std::vector<double> apply_transpose(const SubmatrixHandle& handle, std::span<const double> r_block);

/// Explicit copy of the block. Refuses when it would exceed `budget_bytes`.
BlockMatrix materialize(const SubmatrixHandle& handle,
                        std::size_t budget_bytes = std::numeric_limits<std::size_t>::max());

/// Debug dump: one "measurement voxel length" triplet per line, global indices.
void write_triplets(const SubmatrixHandle& handle, std::ostream& os);

struct ProjectorOptions {
    bool cache_rows = false;
    std::size_t max_cache_bytes = std::size_t{3} << 30;
};

/// Access point to every A_I^J of a partitioned scan. With cache_rows set, all
/// blocks are materialized up front (bit-identical to on-the-fly tracing).
class SystemMatrix {
public:
    SystemMatrix(const ScanGeometry& geometry, const Partition& partition, ProjectorOptions options = {});

    SubmatrixHandle block(std::size_t row_block, std::size_t col_block) const;

    const ScanGeometry& geometry() const { return *geometry_; }
    const Partition& partition() const { return *partition_; }
    bool cached() const { return !cache_.empty(); }
    std::size_t cache_bytes() const { return cache_bytes_; }

    /// Full forward projection A x over all blocks.
    std::vector<double> forward(std::span<const double> x) const;

private:
    const ScanGeometry* geometry_;
    const Partition* partition_;
    std::vector<BlockMatrix> cache_;  // row-major over (row block, col block)
    std::size_t cache_bytes_ = 0;
};

}  // namespace csgd
