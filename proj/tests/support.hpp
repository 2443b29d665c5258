#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "csgd/experiment.hpp"
#include "csgd/geometry.hpp"
#include "csgd/projector.hpp"

namespace testing {

using Dense = std::vector<std::vector<double>>;  // rows x cols

/// A scan assembled by hand, kept at a stable address for the SystemMatrix.
struct Scan {
    csgd::ScanGeometry geometry;
    csgd::Partition partition;
    std::unique_ptr<csgd::SystemMatrix> matrix;

    Scan() = default;
    Scan(const Scan&) = delete;
    Scan& operator=(const Scan&) = delete;
};

inline std::unique_ptr<Scan> make_scan(csgd::ScanGeometry geometry, std::vector<std::size_t> volume_splits,
                                       std::vector<std::size_t> detector_splits, bool cache = false) {
    auto scan = std::make_unique<Scan>();
    scan->geometry = std::move(geometry);
    scan->geometry.validate();
    scan->partition = csgd::make_partition(scan->geometry, volume_splits, detector_splits);
    csgd::ProjectorOptions options;
    options.cache_rows = cache;
    scan->matrix = std::make_unique<csgd::SystemMatrix>(scan->geometry, scan->partition, options);
    return scan;
}

/// Planar fan-beam scan: n x n grid of unit pixels, circular source at `radius`.
inline csgd::ScanGeometry fan_geometry(std::size_t nx, std::size_t ny, std::size_t views, std::size_t pixels,
                                       double radius, double spacing, double angular_start = 0.1) {
    csgd::ScanGeometry g;
    const std::size_t dims[] = {nx, ny};
    const double vs[] = {1.0};
    g.grid = csgd::VolumeGrid::centered(dims, vs);
    g.detector.pixels = {pixels, 1};
    g.detector.spacing = {spacing, 1.0};
    g.poses = csgd::make_circular_trajectory(views, radius, g.grid.center(), angular_start);
    return g;
}

/// Dense copy of the full system matrix in global measurement x voxel indices.
inline Dense dense_matrix(const csgd::SystemMatrix& matrix) {
    const auto& part = matrix.partition();
    Dense a(matrix.geometry().measurement_count(), std::vector<double>(matrix.geometry().grid.voxel_count(), 0.0));
    for (std::size_t i = 0; i < part.row_block_count(); ++i) {
        for (std::size_t j = 0; j < part.col_block_count(); ++j) {
            const auto& rb = part.row_blocks[i];
            const auto& cb = part.col_blocks[j];
            matrix.block(i, j).for_each_row([&](std::size_t r, auto cols, auto vals) {
                for (std::size_t k = 0; k < cols.size(); ++k) {
                    a[rb.measurements[r]][cb.voxels[cols[k]]] = vals[k];
                }
            });
        }
    }
    return a;
}

inline std::vector<double> matvec(const Dense& a, std::span<const double> x) {
    std::vector<double> y(a.size(), 0.0);
    for (std::size_t r = 0; r < a.size(); ++r) {
        long double s = 0.0L;
        for (std::size_t c = 0; c < x.size(); ++c) {
            s += static_cast<long double>(a[r][c]) * x[c];
        }
        y[r] = static_cast<double>(s);
    }
    return y;
}

inline std::vector<double> matvec_t(const Dense& a, std::span<const double> r) {
    std::vector<double> x(a.empty() ? 0 : a[0].size(), 0.0);
    for (std::size_t c = 0; c < x.size(); ++c) {
        long double s = 0.0L;
        for (std::size_t k = 0; k < a.size(); ++k) {
            s += static_cast<long double>(a[k][c]) * r[k];
        }
        x[c] = static_cast<double>(s);
    }
    return x;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    long double s = 0.0L;
    for (std::size_t k = 0; k < a.size(); ++k) {
        s += static_cast<long double>(a[k]) * b[k];
    }
    return static_cast<double>(s);
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double rel_diff(std::span<const double> a, std::span<const double> b) {
    double num = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        num += (a[k] - b[k]) * (a[k] - b[k]);
    }
    const double den = std::max(norm(a), norm(b));
    return den == 0.0 ? std::sqrt(num) : std::sqrt(num) / den;
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& gen, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(n);
    for (double& a : v) {
        a = d(gen);
    }
    return v;
}

/// Slab-method length of the part of segment p0 -> p1 inside the box [lo, hi].
inline double slab_chord(csgd::Vec3 p0, csgd::Vec3 p1, csgd::Vec3 lo, csgd::Vec3 hi) {
    double t0 = 0.0;
    double t1 = 1.0;
    for (int a = 0; a < 3; ++a) {
        const double d = p1[a] - p0[a];
        if (d == 0.0) {
            if (p0[a] < lo[a] || p0[a] > hi[a]) {
                return 0.0;
            }
            continue;
        }
        double ta = (lo[a] - p0[a]) / d;
        double tb = (hi[a] - p0[a]) / d;
        if (ta > tb) {
            std::swap(ta, tb);
        }
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    if (t1 <= t0) {
        return 0.0;
    }
    return (t1 - t0) * csgd::norm(p1 - p0);
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("csgd_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing
