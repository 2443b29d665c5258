#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csgd/vec3.hpp"

namespace csgd {

/// Regular voxel grid. Planar problems are stored as one voxel thick (dims[2] == 1, rank 2).
struct VolumeGrid {
    std::array<std::size_t, 3> dims{1, 1, 1};
    std::array<double, 3> voxel_size{1.0, 1.0, 1.0};
    Vec3 origin;  // physical position of the low corner
    int rank = 3;

    /// Grid of the given dims (2 or 3 entries) centred on `center`.
    /// A 2-entry grid gets unit thickness equal to the first voxel size.
    static VolumeGrid centered(std::span<const std::size_t> dims, std::span<const double> voxel_size,
                               Vec3 center = {});

    std::size_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }

    std::size_t linear_index(std::size_t i, std::size_t j, std::size_t k) const {
        return i + dims[0] * (j + dims[1] * k);
    }

    Vec3 upper_corner() const {
        return {origin.x + voxel_size[0] * static_cast<double>(dims[0]),
                origin.y + voxel_size[1] * static_cast<double>(dims[1]),
                origin.z + voxel_size[2] * static_cast<double>(dims[2])};
    }

    Vec3 center() const { return 0.5 * (origin + upper_corner()); }

    void validate() const;
};

struct ViewPose {
    Vec3 source;
    Vec3 detector_center;
    Vec3 axis_u;  // along detector columns
    Vec3 axis_v;  // along detector rows
    std::array<double, 2> params{0.0, 0.0};  // (theta, 0) circular, (a, b) sphere
};

/// Flat detector. Index 0 is the column (u) axis, index 1 the row (v) axis.
struct DetectorModel {
    std::array<std::size_t, 2> pixels{1, 1};
    std::array<double, 2> spacing{1.0, 1.0};

    std::size_t pixels_per_view() const { return pixels[0] * pixels[1]; }

    /// In-plane offset of a pixel centre from the detector centre.
    double u_offset(std::size_t col) const {
        return (static_cast<double>(col) - 0.5 * static_cast<double>(pixels[0] - 1)) * spacing[0];
    }
    double v_offset(std::size_t row) const {
        return (static_cast<double>(row) - 0.5 * static_cast<double>(pixels[1] - 1)) * spacing[1];
    }

    void validate() const;
};

/// Axis-aligned rectangle in detector (u, v) coordinates.
struct DetectorRect {
    double u0 = 0.0, u1 = 0.0, v0 = 0.0, v1 = 0.0;
};

/// Axis-aligned box in physical coordinates.
struct Cuboid {
    Vec3 lo;
    Vec3 hi;
};

struct Ray {
    Vec3 source;
    Vec3 target;
};

struct ScanGeometry {
    VolumeGrid grid;
    DetectorModel detector;
    std::vector<ViewPose> poses;

    std::size_t measurement_count() const { return poses.size() * detector.pixels_per_view(); }

    /// Global measurement index = view * pixels_per_view + row * cols + col.
    std::size_t measurement_index(std::size_t view, std::size_t row, std::size_t col) const {
        return view * detector.pixels_per_view() + row * detector.pixels[0] + col;
    }

    Vec3 pixel_center(std::size_t view, std::size_t row, std::size_t col) const;
    Ray ray(std::size_t measurement) const;

    void validate() const;
};

std::vector<ViewPose> make_circular_trajectory(std::size_t n_views, double radius, Vec3 rotation_center,
                                               double angular_start);

std::vector<ViewPose> make_random_sphere_trajectory(std::size_t n_views, double radius,
                                                    double source_detector_distance, std::uint64_t seed,
                                                    Vec3 rotation_center = {});

/// Boundaries of `parts` consecutive chunks of ceil(length/parts) cells; the last
/// chunk takes what is left. Returns parts + 1 offsets.
std::vector<std::size_t> split_axis(std::size_t length, std::size_t parts);

/// Column block: a cuboid of voxels [lo, hi) per axis.
struct ColBlock {
    std::array<std::size_t, 3> lo{0, 0, 0};
    std::array<std::size_t, 3> hi{0, 0, 0};
    std::vector<std::size_t> voxels;  // ascending global voxel indices

    std::size_t size() const { return voxels.size(); }
    Cuboid bounds(const VolumeGrid& grid) const;
};

/// Row block: one detector sub-rectangle of one view.
struct RowBlock {
    std::size_t view = 0;
    std::array<std::size_t, 2> pixel_lo{0, 0};  // (col, row)
    std::array<std::size_t, 2> pixel_hi{0, 0};
    std::vector<std::size_t> measurements;  // ascending global measurement indices

    std::size_t size() const { return measurements.size(); }
    DetectorRect rect(const DetectorModel& detector) const;
};

struct Partition {
    std::vector<RowBlock> row_blocks;
    std::vector<ColBlock> col_blocks;

    std::size_t row_block_count() const { return row_blocks.size(); }
    std::size_t col_block_count() const { return col_blocks.size(); }

    /// Checks exact disjoint coverage of both index ranges.
    void validate(std::size_t measurements, std::size_t voxels) const;
};

std::vector<ColBlock> partition_volume(const VolumeGrid& grid, std::span<const std::size_t> splits_per_axis);

std::vector<RowBlock> partition_detector(const DetectorModel& detector, std::size_t n_views,
                                         std::span<const std::size_t> splits_per_axis);

Partition make_partition(const ScanGeometry& geometry, std::span<const std::size_t> volume_splits,
                         std::span<const std::size_t> detector_splits);

/// Area of the perspective shadow of `volume_block` that lands inside `detector_block`.
double projection_overlap(const ViewPose& pose, const DetectorRect& detector_block, const Cuboid& volume_block);

/// P(I, J) projection-overlap weights and per-column totals P_T(J).
struct ProbabilityTable {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> weights;  // row-major rows x cols
    std::vector<double> totals;   // per column block
    std::vector<std::string> warnings;

    double operator()(std::size_t i, std::size_t j) const { return weights[i * cols + j]; }
    double total(std::size_t j) const { return totals[j]; }
    bool excluded(std::size_t j) const { return !(totals[j] > 0.0); }

    std::vector<double> column(std::size_t j) const;
};

ProbabilityTable build_probability_table(const ScanGeometry& geometry, const Partition& partition);

}  // namespace csgd
