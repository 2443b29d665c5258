#include "csgd/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "csgd/errors.hpp"
#include "csgd/polygon.hpp"
#include "csgd/rng.hpp"

namespace csgd {
namespace {

std::string describe(std::span<const std::size_t> values) {
    std::ostringstream os;
    for (std::size_t k = 0; k < values.size(); ++k) {
        os << (k ? "," : "") << values[k];
    }
    return os.str();
}

// Orthonormal detector axes for a viewing direction w; u is horizontal when possible.
std::pair<Vec3, Vec3> detector_axes(Vec3 w) {
    const Vec3 up = std::abs(w.z) < 0.9 ? Vec3{0.0, 0.0, 1.0} : Vec3{1.0, 0.0, 0.0};
    const Vec3 u = normalized(cross(up, w));
    const Vec3 v = cross(w, u);
    return {u, v};
}

}  // namespace

VolumeGrid VolumeGrid::centered(std::span<const std::size_t> dims, std::span<const double> voxel_size,
                                Vec3 center) {
    if (dims.size() != 2 && dims.size() != 3) {
        throw ConfigError("volume grid needs 2 or 3 dims, got " + std::to_string(dims.size()));
    }
    if (voxel_size.size() != 1 && voxel_size.size() != dims.size()) {
        throw ConfigError("voxel_size must have 1 or " + std::to_string(dims.size()) + " entries");
    }
    VolumeGrid grid;
    grid.rank = static_cast<int>(dims.size());
    for (std::size_t a = 0; a < 3; ++a) {
        grid.dims[a] = a < dims.size() ? dims[a] : 1;
        // planar grids take their slab thickness from the first axis
        grid.voxel_size[a] = voxel_size.size() == 1 || a >= voxel_size.size() ? voxel_size[0] : voxel_size[a];
    }
    grid.validate();
    const Vec3 extent{grid.voxel_size[0] * static_cast<double>(grid.dims[0]),
                      grid.voxel_size[1] * static_cast<double>(grid.dims[1]),
                      grid.voxel_size[2] * static_cast<double>(grid.dims[2])};
    grid.origin = center - 0.5 * extent;
    return grid;
}

void VolumeGrid::validate() const {
    for (std::size_t a = 0; a < 3; ++a) {
        if (dims[a] < 1) {
            throw ConfigError("volume dims must be >= 1");
        }
        if (!(voxel_size[a] > 0.0) || !std::isfinite(voxel_size[a])) {
            throw ConfigError("voxel sizes must be positive");
        }
    }
    if (rank == 2 && dims[2] != 1) {
        throw ConfigError("planar grid must be one voxel thick");
    }
}

void DetectorModel::validate() const {
    for (std::size_t a = 0; a < 2; ++a) {
        if (pixels[a] < 1) {
            throw ConfigError("detector pixel counts must be >= 1");
        }
        if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
            throw ConfigError("detector pixel spacing must be positive");
        }
    }
}

Vec3 ScanGeometry::pixel_center(std::size_t view, std::size_t row, std::size_t col) const {
    const ViewPose& pose = poses[view];
    return pose.detector_center + detector.u_offset(col) * pose.axis_u + detector.v_offset(row) * pose.axis_v;
}

Ray ScanGeometry::ray(std::size_t measurement) const {
    const std::size_t ppv = detector.pixels_per_view();
    const std::size_t view = measurement / ppv;
    const std::size_t pixel = measurement % ppv;
    return {poses[view].source, pixel_center(view, pixel / detector.pixels[0], pixel % detector.pixels[0])};
}

void ScanGeometry::validate() const {
    grid.validate();
    detector.validate();
    if (poses.empty()) {
        throw ConfigError("scan geometry has no views");
    }
    for (std::size_t k = 0; k < poses.size(); ++k) {
        const ViewPose& p = poses[k];
        const Vec3 w = p.detector_center - p.source;
        const double len = norm(w);
        if (!(len > 0.0)) {
            throw GeometryError("view " + std::to_string(k) + ": source coincides with detector centre");
        }
        if (std::abs(dot(w, p.axis_u)) > 1e-9 * len || std::abs(dot(w, p.axis_v)) > 1e-9 * len) {
            throw GeometryError("view " + std::to_string(k) + ": detector plane not perpendicular to central ray");
        }
    }
}

std::vector<ViewPose> make_circular_trajectory(std::size_t n_views, double radius, Vec3 rotation_center,
                                               double angular_start) {
    if (n_views == 0) {
        throw ConfigError("circular trajectory needs at least one view");
    }
    if (!(radius > 0.0) || !std::isfinite(radius)) {
        throw ConfigError("circular trajectory radius must be positive");
    }
    std::vector<ViewPose> poses;
    poses.reserve(n_views);
    for (std::size_t k = 0; k < n_views; ++k) {
        const double theta =
            angular_start + 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_views);
        const Vec3 dir{std::cos(theta), std::sin(theta), 0.0};
        ViewPose pose;
        pose.source = rotation_center + radius * dir;
        pose.detector_center = rotation_center - radius * dir;
        pose.axis_u = {-dir.y, dir.x, 0.0};
        pose.axis_v = {0.0, 0.0, 1.0};
        pose.params = {theta, 0.0};
        poses.push_back(pose);
    }
    return poses;
}

std::vector<ViewPose> make_random_sphere_trajectory(std::size_t n_views, double radius,
                                                    double source_detector_distance, std::uint64_t seed,
                                                    Vec3 rotation_center) {
    if (n_views == 0) {
        throw ConfigError("random trajectory needs at least one view");
    }
    if (!(radius > 0.0) || !(source_detector_distance > 0.0)) {
        throw ConfigError("random trajectory radius and source-detector distance must be positive");
    }
    Rng rng(seed);
    std::vector<ViewPose> poses;
    poses.reserve(n_views);
    for (std::size_t k = 0; k < n_views; ++k) {
        const double a = std::numbers::pi * rng.uniform();
        const double b = 2.0 * std::numbers::pi * rng.uniform();
        const Vec3 offset{radius * std::sin(a) * std::cos(b), radius * std::sin(a) * std::sin(b),
                          radius * std::cos(a)};
        const Vec3 w = normalized(-1.0 * offset);
        const auto [u, v] = detector_axes(w);
        ViewPose pose;
        pose.source = rotation_center + offset;
        pose.detector_center = pose.source + source_detector_distance * w;
        pose.axis_u = u;
        pose.axis_v = v;
        pose.params = {a, b};
        poses.push_back(pose);
    }
    return poses;
}

std::vector<std::size_t> split_axis(std::size_t length, std::size_t parts) {
    if (parts == 0) {
        throw ConfigError("split count must be >= 1");
    }
    if (parts > length) {
        throw ConfigError("split count " + std::to_string(parts) + " exceeds axis size " + std::to_string(length));
    }
    const std::size_t chunk = (length + parts - 1) / parts;
    if ((parts - 1) * chunk >= length) {
        throw ConfigError("splitting " + std::to_string(length) + " cells into " + std::to_string(parts) +
                          " blocks of " + std::to_string(chunk) + " leaves the last block empty");
    }
    std::vector<std::size_t> bounds(parts + 1);
    for (std::size_t k = 0; k < parts; ++k) {
        bounds[k] = k * chunk;
    }
    bounds[parts] = length;
    return bounds;
}

Cuboid ColBlock::bounds(const VolumeGrid& grid) const {
    Cuboid c;
    c.lo = {grid.origin.x + grid.voxel_size[0] * static_cast<double>(lo[0]),
            grid.origin.y + grid.voxel_size[1] * static_cast<double>(lo[1]),
            grid.origin.z + grid.voxel_size[2] * static_cast<double>(lo[2])};
    c.hi = {grid.origin.x + grid.voxel_size[0] * static_cast<double>(hi[0]),
            grid.origin.y + grid.voxel_size[1] * static_cast<double>(hi[1]),
            grid.origin.z + grid.voxel_size[2] * static_cast<double>(hi[2])};
    return c;
}

DetectorRect RowBlock::rect(const DetectorModel& detector) const {
    const double half_u = 0.5 * static_cast<double>(detector.pixels[0]);
    const double half_v = 0.5 * static_cast<double>(detector.pixels[1]);
    return {(static_cast<double>(pixel_lo[0]) - half_u) * detector.spacing[0],
            (static_cast<double>(pixel_hi[0]) - half_u) * detector.spacing[0],
            (static_cast<double>(pixel_lo[1]) - half_v) * detector.spacing[1],
            (static_cast<double>(pixel_hi[1]) - half_v) * detector.spacing[1]};
}

std::vector<ColBlock> partition_volume(const VolumeGrid& grid, std::span<const std::size_t> splits_per_axis) {
    grid.validate();
    if (splits_per_axis.size() != static_cast<std::size_t>(grid.rank) && splits_per_axis.size() != 3) {
        throw ConfigError("volume splits (" + describe(splits_per_axis) + ") do not match grid rank " +
                          std::to_string(grid.rank));
    }
    std::array<std::vector<std::size_t>, 3> bounds;
    for (std::size_t a = 0; a < 3; ++a) {
        const std::size_t parts = a < splits_per_axis.size() ? splits_per_axis[a] : 1;
        bounds[a] = split_axis(grid.dims[a], parts);
    }
    std::vector<ColBlock> blocks;
    for (std::size_t bk = 0; bk + 1 < bounds[2].size(); ++bk) {
        for (std::size_t bj = 0; bj + 1 < bounds[1].size(); ++bj) {
            for (std::size_t bi = 0; bi + 1 < bounds[0].size(); ++bi) {
                ColBlock block;
                block.lo = {bounds[0][bi], bounds[1][bj], bounds[2][bk]};
                block.hi = {bounds[0][bi + 1], bounds[1][bj + 1], bounds[2][bk + 1]};
                block.voxels.reserve((block.hi[0] - block.lo[0]) * (block.hi[1] - block.lo[1]) *
                                     (block.hi[2] - block.lo[2]));
                for (std::size_t k = block.lo[2]; k < block.hi[2]; ++k) {
                    for (std::size_t j = block.lo[1]; j < block.hi[1]; ++j) {
                        for (std::size_t i = block.lo[0]; i < block.hi[0]; ++i) {
                            block.voxels.push_back(grid.linear_index(i, j, k));
                        }
                    }
                }
                blocks.push_back(std::move(block));
            }
        }
    }
    return blocks;
}

std::vector<RowBlock> partition_detector(const DetectorModel& detector, std::size_t n_views,
                                         std::span<const std::size_t> splits_per_axis) {
    detector.validate();
    if (splits_per_axis.empty() || splits_per_axis.size() > 2) {
        throw ConfigError("detector splits need 1 or 2 entries, got (" + describe(splits_per_axis) + ")");
    }
    const auto cols = split_axis(detector.pixels[0], splits_per_axis[0]);
    const auto rows = split_axis(detector.pixels[1], splits_per_axis.size() > 1 ? splits_per_axis[1] : 1);
    const std::size_t ppv = detector.pixels_per_view();
    std::vector<RowBlock> blocks;
    blocks.reserve(n_views * (cols.size() - 1) * (rows.size() - 1));
    for (std::size_t view = 0; view < n_views; ++view) {
        for (std::size_t br = 0; br + 1 < rows.size(); ++br) {
            for (std::size_t bc = 0; bc + 1 < cols.size(); ++bc) {
                RowBlock block;
                block.view = view;
                block.pixel_lo = {cols[bc], rows[br]};
                block.pixel_hi = {cols[bc + 1], rows[br + 1]};
                for (std::size_t r = rows[br]; r < rows[br + 1]; ++r) {
                    for (std::size_t c = cols[bc]; c < cols[bc + 1]; ++c) {
                        block.measurements.push_back(view * ppv + r * detector.pixels[0] + c);
                    }
                }
                blocks.push_back(std::move(block));
            }
        }
    }
    return blocks;
}

Partition make_partition(const ScanGeometry& geometry, std::span<const std::size_t> volume_splits,
                         std::span<const std::size_t> detector_splits) {
    Partition p;
    p.col_blocks = partition_volume(geometry.grid, volume_splits);
    p.row_blocks = partition_detector(geometry.detector, geometry.poses.size(), detector_splits);
    return p;
}

void Partition::validate(std::size_t measurements, std::size_t voxels) const {
    auto check = [](auto const& blocks, auto member, std::size_t total, const char* what) {
        std::vector<std::size_t> all;
        all.reserve(total);
        for (const auto& b : blocks) {
            const auto& idx = b.*member;
            all.insert(all.end(), idx.begin(), idx.end());
        }
        std::sort(all.begin(), all.end());
        if (all.size() != total) {
            throw InternalError(std::string(what) + " blocks cover " + std::to_string(all.size()) + " of " +
                                std::to_string(total) + " indices");
        }
        for (std::size_t k = 0; k < all.size(); ++k) {
            if (all[k] != k) {
                throw InternalError(std::string(what) + " blocks are not a partition near index " +
                                    std::to_string(k));
            }
        }
    };
    check(row_blocks, &RowBlock::measurements, measurements, "row");
    check(col_blocks, &ColBlock::voxels, voxels, "column");
}

double projection_overlap(const ViewPose& pose, const DetectorRect& detector_block, const Cuboid& volume_block) {
    const Vec3 s = pose.source;
    if (s.x >= volume_block.lo.x && s.x <= volume_block.hi.x && s.y >= volume_block.lo.y &&
        s.y <= volume_block.hi.y && s.z >= volume_block.lo.z && s.z <= volume_block.hi.z) {
        throw GeometryError("source lies inside the volume block; projection is undefined");
    }
    const Vec3 axis = pose.detector_center - s;
    const double sdd = norm(axis);
    const Vec3 w = (1.0 / sdd) * axis;

    std::array<Vec3, 8> corners;
    for (int c = 0; c < 8; ++c) {
        corners[c] = {(c & 1) ? volume_block.hi.x : volume_block.lo.x, (c & 2) ? volume_block.hi.y : volume_block.lo.y,
                      (c & 4) ? volume_block.hi.z : volume_block.lo.z};
    }
    // Keep only the part of the box in front of the source; a box straddling the
    // source plane casts an (almost) unbounded shadow that the clip then trims.
    const double min_depth = 1e-9 * sdd;
    std::vector<Vec3> front;
    front.reserve(20);
    std::array<double, 8> depth;
    for (int c = 0; c < 8; ++c) {
        depth[c] = dot(corners[c] - s, w);
        if (depth[c] >= min_depth) {
            front.push_back(corners[c]);
        }
    }
    if (front.empty()) {
        return 0.0;
    }
    if (front.size() < 8) {
        for (int a = 0; a < 8; ++a) {
            for (int bit = 1; bit < 8; bit <<= 1) {
                const int b = a | bit;
                if (b == a) {
                    continue;
                }
                const bool in_a = depth[a] >= min_depth;
                const bool in_b = depth[b] >= min_depth;
                if (in_a != in_b) {
                    const double t = (min_depth - depth[a]) / (depth[b] - depth[a]);
                    front.push_back(corners[a] + t * (corners[b] - corners[a]));
                }
            }
        }
    }
    std::vector<polygon::Point2> shadow;
    shadow.reserve(front.size());
    for (const Vec3& p : front) {
        const Vec3 d = p - s;
        const Vec3 hit = s + (sdd / dot(d, w)) * d;
        const Vec3 rel = hit - pose.detector_center;
        shadow.push_back({dot(rel, pose.axis_u), dot(rel, pose.axis_v)});
    }
    const auto hull = polygon::convex_hull(std::move(shadow));
    return polygon::area(polygon::clip_to_rect(hull, detector_block));
}

std::vector<double> ProbabilityTable::column(std::size_t j) const {
    std::vector<double> out(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        out[i] = weights[i * cols + j];
    }
    return out;
}

ProbabilityTable build_probability_table(const ScanGeometry& geometry, const Partition& partition) {
    ProbabilityTable table;
    table.rows = partition.row_block_count();
    table.cols = partition.col_block_count();
    table.weights.assign(table.rows * table.cols, 0.0);
    table.totals.assign(table.cols, 0.0);
    std::vector<Cuboid> boxes;
    boxes.reserve(table.cols);
    for (const auto& cb : partition.col_blocks) {
        boxes.push_back(cb.bounds(geometry.grid));
    }
    for (std::size_t i = 0; i < table.rows; ++i) {
        const RowBlock& rb = partition.row_blocks[i];
        const DetectorRect rect = rb.rect(geometry.detector);
        for (std::size_t j = 0; j < table.cols; ++j) {
            table.weights[i * table.cols + j] = projection_overlap(geometry.poses[rb.view], rect, boxes[j]);
        }
    }
    for (std::size_t j = 0; j < table.cols; ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < table.rows; ++i) {
            sum += table.weights[i * table.cols + j];
        }
        table.totals[j] = sum;
        if (!(sum > 0.0)) {
            table.warnings.push_back("column block " + std::to_string(j) +
                                     " is never imaged (P_T = 0); excluded from updates");
        }
    }
    return table;
}

}  // namespace csgd
