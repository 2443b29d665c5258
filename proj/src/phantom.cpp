#include "csgd/phantom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "csgd/errors.hpp"
#include "csgd/projector.hpp"
#include "csgd/raw_io.hpp"
#include "csgd/rng.hpp"

namespace csgd {
namespace {

struct Ellipse {
    double value, a, b, x0, y0, phi_deg;
};

// Toft's modified Shepp-Logan table.
constexpr std::array<Ellipse, 10> kSheppLogan2d{{
    {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
    {-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0},
    {-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0},
    {-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0},
    {0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0},
    {0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0},
    {0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0},
    {0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0},
    {0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0},
    {0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0},
}};

struct Ellipsoid {
    double value, a, b, c, x0, y0, z0, phi_deg, theta_deg, psi_deg;
};

// 3D extension of the modified table (Euler angles phi, theta, psi in degrees).
constexpr std::array<Ellipsoid, 10> kSheppLogan3d{{
    {1.0, 0.6900, 0.920, 0.810, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
    {-0.8, 0.6624, 0.874, 0.780, 0.0, -0.0184, 0.0, 0.0, 0.0, 0.0},
    {-0.2, 0.1100, 0.310, 0.220, 0.22, 0.0, 0.0, -18.0, 0.0, 10.0},
    {-0.2, 0.1600, 0.410, 0.280, -0.22, 0.0, 0.0, 18.0, 0.0, 10.0},
    {0.1, 0.2100, 0.250, 0.410, 0.0, 0.35, -0.15, 0.0, 0.0, 0.0},
    {0.1, 0.0460, 0.046, 0.050, 0.0, 0.1, 0.25, 0.0, 0.0, 0.0},
    {0.1, 0.0460, 0.046, 0.050, 0.0, -0.1, 0.25, 0.0, 0.0, 0.0},
    {0.1, 0.0460, 0.023, 0.050, -0.08, -0.605, 0.0, 0.0, 0.0, 0.0},
    {0.1, 0.0230, 0.023, 0.020, 0.0, -0.606, 0.0, 0.0, 0.0, 0.0},
    {0.1, 0.0230, 0.046, 0.020, 0.06, -0.605, 0.0, 0.0, 0.0, 0.0},
}};

double deg(double d) { return d * std::numbers::pi / 180.0; }

// Voxel centre in coordinates normalised to [-1, 1] along each axis.
Vec3 normalized_center(const VolumeGrid& grid, std::size_t i, std::size_t j, std::size_t k) {
    auto coord = [&](std::size_t idx, std::size_t axis) {
        if (grid.dims[axis] == 1) {
            return 0.0;
        }
        return (2.0 * static_cast<double>(idx) + 1.0) / static_cast<double>(grid.dims[axis]) - 1.0;
    };
    return {coord(i, 0), coord(j, 1), coord(k, 2)};
}

double shepp_logan_2d(Vec3 p) {
    double v = 0.0;
    for (const auto& e : kSheppLogan2d) {
        const double c = std::cos(deg(e.phi_deg));
        const double s = std::sin(deg(e.phi_deg));
        const double x = p.x - e.x0;
        const double y = p.y - e.y0;
        const double u = x * c + y * s;
        const double w = y * c - x * s;
        if (u * u / (e.a * e.a) + w * w / (e.b * e.b) <= 1.0) {
            v += e.value;
        }
    }
    return v;
}

double shepp_logan_3d(Vec3 p) {
    double v = 0.0;
    for (const auto& e : kSheppLogan3d) {
        const double cphi = std::cos(deg(e.phi_deg)), sphi = std::sin(deg(e.phi_deg));
        const double cth = std::cos(deg(e.theta_deg)), sth = std::sin(deg(e.theta_deg));
        const double cpsi = std::cos(deg(e.psi_deg)), spsi = std::sin(deg(e.psi_deg));
        const double q0 = (cpsi * cphi - cth * sphi * spsi) * p.x + (cpsi * sphi + cth * cphi * spsi) * p.y +
                          (spsi * sth) * p.z;
        const double q1 = (-spsi * cphi - cth * sphi * cpsi) * p.x + (-spsi * sphi + cth * cphi * cpsi) * p.y +
                          (cpsi * sth) * p.z;
        const double q2 = (sth * sphi) * p.x + (-sth * cphi) * p.y + cth * p.z;
        const double dx = q0 - e.x0, dy = q1 - e.y0, dz = q2 - e.z0;
        if (dx * dx / (e.a * e.a) + dy * dy / (e.b * e.b) + dz * dz / (e.c * e.c) <= 1.0) {
            v += e.value;
        }
    }
    return v;
}

}  // namespace

std::string_view to_string(PhantomKind kind) {
    switch (kind) {
        case PhantomKind::shepp_logan_2d:
            return "shepp_logan_2d";
        case PhantomKind::shepp_logan_3d:
            return "shepp_logan_3d";
        case PhantomKind::file:
            return "file";
    }
    return "?";
}

PhantomKind parse_phantom_kind(std::string_view text) {
    if (text == "shepp_logan_2d") {
        return PhantomKind::shepp_logan_2d;
    }
    if (text == "shepp_logan_3d") {
        return PhantomKind::shepp_logan_3d;
    }
    if (text == "file") {
        return PhantomKind::file;
    }
    throw ConfigError("unknown phantom kind '" + std::string(text) + "'");
}

Phantom make_phantom(PhantomKind kind, const VolumeGrid& grid, const std::filesystem::path& file) {
    grid.validate();
    Phantom ph;
    ph.grid = grid;
    ph.values.assign(grid.voxel_count(), 0.0);
    if (kind == PhantomKind::file) {
        RawVolume vol = read_raw_volume(file);
        if (vol.header.dims != grid.dims) {
            throw InputError("phantom file " + file.string() + " is " + std::to_string(vol.header.dims[0]) + "x" +
                             std::to_string(vol.header.dims[1]) + "x" + std::to_string(vol.header.dims[2]) +
                             ", grid is " + std::to_string(grid.dims[0]) + "x" + std::to_string(grid.dims[1]) + "x" +
                             std::to_string(grid.dims[2]));
        }
        for (double v : vol.values) {
            if (!std::isfinite(v) || v < 0.0) {
                throw InputError("phantom file " + file.string() + " holds negative or non-finite values");
            }
        }
        ph.values = std::move(vol.values);
        ph.descriptor = "file:" + file.string();
        return ph;
    }
    for (std::size_t k = 0; k < grid.dims[2]; ++k) {
        for (std::size_t j = 0; j < grid.dims[1]; ++j) {
            for (std::size_t i = 0; i < grid.dims[0]; ++i) {
                const Vec3 p = normalized_center(grid, i, j, k);
                const double v = kind == PhantomKind::shepp_logan_2d ? shepp_logan_2d(p) : shepp_logan_3d(p);
                // sums such as 1 - 0.8 - 0.2 can round just below zero
                ph.values[grid.linear_index(i, j, k)] = std::max(v, 0.0);
            }
        }
    }
    ph.descriptor = std::string(to_string(kind));
    return ph;
}

std::vector<double> simulate_projections(const Phantom& phantom, const SystemMatrix& matrix, double noise_sigma,
                                         std::uint64_t seed) {
    std::vector<double> y = matrix.forward(phantom.values);
    if (noise_sigma > 0.0) {
        Rng rng(seed);
        std::normal_distribution<double> noise(0.0, noise_sigma);
        for (double& v : y) {
            v += noise(rng.engine());
        }
    } else if (noise_sigma < 0.0) {
        throw ConfigError("noise sigma must be >= 0");
    }
    return y;
}

}  // namespace csgd
