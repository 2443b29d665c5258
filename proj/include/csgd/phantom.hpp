#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "csgd/geometry.hpp"

namespace csgd {

class SystemMatrix;

enum class PhantomKind { shepp_logan_2d, shepp_logan_3d, file };

std::string_view to_string(PhantomKind kind);
PhantomKind parse_phantom_kind(std::string_view text);

struct Phantom {
    VolumeGrid grid;
    std::vector<double> values;
    std::string descriptor;
};

/// Modified (high-contrast) Shepp-Logan on the grid, sampled at voxel centres in
/// coordinates normalised to [-1, 1] per axis; or a raw volume file.
Phantom make_phantom(PhantomKind kind, const VolumeGrid& grid, const std::filesystem::path& file = {});

/// y = A x_true + e with e ~ N(0, sigma^2) i.i.d. when sigma > 0.
std::vector<double> simulate_projections(const Phantom& phantom, const SystemMatrix& matrix, double noise_sigma = 0.0,
                                         std::uint64_t seed = 0);

}  // namespace csgd
