#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "csgd/geometry.hpp"

namespace csgd {

enum class RawType { float32, float64 };

/// Sidecar text header describing a raw little-endian row-major volume
/// (x fastest). Lives next to the raw file with extension ".hdr".
struct RawHeader {
    int rank = 3;
    std::array<std::size_t, 3> dims{1, 1, 1};
    std::array<double, 3> voxel_size{1.0, 1.0, 1.0};
    RawType dtype = RawType::float32;

    std::size_t count() const { return dims[0] * dims[1] * dims[2]; }
};

struct RawVolume {
    RawHeader header;
    std::vector<double> values;
};

std::filesystem::path header_path(const std::filesystem::path& raw_path);

void write_raw_volume(const std::filesystem::path& raw_path, std::span<const double> values, const VolumeGrid& grid,
                      RawType dtype);

RawVolume read_raw_volume(const std::filesystem::path& raw_path);

}  // namespace csgd
