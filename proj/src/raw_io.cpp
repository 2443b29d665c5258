#include "csgd/raw_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "csgd/errors.hpp"

namespace csgd {
namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void put_le(std::ostream& os, T value) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    auto bits = std::bit_cast<U>(value);
    unsigned char bytes[sizeof(T)];
    for (std::size_t b = 0; b < sizeof(T); ++b) {
        bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
    }
    os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(const unsigned char* bytes) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    U bits = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b) {
        bits |= static_cast<U>(bytes[b]) << (8 * b);
    }
    return std::bit_cast<T>(bits);
}

}  // namespace

std::filesystem::path header_path(const std::filesystem::path& raw_path) {
    auto p = raw_path;
    p.replace_extension(".hdr");
    return p;
}

void write_raw_volume(const std::filesystem::path& raw_path, std::span<const double> values, const VolumeGrid& grid,
                      RawType dtype) {
    if (values.size() != grid.voxel_count()) {
        throw ContractError("raw volume has " + std::to_string(values.size()) + " values for a grid of " +
                            std::to_string(grid.voxel_count()));
    }
    std::ofstream raw(raw_path, std::ios::binary);
    if (!raw) {
        throw IoError("cannot open " + raw_path.string() + " for writing");
    }
    for (double v : values) {
        if (dtype == RawType::float32) {
            put_le(raw, static_cast<float>(v));
        } else {
            put_le(raw, v);
        }
    }
    if (!raw) {
        throw IoError("failed writing " + raw_path.string());
    }
    std::ofstream hdr(header_path(raw_path));
    if (!hdr) {
        throw IoError("cannot open " + header_path(raw_path).string() + " for writing");
    }
    hdr.precision(17);
    hdr << "rank = " << grid.rank << '\n';
    hdr << "dims = " << grid.dims[0] << ' ' << grid.dims[1] << ' ' << grid.dims[2] << '\n';
    hdr << "voxel_size = " << grid.voxel_size[0] << ' ' << grid.voxel_size[1] << ' ' << grid.voxel_size[2] << '\n';
    hdr << "dtype = " << (dtype == RawType::float32 ? "float32" : "float64") << '\n';
    hdr << "byte_order = little\n";
}

RawVolume read_raw_volume(const std::filesystem::path& raw_path) {
    RawVolume vol;
    std::ifstream hdr(header_path(raw_path));
    if (!hdr) {
        throw IoError("cannot open header " + header_path(raw_path).string());
    }
    std::string line;
    bool have_dims = false;
    while (std::getline(hdr, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            continue;
        }
        std::string key = line.substr(0, eq);
        key.erase(key.find_last_not_of(" \t") + 1);
        std::istringstream value(line.substr(eq + 1));
        if (key == "rank") {
            value >> vol.header.rank;
        } else if (key == "dims") {
            value >> vol.header.dims[0] >> vol.header.dims[1] >> vol.header.dims[2];
            have_dims = true;
        } else if (key == "voxel_size") {
            value >> vol.header.voxel_size[0] >> vol.header.voxel_size[1] >> vol.header.voxel_size[2];
        } else if (key == "dtype") {
            std::string t;
            value >> t;
            if (t == "float32") {
                vol.header.dtype = RawType::float32;
            } else if (t == "float64") {
                vol.header.dtype = RawType::float64;
            } else {
                throw InputError("unsupported dtype '" + t + "' in " + header_path(raw_path).string());
            }
        } else if (key == "byte_order") {
            std::string order;
            value >> order;
            if (order != "little") {
                throw InputError("only little-endian raw files are supported");
            }
        }
        if (!value && !value.eof()) {
            throw InputError("malformed header line '" + line + "'");
        }
    }
    if (!have_dims) {
        throw InputError("header " + header_path(raw_path).string() + " has no dims");
    }
    std::ifstream raw(raw_path, std::ios::binary);
    if (!raw) {
        throw IoError("cannot open " + raw_path.string());
    }
    const std::size_t width = vol.header.dtype == RawType::float32 ? 4 : 8;
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(raw)), std::istreambuf_iterator<char>());
    if (bytes.size() != vol.header.count() * width) {
        throw InputError(raw_path.string() + " holds " + std::to_string(bytes.size()) + " bytes, header implies " +
                         std::to_string(vol.header.count() * width));
    }
    vol.values.resize(vol.header.count());
    for (std::size_t k = 0; k < vol.values.size(); ++k) {
        vol.values[k] = width == 4 ? static_cast<double>(get_le<float>(&bytes[k * 4])) : get_le<double>(&bytes[k * 8]);
    }
    return vol;
}

}  // namespace csgd
