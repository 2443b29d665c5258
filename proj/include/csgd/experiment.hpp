#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "csgd/config.hpp"
#include "csgd/geometry.hpp"
#include "csgd/phantom.hpp"
#include "csgd/projector.hpp"

namespace csgd {

/// Geometry, partition, system matrix, probability table, phantom and data for
/// one config. Pinned in memory because the matrix refers to geometry and partition.
struct ExperimentSetup {
    ScanGeometry geometry;
    Partition partition;
    std::unique_ptr<SystemMatrix> matrix;
    ProbabilityTable table;
    Phantom phantom;
    std::vector<double> y;

    ExperimentSetup() = default;
    ExperimentSetup(const ExperimentSetup&) = delete;
    ExperimentSetup& operator=(const ExperimentSetup&) = delete;

    Problem problem() const { return {*matrix, table, y, phantom.values}; }
};

ScanGeometry build_geometry(const ExperimentConfig& config);
std::unique_ptr<ExperimentSetup> build_setup(const ExperimentConfig& config);

/// Writes one slice perpendicular to `axis` as a binary 8-bit PGM, linearly
/// windowed to the slice's [min, max] (a constant slice maps to 128). Image
/// columns and rows follow the two remaining axes in increasing order, row 0
/// first. The window is recorded in `path` + ".window". For planar grids the
/// axis is ignored and the whole image is written.
void export_slice(std::span<const double> volume, const VolumeGrid& grid, std::size_t axis, std::size_t index,
                  const std::filesystem::path& path);

/// Exit codes of the experiment front-end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDivergence = 3;
inline constexpr int kExitIo = 4;

/// Runs the configured solver and writes trace.csv, counters.csv, audits.csv,
/// recon.raw (+ .hdr), slice images and manifest.ini into the output directory.
/// Errors propagate as exceptions.
void run_experiment(const ExperimentConfig& config);

/// Loads, overrides, validates and runs; maps every failure to an exit code and
/// reports it on stderr.
int run_experiment_main(const std::string& config_path, const std::vector<std::string>& overrides);

}  // namespace csgd
