#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "csgd/execution_mode.hpp"
#include "csgd/phantom.hpp"
#include "csgd/sampler.hpp"
#include "csgd/solver.hpp"

namespace csgd {

enum class Algorithm { csgd, gcsgd, row_action, column_action };
std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view text);

enum class TrajectoryKind { circular, random_sphere };
std::string_view to_string(TrajectoryKind t);
TrajectoryKind parse_trajectory_kind(std::string_view text);

/// Fully resolved experiment description. Defaults reproduce the 2D fan-beam setup.
struct ExperimentConfig {
    // [geometry]
    std::vector<std::size_t> grid{64, 64};
    std::vector<double> voxel_size{1.0};
    TrajectoryKind trajectory = TrajectoryKind::circular;
    std::size_t n_views = 360;
    double radius = 115.0;
    double source_detector_distance = 230.0;
    double angular_start = 0.0;
    std::vector<std::size_t> detector_pixels{187};  // cols [rows]
    std::vector<double> pixel_spacing{1.0};         // u [v]
    std::uint64_t seed = 0;                         // master seed for every random stream

    // [phantom]
    PhantomKind phantom = PhantomKind::shepp_logan_2d;
    std::string phantom_file;
    double noise_sigma = 0.0;

    // [partition]
    std::vector<std::size_t> volume_splits{2, 2};
    std::vector<std::size_t> detector_splits{2};

    // [solver]
    Algorithm algorithm = Algorithm::gcsgd;
    double b = 100.0;
    double alpha = 1.0;
    double gamma = 1.0;
    std::size_t group_size = 1;
    std::size_t epochs = 50;
    SamplingStrategy sampling = SamplingStrategy::importance;
    double theta_step = 0.0;
    double theta_start = 0.0;
    ExecutionMode mode = ExecutionMode::serial_faithful;
    std::size_t worker_count = 1;
    std::size_t audit_interval = 10;
    std::size_t obs_gap_interval = 1;
    double divergence_factor = 1e6;
    bool cache_rows = false;  // materialize every block up front
    double omega = 1.0;
    CoefficientRule coefficient_rule = CoefficientRule::identity;
    std::string schedule;  // scripted selection schedule; empty = sampler

    // [io]
    std::string output_dir = "out";
    std::size_t slice_axis = 2;
    std::vector<std::size_t> slices;  // empty = middle slice
    bool dump_schedule = false;

    CsgdParams csgd_params() const;
    BaselineParams baseline_params() const;
    void validate() const;
};

/// Parses "[section]" headers and "key = value" lines; '#' and ';' start comments.
/// Unknown sections or keys and malformed values raise ConfigError naming key and line.
ExperimentConfig parse_config(std::istream& is, const std::string& source = "config");
ExperimentConfig load_config(const std::string& path);

/// Applies "section.key=value" (or bare "key=value" when the key is unambiguous).
void apply_override(ExperimentConfig& config, const std::string& assignment);

/// Every resolved value, including defaults, in the config syntax, followed by
/// the derived per-stream seeds.
void write_manifest(std::ostream& os, const ExperimentConfig& config);

}  // namespace csgd
