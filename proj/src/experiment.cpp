#include "csgd/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>

#include "csgd/errors.hpp"
#include "csgd/raw_io.hpp"
#include "csgd/rng.hpp"
#include "csgd/solver.hpp"
#include "csgd/state.hpp"

namespace csgd {
namespace {

std::ofstream open_output(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream os(path, mode);
    if (!os) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    return os;
}

void finish(std::ofstream& os, const std::filesystem::path& path) {
    os.flush();
    if (!os) {
        throw IoError("failed writing " + path.string());
    }
}

void write_trace_files(const std::filesystem::path& dir, const ConvergenceTrace& trace) {
    {
        const auto path = dir / "trace.csv";
        auto os = open_output(path);
        trace.write_csv(os);
        finish(os, path);
    }
    {
        const auto path = dir / "counters.csv";
        auto os = open_output(path);
        trace.write_counters_csv(os);
        finish(os, path);
    }
    {
        const auto path = dir / "audits.csv";
        auto os = open_output(path);
        os << "epoch,relative_error\n" << std::setprecision(17);
        for (const auto& a : trace.audits) {
            os << a.epoch << ',' << a.relative_error << '\n';
        }
        finish(os, path);
    }
}

void write_manifest_file(const std::filesystem::path& dir, const ExperimentConfig& config, const std::string& status) {
    const auto path = dir / "manifest.ini";
    auto os = open_output(path);
    write_manifest(os, config);
    os << "# status = " << status << '\n';
    finish(os, path);
}

}  // namespace

ScanGeometry build_geometry(const ExperimentConfig& config) {
    ScanGeometry g;
    g.grid = VolumeGrid::centered(config.grid, config.voxel_size);
    g.detector.pixels = {config.detector_pixels[0], config.detector_pixels.size() > 1 ? config.detector_pixels[1] : 1};
    g.detector.spacing = {config.pixel_spacing[0],
                          config.pixel_spacing.size() > 1 ? config.pixel_spacing[1] : config.pixel_spacing[0]};
    const Vec3 center = g.grid.center();
    if (config.trajectory == TrajectoryKind::circular) {
        g.poses = make_circular_trajectory(config.n_views, config.radius, center,
                                           config.angular_start * std::numbers::pi / 180.0);
    } else {
        g.poses = make_random_sphere_trajectory(config.n_views, config.radius, config.source_detector_distance,
                                                derive_seed(config.seed, streams::trajectory), center);
    }
    g.validate();
    return g;
}

std::unique_ptr<ExperimentSetup> build_setup(const ExperimentConfig& config) {
    auto setup = std::make_unique<ExperimentSetup>();
    setup->geometry = build_geometry(config);
    setup->partition = make_partition(setup->geometry, config.volume_splits, config.detector_splits);
    setup->partition.validate(setup->geometry.measurement_count(), setup->geometry.grid.voxel_count());
    ProjectorOptions options;
    options.cache_rows = config.cache_rows;
    setup->matrix = std::make_unique<SystemMatrix>(setup->geometry, setup->partition, options);
    setup->table = build_probability_table(setup->geometry, setup->partition);
    setup->phantom = make_phantom(config.phantom, setup->geometry.grid, config.phantom_file);
    setup->y = simulate_projections(setup->phantom, *setup->matrix, config.noise_sigma,
                                    derive_seed(config.seed, streams::noise));
    return setup;
}

void export_slice(std::span<const double> volume, const VolumeGrid& grid, std::size_t axis, std::size_t index,
                  const std::filesystem::path& path) {
    if (volume.size() != grid.voxel_count()) {
        throw ContractError("export_slice: volume does not match the grid");
    }
    if (grid.rank == 2) {
        axis = 2;
        index = 0;
    }
    if (axis > 2) {
        throw ConfigError("slice axis " + std::to_string(axis) + " out of range");
    }
    if (index >= grid.dims[axis]) {
        throw ConfigError("slice index " + std::to_string(index) + " out of range for axis " + std::to_string(axis) +
                          " of length " + std::to_string(grid.dims[axis]));
    }
    const std::size_t a0 = axis == 0 ? 1 : 0;
    const std::size_t a1 = axis == 2 ? 1 : 2;
    const std::size_t width = grid.dims[a0];
    const std::size_t height = grid.dims[a1];
    std::vector<double> slice(width * height);
    for (std::size_t row = 0; row < height; ++row) {
        for (std::size_t col = 0; col < width; ++col) {
            std::array<std::size_t, 3> ijk{};
            ijk[axis] = index;
            ijk[a0] = col;
            ijk[a1] = row;
            slice[row * width + col] = volume[grid.linear_index(ijk[0], ijk[1], ijk[2])];
        }
    }
    const auto [lo_it, hi_it] = std::minmax_element(slice.begin(), slice.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    std::vector<unsigned char> pixels(slice.size(), 128);
    if (hi > lo) {
        for (std::size_t k = 0; k < slice.size(); ++k) {
            const double t = (slice[k] - lo) / (hi - lo);
            pixels[k] = static_cast<unsigned char>(std::clamp(std::lround(255.0 * t), 0L, 255L));
        }
    }
    {
        auto os = open_output(path, std::ios::binary);
        os << "P5\n" << width << ' ' << height << "\n255\n";
        os.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
        finish(os, path);
    }
    {
        auto window_path = path;
        window_path += ".window";
        auto os = open_output(window_path);
        os << std::setprecision(17) << "min = " << lo << "\nmax = " << hi << '\n';
        finish(os, window_path);
    }
}

void run_experiment(const ExperimentConfig& config) {
    config.validate();
    const std::filesystem::path dir = config.output_dir;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    }

    const auto setup = build_setup(config);
    for (const auto& warning : setup->table.warnings) {
        std::cerr << "warning: " << warning << '\n';
    }
    const Problem problem = setup->problem();
    const VolumeGrid& grid = setup->geometry.grid;

    ConvergenceTrace trace;
    std::vector<double> x;
    if (config.algorithm == Algorithm::csgd || config.algorithm == Algorithm::gcsgd) {
        SolverState state = SolverState::initial(setup->partition, grid.voxel_count(), setup->y);
        SelectionSchedule script;
        SelectionSchedule realized;
        RunHooks hooks;
        if (!config.schedule.empty()) {
            script = read_schedule(config.schedule);
            hooks.script = &script;
        }
        if (config.dump_schedule) {
            hooks.realized = &realized;
        }
        ConvergenceTrace partial;
        hooks.on_epoch = [&partial](const ConvergenceTrace& t, const SolverState&) {
            partial.rows.push_back(t.rows.back());
            partial.counters.push_back(t.counters.back());
            partial.audits = t.audits;
        };
        const CsgdParams params = config.csgd_params();
        try {
            trace = config.algorithm == Algorithm::csgd ? run_csgd(state, params, problem, hooks)
                                                        : run_gcsgd(state, params, problem, hooks);
        } catch (const DivergenceError& e) {
            write_trace_files(dir, partial);
            write_manifest_file(dir, config,
                                "diverged at epoch " + std::to_string(e.epoch()) + ", column block " +
                                    std::to_string(e.block()) + "; last good epoch " +
                                    std::to_string(e.epoch() > 0 ? e.epoch() - 1 : 0));
            throw;
        }
        if (config.dump_schedule) {
            const auto path = dir / "schedule.txt";
            auto os = open_output(path);
            write_schedule(os, realized);
            finish(os, path);
        }
        x = std::move(state.x);
    } else {
        const BaselineParams params = config.baseline_params();
        BaselineResult result = config.algorithm == Algorithm::row_action
                                    ? run_row_action(params, *setup->matrix, setup->y, setup->phantom.values)
                                    : run_column_action(params, *setup->matrix, setup->y, setup->phantom.values);
        trace = std::move(result.trace);
        x = std::move(result.x);
    }

    write_trace_files(dir, trace);
    write_raw_volume(dir / "recon.raw", x, grid, RawType::float64);
    std::vector<std::size_t> slices = config.slices;
    const std::size_t axis = grid.rank == 2 ? 2 : config.slice_axis;
    if (slices.empty()) {
        slices.push_back(grid.dims[axis] / 2);
    }
    static constexpr char kAxisName[] = {'x', 'y', 'z'};
    for (std::size_t index : slices) {
        char name[64];
        std::snprintf(name, sizeof name, "slice_%c%04zu.pgm", kAxisName[axis], index);
        export_slice(x, grid, axis, index, dir / name);
    }
    write_manifest_file(dir, config, "completed " + std::to_string(trace.rows.size()) + " epochs");
    if (!trace.rows.empty()) {
        const auto& last = trace.rows.back();
        std::cout << "epochs " << last.epoch << ", effective " << last.effective_epoch << ", snr " << last.snr_db
                  << " dB, " << last.wall_seconds << " s\n";
    } else {
        std::cout << "epochs 0\n";
    }
}

int run_experiment_main(const std::string& config_path, const std::vector<std::string>& overrides) {
    try {
        ExperimentConfig config = load_config(config_path);
        for (const auto& o : overrides) {
            apply_override(config, o);
        }
        run_experiment(config);
        return kExitOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ScheduleError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const GeometryError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "; last good epoch "
                  << (e.epoch() > 0 ? e.epoch() - 1 : 0) << '\n';
        return kExitDivergence;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kExitIo;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace csgd
