#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include "csgd/config.hpp"
#include "csgd/errors.hpp"
#include "csgd/experiment.hpp"
#include "csgd/raw_io.hpp"
#include "csgd/rng.hpp"
#include "csgd/solver.hpp"
#include "csgd/state.hpp"
#include "support.hpp"

using namespace csgd;

namespace {

// A scan small enough to run in well under a second.
std::string tiny_config(const std::filesystem::path& out, const std::string& extra = {}) {
    return "[geometry]\n"
           "grid = 16 16\n"
           "n_views = 24\n"
           "radius = 40\n"
           "source_detector_distance = 80\n"
           "detector_pixels = 48\n"
           "seed = 3\n"
           "[partition]\n"
           "volume_splits = 2 2\n"
           "detector_splits = 2\n"
           "[solver]\n"
           "b = 6\n"
           "alpha = 0.5\n"
           "epochs = 5\n"
           "audit_interval = 2\n"
           "[io]\n"
           "output_dir = " +
           out.string() + "\n" + extra;
}

std::filesystem::path write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path);
    os << text;
    return path;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::size_t count_lines(const std::string& text) { return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')); }

std::string config_error(const std::string& text) {
    std::istringstream is(text);
    try {
        parse_config(is, "cfg");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(CSGD_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("defaults describe the standard 2D scan") {
    std::istringstream empty("");
    const ExperimentConfig c = parse_config(empty);
    CHECK(c.grid == std::vector<std::size_t>{64, 64});
    CHECK(c.n_views == 360);
    CHECK(c.radius == 115.0);
    CHECK(c.detector_pixels == std::vector<std::size_t>{187});
    CHECK(c.volume_splits == std::vector<std::size_t>{2, 2});
    CHECK(c.detector_splits == std::vector<std::size_t>{2});
    CHECK(c.algorithm == Algorithm::gcsgd);
    CHECK_NOTHROW(c.validate());
    const CsgdParams p = c.csgd_params();
    CHECK(p.b == 100.0);
    CHECK(p.sampling.seed == 0);
}

TEST_CASE("config parsing") {
    std::istringstream is(
        "# comment\n[solver]\nb = 70  ; trailing\nalpha=0.5\nsampling = mixed\ntheta_step = 0.025\nmode = parallel\n"
        "algorithm = csgd\ngroup_size = 7\n[geometry]\nvoxel_size = 0.5, 0.5\n[io]\nslices = 1 2 3\n");
    const ExperimentConfig c = parse_config(is);
    CHECK(c.b == 70.0);
    CHECK(c.alpha == 0.5);
    CHECK(c.sampling == SamplingStrategy::mixed);
    CHECK(c.mode == ExecutionMode::parallel);
    CHECK(c.voxel_size == std::vector<double>{0.5, 0.5});
    CHECK(c.slices == std::vector<std::size_t>{1, 2, 3});
    const CsgdParams p = c.csgd_params();
    CHECK(p.group_size == 1);  // csgd uses single row blocks
    CHECK(p.sampling.theta_step == 0.025);
}

TEST_CASE("config errors name the key and line") {
    const std::string unknown = config_error("[solver]\nb = 1\nbeta = 2\n");
    CHECK(unknown.find("cfg:3") != std::string::npos);
    CHECK(unknown.find("beta") != std::string::npos);

    const std::string bad_value = config_error("[solver]\n\nalpha = fast\n");
    CHECK(bad_value.find("cfg:3") != std::string::npos);
    CHECK(bad_value.find("solver.alpha") != std::string::npos);

    CHECK(config_error("[solvers]\n").find("cfg:1") != std::string::npos);
    CHECK(config_error("b = 1\n").find("before any section") != std::string::npos);
    CHECK(config_error("[solver]\nb 1\n").find("cfg:2") != std::string::npos);
    CHECK(config_error("[solver\n").find("malformed") != std::string::npos);
    CHECK(config_error("[solver]\nepochs = -3\n").find("solver.epochs") != std::string::npos);
    CHECK(config_error("[solver]\nsampling = greedy\n").find("solver.sampling") != std::string::npos);
    CHECK(config_error("[io]\ndump_schedule = maybe\n").find("io.dump_schedule") != std::string::npos);
    CHECK_THROWS_AS(load_config("/nonexistent/config.ini"), IoError);
}

TEST_CASE("overrides") {
    ExperimentConfig c;
    apply_override(c, "solver.b=190");
    CHECK(c.b == 190.0);
    apply_override(c, "group_size=5");
    CHECK(c.group_size == 5);
    apply_override(c, "io.output_dir = /tmp/x");
    CHECK(c.output_dir == "/tmp/x");
    CHECK_THROWS_AS(apply_override(c, "solver.bogus=1"), ConfigError);
    CHECK_THROWS_AS(apply_override(c, "b"), ConfigError);
    CHECK_THROWS_AS(apply_override(c, "solver.alpha=abc"), ConfigError);
}

TEST_CASE("validation") {
    auto invalid = [](const std::string& override_text) {
        ExperimentConfig c;
        apply_override(c, override_text);
        try {
            c.validate();
        } catch (const ConfigError&) {
            return true;
        }
        return false;
    };
    CHECK(invalid("geometry.source_detector_distance=200"));
    CHECK(invalid("geometry.grid=64 64 64"));  // 2D phantom on a 3D grid
    CHECK(invalid("partition.volume_splits=2 2 2"));
    CHECK(invalid("solver.alpha=0"));
    CHECK(invalid("solver.gamma=2"));
    CHECK(invalid("solver.b=-1"));
    CHECK(invalid("solver.worker_count=0"));
    CHECK(invalid("io.slice_axis=3"));
    CHECK(invalid("phantom.kind=file"));
    CHECK(invalid("phantom.noise_sigma=-1"));
    CHECK(invalid("geometry.detector_pixels=10 10"));
    CHECK_FALSE(invalid("solver.b=160"));
}

TEST_CASE("manifest lists every value and round-trips") {
    ExperimentConfig c;
    apply_override(c, "solver.b=123.5");
    apply_override(c, "geometry.seed=42");
    apply_override(c, "io.slices=3 5");
    std::ostringstream os;
    write_manifest(os, c);
    const std::string text = os.str();
    for (const char* key : {"grid", "voxel_size", "trajectory", "n_views", "radius", "source_detector_distance",
                            "angular_start", "detector_pixels", "pixel_spacing", "seed", "kind", "file",
                            "noise_sigma", "volume_splits", "detector_splits", "algorithm", "b", "alpha", "gamma",
                            "group_size", "epochs", "sampling", "theta_step", "theta_start", "mode", "worker_count",
                            "audit_interval", "obs_gap_interval", "divergence_factor", "cache_rows", "omega",
                            "coefficient_rule", "schedule", "output_dir", "slice_axis", "slices", "dump_schedule"}) {
        CHECK_MESSAGE(text.find(std::string("\n") + key + " = ") != std::string::npos, key);
    }
    CHECK(text.find("# sampler_seed = " + std::to_string(derive_seed(42, streams::sampler))) != std::string::npos);

    std::istringstream is(text);
    const ExperimentConfig back = parse_config(is);
    std::ostringstream again;
    write_manifest(again, back);
    CHECK(again.str() == text);
    CHECK(back.b == 123.5);
    CHECK(back.slices == std::vector<std::size_t>{3, 5});
}

TEST_CASE("slice export") {
    const auto dir = testing::temp_dir("slices");
    SUBCASE("ramp maps linearly onto 0..255") {
        const std::size_t dims[] = {4, 3};
        const double vs[] = {1.0};
        const auto grid = VolumeGrid::centered(dims, vs);
        std::vector<double> v(12);
        for (std::size_t k = 0; k < 12; ++k) {
            v[k] = 2.0 + 0.5 * static_cast<double>(k);
        }
        export_slice(v, grid, 0, 0, dir / "ramp.pgm");  // axis ignored for 2D
        const std::string pgm = read_file(dir / "ramp.pgm");
        const std::string header = "P5\n4 3\n255\n";
        REQUIRE(pgm.size() == header.size() + 12);
        CHECK(pgm.substr(0, header.size()) == header);
        for (std::size_t k = 0; k < 12; ++k) {
            const double t = static_cast<double>(k) / 11.0;
            CHECK(static_cast<unsigned char>(pgm[header.size() + k]) == static_cast<int>(std::lround(255.0 * t)));
        }
        const std::string window = read_file(dir / "ramp.pgm.window");
        CHECK(window == "min = 2\nmax = 7.5\n");
    }
    SUBCASE("constant slice is mid-gray") {
        const std::size_t dims[] = {3, 3};
        const double vs[] = {1.0};
        const auto grid = VolumeGrid::centered(dims, vs);
        export_slice(std::vector<double>(9, 0.7), grid, 2, 0, dir / "flat.pgm");
        const std::string pgm = read_file(dir / "flat.pgm");
        for (std::size_t k = pgm.size() - 9; k < pgm.size(); ++k) {
            CHECK(static_cast<unsigned char>(pgm[k]) == 128);
        }
    }
    SUBCASE("3D slices along each axis") {
        const std::size_t dims[] = {2, 3, 4};
        const double vs[] = {1.0};
        const auto grid = VolumeGrid::centered(dims, vs);
        std::vector<double> v(24);
        for (std::size_t k = 0; k < 24; ++k) {
            v[k] = static_cast<double>(k);
        }
        export_slice(v, grid, 0, 1, dir / "x.pgm");
        CHECK(read_file(dir / "x.pgm").substr(0, 11) == "P5\n3 4\n255\n");
        export_slice(v, grid, 1, 0, dir / "y.pgm");
        CHECK(read_file(dir / "y.pgm").substr(0, 11) == "P5\n2 4\n255\n");
        export_slice(v, grid, 2, 3, dir / "z.pgm");
        const std::string z = read_file(dir / "z.pgm");
        CHECK(z.substr(0, 11) == "P5\n2 3\n255\n");
        // z = 3 holds values 18..23 in x-fastest order
        for (std::size_t k = 0; k < 6; ++k) {
            CHECK(static_cast<unsigned char>(z[11 + k]) == static_cast<int>(std::lround(255.0 * k / 5.0)));
        }
        CHECK(read_file(dir / "z.pgm.window") == "min = 18\nmax = 23\n");
        CHECK_THROWS_AS(export_slice(v, grid, 2, 4, dir / "bad.pgm"), ConfigError);
        CHECK_THROWS_AS(export_slice(v, grid, 3, 0, dir / "bad.pgm"), ConfigError);
        CHECK_THROWS_AS(export_slice(std::vector<double>(5), grid, 2, 0, dir / "bad.pgm"), ContractError);
    }
}

TEST_CASE("experiment run writes every output") {
    const auto dir = testing::temp_dir("run");
    const auto cfg = write_file(dir / "cfg.ini", tiny_config(dir / "out", "dump_schedule = true\n"));
    CHECK(run_experiment_main(cfg.string(), {}) == kExitOk);
    const auto out = dir / "out";
    for (const char* name : {"trace.csv", "counters.csv", "audits.csv", "recon.raw", "recon.hdr", "slice_z0000.pgm",
                             "slice_z0000.pgm.window", "manifest.ini", "schedule.txt"}) {
        CHECK_MESSAGE(std::filesystem::exists(out / name), name);
    }
    const std::string trace = read_file(out / "trace.csv");
    CHECK(trace.rfind("epoch,effective_epoch,snr_db,obs_gap_db,wall_seconds,mode,theta\n", 0) == 0);
    CHECK(count_lines(trace) == 6);
    CHECK(count_lines(read_file(out / "audits.csv")) == 3);
    CHECK(read_file(out / "manifest.ini").find("# status = completed 5 epochs") != std::string::npos);

    // The reconstruction equals an in-process run of the same config, bit for bit.
    const ExperimentConfig config = load_config(cfg.string());
    const auto setup = build_setup(config);
    SolverState state = SolverState::initial(setup->partition, setup->geometry.grid.voxel_count(), setup->y);
    run_gcsgd(state, config.csgd_params(), setup->problem());
    const RawVolume recon = read_raw_volume(out / "recon.raw");
    CHECK(recon.header.dtype == RawType::float64);
    CHECK(recon.values == state.x);

    // Replaying the dumped schedule reproduces the run.
    const auto replay_dir = dir / "replay";
    CHECK(run_experiment_main(cfg.string(), {"solver.schedule=" + (out / "schedule.txt").string(),
                                             "geometry.seed=99", "io.output_dir=" + replay_dir.string(),
                                             "io.dump_schedule=false"}) == kExitOk);
    // The seed also drives the noise stream, which is off here.
    CHECK(read_raw_volume(replay_dir / "recon.raw").values == state.x);
}

TEST_CASE("zero epochs writes the initial state") {
    const auto dir = testing::temp_dir("zero");
    const auto cfg = write_file(dir / "cfg.ini", tiny_config(dir / "out"));
    CHECK(run_experiment_main(cfg.string(), {"solver.epochs=0"}) == kExitOk);
    CHECK(count_lines(read_file(dir / "out" / "trace.csv")) == 1);
    const RawVolume recon = read_raw_volume(dir / "out" / "recon.raw");
    CHECK(recon.values == std::vector<double>(256, 0.0));
}

TEST_CASE("baseline algorithms run from a config") {
    const auto dir = testing::temp_dir("baseline");
    const auto cfg = write_file(dir / "cfg.ini", tiny_config(dir / "out"));
    CHECK(run_experiment_main(cfg.string(), {"solver.algorithm=row_action", "solver.omega=0.5",
                                             "solver.coefficient_rule=norm_inverse"}) == kExitOk);
    CHECK(count_lines(read_file(dir / "out" / "trace.csv")) == 6);
    CHECK(run_experiment_main(cfg.string(), {"solver.algorithm=column_action", "solver.omega=0.5",
                                             "solver.coefficient_rule=sum_inverse"}) == kExitOk);
    CHECK(count_lines(read_file(dir / "out" / "trace.csv")) == 6);
}

TEST_CASE("exit codes") {
    const auto dir = testing::temp_dir("exit");
    const auto cfg = write_file(dir / "cfg.ini", tiny_config(dir / "out"));
    SUBCASE("config errors") {
        const auto bad = write_file(dir / "bad.ini", "[solver]\nbogus = 1\n");
        CHECK(run_experiment_main(bad.string(), {}) == kExitConfig);
        CHECK(run_experiment_main(cfg.string(), {"solver.nothing=1"}) == kExitConfig);
        CHECK(run_experiment_main(cfg.string(), {"geometry.source_detector_distance=50"}) == kExitConfig);
        const auto sched = write_file(dir / "s.txt", "1 9 0\n");
        CHECK(run_experiment_main(cfg.string(), {"solver.schedule=" + sched.string()}) == kExitConfig);
    }
    SUBCASE("divergence") {
        CHECK(run_experiment_main(cfg.string(), {"solver.b=5000", "solver.mode=parallel", "solver.alpha=1",
                                                 "solver.epochs=60"}) == kExitDivergence);
        const std::string manifest = read_file(dir / "out" / "manifest.ini");
        CHECK(manifest.find("# status = diverged at epoch") != std::string::npos);
        CHECK(manifest.find("last good epoch") != std::string::npos);
        CHECK(count_lines(read_file(dir / "out" / "trace.csv")) >= 2);
    }
    SUBCASE("i/o and input errors") {
        CHECK(run_experiment_main((dir / "missing.ini").string(), {}) == kExitIo);
        CHECK(run_experiment_main(cfg.string(), {"phantom.kind=file", "phantom.file=/nonexistent.raw"}) == kExitIo);
        const auto sched = write_file(dir / "bad_sched.txt", "1 zero 0\n");
        CHECK(run_experiment_main(cfg.string(), {"solver.schedule=" + sched.string()}) == kExitIo);
        write_file(dir / "blocker", "file in the way\n");
        CHECK(run_experiment_main(cfg.string(), {"io.output_dir=" + (dir / "blocker" / "sub").string()}) == kExitIo);
    }
}

TEST_CASE("command line front end") {
    const auto dir = testing::temp_dir("cli");
    const auto cfg = write_file(dir / "cfg.ini", tiny_config(dir / "out"));
    CHECK(run_cli("run " + cfg.string()) == 0);
    CHECK(run_cli("run " + cfg.string() + " --override solver.epochs=2 --override solver.b=3") == 0);
    CHECK(count_lines(read_file(dir / "out" / "trace.csv")) == 3);
    CHECK(run_cli("") == 2);
    CHECK(run_cli("run") == 2);
    CHECK(run_cli("run " + cfg.string() + " --override solver.nope=1") == 2);
    CHECK(run_cli("run " + (dir / "none.ini").string()) == 4);
}
