#include "csgd/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "csgd/errors.hpp"
#include "csgd/rng.hpp"

namespace csgd {
namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> tokens(std::string_view text) {
    std::string s(text);
    std::replace(s.begin(), s.end(), ',', ' ');
    std::istringstream is(s);
    std::vector<std::string> out;
    for (std::string t; is >> t;) {
        out.push_back(t);
    }
    return out;
}

double to_double(std::string_view text) {
    const std::string t = trim(text);
    double v = 0.0;
    const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || end != t.data() + t.size()) {
        throw std::invalid_argument("expected a number, got '" + t + "'");
    }
    return v;
}

std::uint64_t to_uint(std::string_view text) {
    const std::string t = trim(text);
    std::uint64_t v = 0;
    const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || end != t.data() + t.size()) {
        throw std::invalid_argument("expected a non-negative integer, got '" + t + "'");
    }
    return v;
}

bool to_bool(std::string_view text) {
    const std::string t = trim(text);
    if (t == "true" || t == "1" || t == "yes" || t == "on") {
        return true;
    }
    if (t == "false" || t == "0" || t == "no" || t == "off") {
        return false;
    }
    throw std::invalid_argument("expected true or false, got '" + t + "'");
}

std::string fmt(double v) {
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

template <typename T>
std::string fmt_list(const std::vector<T>& v) {
    std::string out;
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (k > 0) {
            out += ' ';
        }
        if constexpr (std::is_floating_point_v<T>) {
            out += fmt(v[k]);
        } else {
            out += std::to_string(v[k]);
        }
    }
    return out;
}

std::vector<std::size_t> to_size_list(std::string_view text) {
    std::vector<std::size_t> out;
    for (const auto& t : tokens(text)) {
        out.push_back(static_cast<std::size_t>(to_uint(t)));
    }
    return out;
}

std::vector<double> to_double_list(std::string_view text) {
    std::vector<double> out;
    for (const auto& t : tokens(text)) {
        out.push_back(to_double(t));
    }
    return out;
}

struct Field {
    const char* section;
    const char* key;
    std::function<void(ExperimentConfig&, std::string_view)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <typename Enum, typename Parse>
Field enum_field(const char* section, const char* key, Enum ExperimentConfig::*member, Parse parse) {
    return {section, key, [member, parse](ExperimentConfig& c, std::string_view v) { c.*member = parse(trim(v)); },
            [member](const ExperimentConfig& c) { return std::string(to_string(c.*member)); }};
}

Field double_field(const char* section, const char* key, double ExperimentConfig::*member) {
    return {section, key, [member](ExperimentConfig& c, std::string_view v) { c.*member = to_double(v); },
            [member](const ExperimentConfig& c) { return fmt(c.*member); }};
}

Field size_field(const char* section, const char* key, std::size_t ExperimentConfig::*member) {
    return {section, key,
            [member](ExperimentConfig& c, std::string_view v) { c.*member = static_cast<std::size_t>(to_uint(v)); },
            [member](const ExperimentConfig& c) { return std::to_string(c.*member); }};
}

Field size_list_field(const char* section, const char* key, std::vector<std::size_t> ExperimentConfig::*member) {
    return {section, key, [member](ExperimentConfig& c, std::string_view v) { c.*member = to_size_list(v); },
            [member](const ExperimentConfig& c) { return fmt_list(c.*member); }};
}

Field double_list_field(const char* section, const char* key, std::vector<double> ExperimentConfig::*member) {
    return {section, key, [member](ExperimentConfig& c, std::string_view v) { c.*member = to_double_list(v); },
            [member](const ExperimentConfig& c) { return fmt_list(c.*member); }};
}

Field string_field(const char* section, const char* key, std::string ExperimentConfig::*member) {
    return {section, key, [member](ExperimentConfig& c, std::string_view v) { c.*member = trim(v); },
            [member](const ExperimentConfig& c) { return c.*member; }};
}

Field bool_field(const char* section, const char* key, bool ExperimentConfig::*member) {
    return {section, key, [member](ExperimentConfig& c, std::string_view v) { c.*member = to_bool(v); },
            [member](const ExperimentConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

const std::vector<Field>& fields() {
    using C = ExperimentConfig;
    static const std::vector<Field> table = {
        size_list_field("geometry", "grid", &C::grid),
        double_list_field("geometry", "voxel_size", &C::voxel_size),
        enum_field("geometry", "trajectory", &C::trajectory, parse_trajectory_kind),
        size_field("geometry", "n_views", &C::n_views),
        double_field("geometry", "radius", &C::radius),
        double_field("geometry", "source_detector_distance", &C::source_detector_distance),
        double_field("geometry", "angular_start", &C::angular_start),
        size_list_field("geometry", "detector_pixels", &C::detector_pixels),
        double_list_field("geometry", "pixel_spacing", &C::pixel_spacing),
        {"geometry", "seed", [](C& c, std::string_view v) { c.seed = to_uint(v); },
         [](const C& c) { return std::to_string(c.seed); }},
        enum_field("phantom", "kind", &C::phantom, parse_phantom_kind),
        string_field("phantom", "file", &C::phantom_file),
        double_field("phantom", "noise_sigma", &C::noise_sigma),
        size_list_field("partition", "volume_splits", &C::volume_splits),
        size_list_field("partition", "detector_splits", &C::detector_splits),
        enum_field("solver", "algorithm", &C::algorithm, parse_algorithm),
        double_field("solver", "b", &C::b),
        double_field("solver", "alpha", &C::alpha),
        double_field("solver", "gamma", &C::gamma),
        size_field("solver", "group_size", &C::group_size),
        size_field("solver", "epochs", &C::epochs),
        enum_field("solver", "sampling", &C::sampling, parse_sampling_strategy),
        double_field("solver", "theta_step", &C::theta_step),
        double_field("solver", "theta_start", &C::theta_start),
        enum_field("solver", "mode", &C::mode, parse_execution_mode),
        size_field("solver", "worker_count", &C::worker_count),
        size_field("solver", "audit_interval", &C::audit_interval),
        size_field("solver", "obs_gap_interval", &C::obs_gap_interval),
        double_field("solver", "divergence_factor", &C::divergence_factor),
        bool_field("solver", "cache_rows", &C::cache_rows),
        double_field("solver", "omega", &C::omega),
        enum_field("solver", "coefficient_rule", &C::coefficient_rule, parse_coefficient_rule),
        string_field("solver", "schedule", &C::schedule),
        string_field("io", "output_dir", &C::output_dir),
        size_field("io", "slice_axis", &C::slice_axis),
        size_list_field("io", "slices", &C::slices),
        bool_field("io", "dump_schedule", &C::dump_schedule),
    };
    return table;
}

const Field* find_field(std::string_view section, std::string_view key) {
    for (const auto& f : fields()) {
        if (section == f.section && key == f.key) {
            return &f;
        }
    }
    return nullptr;
}

bool known_section(std::string_view section) {
    return std::any_of(fields().begin(), fields().end(), [&](const Field& f) { return section == f.section; });
}

void assign(ExperimentConfig& config, const Field& field, std::string_view value, const std::string& where) {
    try {
        field.set(config, value);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": key '" + field.section + "." + field.key + "': " + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(where + ": key '" + field.section + "." + field.key + "': " + e.what());
    }
}

}  // namespace

std::string_view to_string(Algorithm a) {
    switch (a) {
        case Algorithm::csgd:
            return "csgd";
        case Algorithm::gcsgd:
            return "gcsgd";
        case Algorithm::row_action:
            return "row_action";
        case Algorithm::column_action:
            return "column_action";
    }
    return "gcsgd";
}

Algorithm parse_algorithm(std::string_view text) {
    for (auto a : {Algorithm::csgd, Algorithm::gcsgd, Algorithm::row_action, Algorithm::column_action}) {
        if (text == to_string(a)) {
            return a;
        }
    }
    throw ConfigError("unknown algorithm '" + std::string(text) + "'");
}

std::string_view to_string(TrajectoryKind t) {
    return t == TrajectoryKind::circular ? "circular" : "random_sphere";
}

TrajectoryKind parse_trajectory_kind(std::string_view text) {
    if (text == "circular") {
        return TrajectoryKind::circular;
    }
    if (text == "random_sphere") {
        return TrajectoryKind::random_sphere;
    }
    throw ConfigError("unknown trajectory '" + std::string(text) + "'");
}

CsgdParams ExperimentConfig::csgd_params() const {
    CsgdParams p;
    p.b = b;
    p.sampling.strategy = sampling;
    p.sampling.alpha = alpha;
    p.sampling.gamma = gamma;
    p.sampling.theta_step = theta_step;
    p.sampling.seed = seed;
    p.group_size = algorithm == Algorithm::csgd ? 1 : group_size;
    p.epochs = epochs;
    p.mode = mode;
    p.worker_count = worker_count;
    p.audit_interval = audit_interval;
    p.obs_gap_interval = obs_gap_interval;
    p.theta_start = theta_start;
    p.divergence_factor = divergence_factor;
    return p;
}

BaselineParams ExperimentConfig::baseline_params() const {
    BaselineParams p;
    p.omega = omega;
    p.rule = coefficient_rule;
    p.epochs = epochs;
    p.obs_gap_interval = obs_gap_interval;
    return p;
}

void ExperimentConfig::validate() const {
    if (grid.size() != 2 && grid.size() != 3) {
        throw ConfigError("geometry.grid needs 2 or 3 sizes");
    }
    if (voxel_size.empty() || voxel_size.size() > 3) {
        throw ConfigError("geometry.voxel_size needs 1 to 3 values");
    }
    if (detector_pixels.empty() || detector_pixels.size() > 2) {
        throw ConfigError("geometry.detector_pixels needs 1 or 2 counts");
    }
    if (grid.size() == 2 && detector_pixels.size() == 2 && detector_pixels[1] != 1) {
        throw ConfigError("a 2D grid needs a single-row detector");
    }
    if (pixel_spacing.empty() || pixel_spacing.size() > 2) {
        throw ConfigError("geometry.pixel_spacing needs 1 or 2 values");
    }
    if (!(source_detector_distance > radius)) {
        throw ConfigError("geometry.source_detector_distance must exceed geometry.radius");
    }
    if (trajectory == TrajectoryKind::circular && std::abs(source_detector_distance - 2.0 * radius) > 1e-9 * radius) {
        throw ConfigError("a circular trajectory keeps the detector at the source radius; "
                          "geometry.source_detector_distance must equal 2 * geometry.radius");
    }
    if (phantom == PhantomKind::file && phantom_file.empty()) {
        throw ConfigError("phantom.kind = file needs phantom.file");
    }
    if (phantom == PhantomKind::shepp_logan_2d && grid.size() != 2) {
        throw ConfigError("phantom.kind = shepp_logan_2d needs a 2D grid");
    }
    if (!(noise_sigma >= 0.0)) {
        throw ConfigError("phantom.noise_sigma must be non-negative");
    }
    if (volume_splits.size() != grid.size()) {
        throw ConfigError("partition.volume_splits needs one count per grid axis");
    }
    if (slice_axis > 2) {
        throw ConfigError("io.slice_axis must be 0, 1 or 2");
    }
    if (algorithm == Algorithm::csgd || algorithm == Algorithm::gcsgd) {
        csgd_params().validate();
    } else {
        baseline_params().validate();
    }
}

ExperimentConfig parse_config(std::istream& is, const std::string& source) {
    ExperimentConfig config;
    std::string section;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const std::string where = source + ":" + std::to_string(line_no);
        if (const auto c = line.find_first_of("#;"); c != std::string::npos) {
            line.erase(c);
        }
        const std::string text = trim(line);
        if (text.empty()) {
            continue;
        }
        if (text.front() == '[') {
            if (text.back() != ']') {
                throw ConfigError(where + ": malformed section header '" + text + "'");
            }
            section = trim(std::string_view(text).substr(1, text.size() - 2));
            if (!known_section(section)) {
                throw ConfigError(where + ": unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(where + ": expected 'key = value', got '" + text + "'");
        }
        const std::string key = trim(std::string_view(text).substr(0, eq));
        if (section.empty()) {
            throw ConfigError(where + ": key '" + key + "' appears before any section");
        }
        const Field* field = find_field(section, key);
        if (field == nullptr) {
            throw ConfigError(where + ": unknown key '" + key + "' in section [" + section + "]");
        }
        assign(config, *field, std::string_view(text).substr(eq + 1), where);
    }
    return config;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw IoError("cannot open config " + path);
    }
    return parse_config(is, path);
}

void apply_override(ExperimentConfig& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("override '" + assignment + "' is not key=value");
    }
    const std::string name = trim(std::string_view(assignment).substr(0, eq));
    const std::string value = assignment.substr(eq + 1);
    const Field* field = nullptr;
    if (const auto dot = name.find('.'); dot != std::string::npos) {
        field = find_field(name.substr(0, dot), name.substr(dot + 1));
    } else {
        for (const auto& f : fields()) {
            if (name == f.key) {
                if (field != nullptr) {
                    throw ConfigError("override key '" + name + "' is ambiguous; use section.key");
                }
                field = &f;
            }
        }
    }
    if (field == nullptr) {
        throw ConfigError("override: unknown key '" + name + "'");
    }
    assign(config, *field, value, "override");
}

void write_manifest(std::ostream& os, const ExperimentConfig& config) {
    std::string section;
    for (const auto& f : fields()) {
        if (section != f.section) {
            if (!section.empty()) {
                os << '\n';
            }
            section = f.section;
            os << '[' << section << "]\n";
        }
        os << f.key << " = " << f.get(config) << '\n';
    }
    os << "\n# derived seeds\n";
    os << "# trajectory_seed = " << derive_seed(config.seed, streams::trajectory) << '\n';
    os << "# sampler_seed = " << derive_seed(config.seed, streams::sampler) << '\n';
    os << "# noise_seed = " << derive_seed(config.seed, streams::noise) << '\n';
}

}  // namespace csgd
