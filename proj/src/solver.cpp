#include "csgd/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "csgd/errors.hpp"

namespace csgd {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

long double norm_sq(std::span<const double> v) {
    long double s = 0.0L;
    for (double a : v) {
        s += static_cast<long double>(a) * a;
    }
    return s;
}

double safe_snr(std::span<const double> x_true, std::span<const double> x) {
    if (x_true.empty() || norm_sq(x_true) == 0.0L) {
        return kNaN;
    }
    return snr_db(x_true, x);
}

double safe_obs_gap(const SystemMatrix& matrix, std::span<const double> y, std::span<const double> x) {
    if (norm_sq(y) == 0.0L) {
        return kNaN;
    }
    const std::vector<double> y_est = matrix.forward(x);
    return observation_gap_db(y, y_est);
}

double trace_theta(SamplingStrategy strategy, double theta) {
    switch (strategy) {
        case SamplingStrategy::importance:
            return 0.0;
        case SamplingStrategy::random:
            return 1.0;
        case SamplingStrategy::mixed:
            return theta;
    }
    return theta;
}

std::vector<double> gather(std::span<const double> x, const ColBlock& cb) {
    std::vector<double> out(cb.size());
    for (std::size_t k = 0; k < cb.size(); ++k) {
        out[k] = x[cb.voxels[k]];
    }
    return out;
}

std::vector<double> gather(std::span<const double> v, const RowBlock& rb) {
    std::vector<double> out(rb.size());
    for (std::size_t k = 0; k < rb.size(); ++k) {
        out[k] = v[rb.measurements[k]];
    }
    return out;
}

void check_divergence(const SolverState& state, const Partition& partition, std::size_t epoch, double factor,
                      double& reference) {
    for (std::size_t j = 0; j < partition.col_block_count(); ++j) {
        for (std::size_t v : partition.col_blocks[j].voxels) {
            if (!std::isfinite(state.x[v])) {
                throw DivergenceError("non-finite x in column block " + std::to_string(j) + " at epoch " +
                                          std::to_string(epoch),
                                      epoch, j);
            }
        }
    }
    const double norm = std::sqrt(static_cast<double>(norm_sq(state.x)));
    if (!(reference > 0.0)) {
        reference = norm;
        return;
    }
    if (norm > factor * reference) {
        std::size_t worst = 0;
        long double worst_norm = -1.0L;
        for (std::size_t j = 0; j < partition.col_block_count(); ++j) {
            long double s = 0.0L;
            for (std::size_t v : partition.col_blocks[j].voxels) {
                s += static_cast<long double>(state.x[v]) * state.x[v];
            }
            if (s > worst_norm) {
                worst_norm = s;
                worst = j;
            }
        }
        std::ostringstream msg;
        msg << "|x| = " << norm << " exceeds " << factor << " x its first-epoch value " << reference << " at epoch "
            << epoch << " (largest column block " << worst << ")";
        throw DivergenceError(msg.str(), epoch, worst);
    }
}

}  // namespace

void CsgdParams::validate() const {
    if (!(b > 0.0) || !std::isfinite(b)) {
        throw ConfigError("b must be positive");
    }
    if (group_size < 1) {
        throw ConfigError("group_size must be >= 1");
    }
    if (worker_count < 1) {
        throw ConfigError("worker_count must be >= 1");
    }
    if (!(theta_start >= 0.0 && theta_start <= 1.0)) {
        throw ConfigError("theta_start must lie in [0, 1]");
    }
    if (!(divergence_factor > 1.0)) {
        throw ConfigError("divergence_factor must exceed 1");
    }
    sampling.validate();
}

SelectionSchedule parse_schedule(std::istream& is) {
    SelectionSchedule schedule;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        std::istringstream fields(line);
        std::vector<long long> values;
        std::string token;
        while (fields >> token) {
            std::size_t used = 0;
            long long value = 0;
            try {
                value = std::stoll(token, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != token.size() || value < 0) {
                throw InputError("schedule line " + std::to_string(line_no) + ": bad field '" + token + "'");
            }
            values.push_back(value);
        }
        if (values.empty()) {
            continue;
        }
        if (values.size() < 3) {
            throw InputError("schedule line " + std::to_string(line_no) + ": expected 'epoch J i1 [i2 ...]'");
        }
        ScheduledTask task;
        task.epoch = static_cast<std::size_t>(values[0]);
        task.col_block = static_cast<std::size_t>(values[1]);
        for (std::size_t k = 2; k < values.size(); ++k) {
            task.row_blocks.push_back(static_cast<std::size_t>(values[k]));
        }
        if (task.epoch == 0) {
            throw InputError("schedule line " + std::to_string(line_no) + ": epochs count from 1");
        }
        if (!schedule.empty() && task.epoch < schedule.back().epoch) {
            throw InputError("schedule line " + std::to_string(line_no) + ": epochs must not decrease");
        }
        schedule.push_back(std::move(task));
    }
    return schedule;
}

SelectionSchedule read_schedule(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw IoError("cannot open schedule " + path);
    }
    return parse_schedule(is);
}

void write_schedule(std::ostream& os, const SelectionSchedule& schedule) {
    for (const auto& task : schedule) {
        os << task.epoch << ' ' << task.col_block;
        for (std::size_t i : task.row_blocks) {
            os << ' ' << i;
        }
        os << '\n';
    }
}

double group_beta(const ProbabilityTable& table, double b, std::size_t col_block,
                  std::span<const std::size_t> row_blocks) {
    if (col_block >= table.cols) {
        throw ScheduleError("column block " + std::to_string(col_block) + " out of range");
    }
    if (table.excluded(col_block)) {
        throw ScheduleError("column block " + std::to_string(col_block) + " is never imaged (P_T = 0)");
    }
    double ps = 0.0;
    for (std::size_t i : row_blocks) {
        if (i >= table.rows) {
            throw ScheduleError("row block " + std::to_string(i) + " out of range");
        }
        ps += table(i, col_block);
    }
    return b * ps / table.total(col_block);
}

SelectionPlanner::SelectionPlanner(const ProbabilityTable& table, const CsgdParams& params)
    : table_(&table),
      params_(params),
      rng_(derive_seed(params.sampling.seed, streams::sampler)),
      theta_(ThetaState::initial(params.sampling.strategy == SamplingStrategy::mixed ? params.theta_start : 0.0,
                                 params.sampling.strategy == SamplingStrategy::mixed ? params.sampling.theta_step
                                                                                     : 0.0)) {
    params_.validate();
    for (std::size_t j = 0; j < table.cols; ++j) {
        if (!table.excluded(j)) {
            eligible_.push_back(j);
        }
    }
    if (eligible_.empty()) {
        throw ScheduleError("no column block is imaged by the scan");
    }
}

std::vector<TaskDescriptor> SelectionPlanner::plan(std::size_t epoch, std::size_t snapshot_version) {
    const ProbabilityTable& table = *table_;
    const std::size_t s = params_.group_size;
    const std::size_t k = fraction_count(params_.sampling.alpha, table.rows);
    const std::size_t want = (k + s - 1) / s * s;
    std::vector<TaskDescriptor> tasks;
    for (std::size_t pick : select_column_blocks(eligible_.size(), params_.sampling.gamma, rng_)) {
        const std::size_t j = eligible_[pick];
        const std::vector<double> raw = table.column(j);
        const std::vector<double> weights = strategy_weights(params_.sampling.strategy, raw, theta_.theta);
        const auto positive =
            static_cast<std::size_t>(std::count_if(weights.begin(), weights.end(), [](double w) { return w > 0.0; }));
        const std::vector<std::size_t> order =
            select_row_blocks(weights, std::min(want, positive), rng_, "column block " + std::to_string(j));
        for (std::size_t g = 0; g < order.size(); g += s) {
            TaskDescriptor task;
            task.epoch = epoch;
            task.col_block = j;
            task.row_blocks.assign(order.begin() + static_cast<std::ptrdiff_t>(g),
                                   order.begin() + static_cast<std::ptrdiff_t>(std::min(g + s, order.size())));
            task.snapshot_version = snapshot_version;
            task.beta = group_beta(table, params_.b, j, task.row_blocks);
            tasks.push_back(std::move(task));
        }
    }
    return tasks;
}

ConvergenceTrace run_csgd(SolverState& state, const CsgdParams& params, const Problem& problem,
                          const RunHooks& hooks) {
    CsgdParams single = params;
    single.group_size = 1;
    return run_gcsgd(state, single, problem, hooks);
}

ConvergenceTrace run_gcsgd(SolverState& state, const CsgdParams& params, const Problem& problem,
                           const RunHooks& hooks) {
    params.validate();
    const SystemMatrix& matrix = problem.matrix;
    const Partition& partition = matrix.partition();
    const std::size_t voxels = matrix.geometry().grid.voxel_count();
    if (state.x.size() != voxels || state.r.size() != problem.y.size() ||
        state.z.size() != partition.col_block_count()) {
        throw ContractError("solver state does not match the problem dimensions");
    }
    if (!problem.x_true.empty() && problem.x_true.size() != voxels) {
        throw ContractError("x_true has " + std::to_string(problem.x_true.size()) + " entries, grid has " +
                            std::to_string(voxels));
    }
    if (problem.table.rows != partition.row_block_count() || problem.table.cols != partition.col_block_count()) {
        throw ContractError("probability table does not match the partition");
    }

    Executor executor(matrix, problem.y, {params.worker_count, params.mode});
    SelectionPlanner planner(problem.table, params);
    ConvergenceTrace trace;
    double reference = 0.0;
    std::size_t cursor = 0;
    const auto start = std::chrono::steady_clock::now();

    for (std::size_t epoch = 1; epoch <= params.epochs; ++epoch) {
        const double theta = trace_theta(params.sampling.strategy, planner.theta());
        std::vector<TaskDescriptor> tasks;
        if (hooks.script != nullptr) {
            const SelectionSchedule& script = *hooks.script;
            if (cursor < script.size() && script[cursor].epoch < epoch) {
                throw ScheduleError("schedule entries out of epoch order at epoch " +
                                    std::to_string(script[cursor].epoch));
            }
            for (; cursor < script.size() && script[cursor].epoch == epoch; ++cursor) {
                const ScheduledTask& st = script[cursor];
                TaskDescriptor task;
                task.epoch = epoch;
                task.col_block = st.col_block;
                task.row_blocks = st.row_blocks;
                task.snapshot_version = state.version;
                task.beta = group_beta(problem.table, params.b, st.col_block, st.row_blocks);
                tasks.push_back(std::move(task));
            }
        } else {
            tasks = planner.plan(epoch, state.version);
        }
        if (hooks.realized != nullptr) {
            for (const auto& task : tasks) {
                hooks.realized->push_back({epoch, task.col_block, task.row_blocks});
            }
        }

        EpochCounters counters = executor.run_epoch(state, tasks);
        counters.epoch = epoch;
        planner.advance();
        check_divergence(state, partition, epoch, params.divergence_factor, reference);

        TraceRow row;
        row.epoch = epoch;
        row.effective_epoch = static_cast<double>(epoch) * params.sampling.alpha;
        row.snr_db = safe_snr(problem.x_true, state.x);
        row.obs_gap_db = params.obs_gap_interval > 0 && epoch % params.obs_gap_interval == 0
                             ? safe_obs_gap(matrix, problem.y, state.x)
                             : kNaN;
        row.mode = params.mode;
        row.theta = theta;
        if (params.audit_interval > 0 && epoch % params.audit_interval == 0) {
            trace.audits.push_back({epoch, state.audit(partition, problem.y)});
        }
        row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        trace.append(row);
        trace.counters.push_back(counters);
        if (hooks.on_epoch) {
            hooks.on_epoch(trace, state);
        }
    }
    return trace;
}

std::string_view to_string(CoefficientRule rule) {
    switch (rule) {
        case CoefficientRule::identity:
            return "identity";
        case CoefficientRule::sum_inverse:
            return "sum_inverse";
        case CoefficientRule::norm_inverse:
            return "norm_inverse";
        case CoefficientRule::diagonal:
            return "diagonal";
    }
    return "identity";
}

CoefficientRule parse_coefficient_rule(std::string_view text) {
    for (auto rule : {CoefficientRule::identity, CoefficientRule::sum_inverse, CoefficientRule::norm_inverse,
                      CoefficientRule::diagonal}) {
        if (text == to_string(rule)) {
            return rule;
        }
    }
    throw ConfigError("unknown coefficient rule '" + std::string(text) + "'");
}

void BaselineParams::validate() const {
    if (!(omega > 0.0) || !std::isfinite(omega)) {
        throw ConfigError("omega must be positive");
    }
    for (double w : block_omega) {
        if (!(w > 0.0) || !std::isfinite(w)) {
            throw ConfigError("per-block omega must be positive");
        }
    }
    if (rule == CoefficientRule::diagonal) {
        if (diagonal.empty()) {
            throw ConfigError("coefficient rule 'diagonal' needs diagonal entries");
        }
        for (double d : diagonal) {
            if (!(d >= 0.0) || !std::isfinite(d)) {
                throw ConfigError("diagonal entries must be finite and non-negative");
            }
        }
    }
}

namespace {

struct BaselineSetup {
    std::size_t voxels;
    std::size_t measurements;
    std::vector<double> x;
};

BaselineSetup baseline_setup(const BaselineParams& params, const SystemMatrix& matrix, std::span<const double> y,
                             std::span<const double> x_true, std::size_t blocks, std::size_t diagonal_size) {
    params.validate();
    BaselineSetup setup{matrix.geometry().grid.voxel_count(), matrix.geometry().measurement_count(), {}};
    if (y.size() != setup.measurements) {
        throw ContractError("y has " + std::to_string(y.size()) + " entries, scan has " +
                            std::to_string(setup.measurements));
    }
    if (!x_true.empty() && x_true.size() != setup.voxels) {
        throw ContractError("x_true does not match the grid");
    }
    if (!params.block_omega.empty() && params.block_omega.size() != blocks) {
        throw ConfigError("per-block omega needs " + std::to_string(blocks) + " entries");
    }
    if (params.rule == CoefficientRule::diagonal && params.diagonal.size() != diagonal_size) {
        throw ConfigError("diagonal needs " + std::to_string(diagonal_size) + " entries");
    }
    if (params.x0.empty()) {
        setup.x.assign(setup.voxels, 0.0);
    } else if (params.x0.size() != setup.voxels) {
        throw ContractError("x0 does not match the grid");
    } else {
        setup.x = params.x0;
    }
    return setup;
}

double inverse_or_zero(double v) { return v > 0.0 ? 1.0 / v : 0.0; }

/// Row sums and squared row norms (per measurement) or column sums and squared
/// column norms (per voxel).
void matrix_sums(const SystemMatrix& matrix, bool by_row, std::vector<double>& sums, std::vector<double>& sq) {
    const Partition& partition = matrix.partition();
    const std::size_t size = by_row ? matrix.geometry().measurement_count() : matrix.geometry().grid.voxel_count();
    std::vector<long double> s(size, 0.0L), q(size, 0.0L);
    for (std::size_t i = 0; i < partition.row_block_count(); ++i) {
        const RowBlock& rb = partition.row_blocks[i];
        for (std::size_t j = 0; j < partition.col_block_count(); ++j) {
            const ColBlock& cb = partition.col_blocks[j];
            matrix.block(i, j).for_each_row(
                [&](std::size_t r, std::span<const std::uint32_t> c, std::span<const double> v) {
                    for (std::size_t k = 0; k < c.size(); ++k) {
                        const std::size_t idx = by_row ? rb.measurements[r] : cb.voxels[c[k]];
                        s[idx] += v[k];
                        q[idx] += static_cast<long double>(v[k]) * v[k];
                    }
                });
        }
    }
    sums.assign(size, 0.0);
    sq.assign(size, 0.0);
    for (std::size_t k = 0; k < size; ++k) {
        sums[k] = static_cast<double>(s[k]);
        sq[k] = static_cast<double>(q[k]);
    }
}

std::vector<double> coefficient_diagonal(const BaselineParams& params, const SystemMatrix& matrix, bool by_row) {
    const std::size_t size = by_row ? matrix.geometry().measurement_count() : matrix.geometry().grid.voxel_count();
    std::vector<double> m(size, 1.0);
    if (params.rule == CoefficientRule::identity) {
        return m;
    }
    if (params.rule == CoefficientRule::diagonal) {
        return params.diagonal;
    }
    std::vector<double> sums, sq;
    matrix_sums(matrix, by_row, sums, sq);
    const std::vector<double>& base = params.rule == CoefficientRule::sum_inverse ? sums : sq;
    for (std::size_t k = 0; k < size; ++k) {
        m[k] = inverse_or_zero(base[k]);
    }
    return m;
}

TraceRow baseline_row(std::size_t epoch, const SystemMatrix& matrix, std::span<const double> y,
                      std::span<const double> x_true, std::span<const double> x, std::size_t obs_gap_interval,
                      double seconds) {
    TraceRow row;
    row.epoch = epoch;
    row.effective_epoch = static_cast<double>(epoch);
    row.snr_db = safe_snr(x_true, x);
    row.obs_gap_db = obs_gap_interval > 0 && epoch % obs_gap_interval == 0 ? safe_obs_gap(matrix, y, x) : kNaN;
    row.wall_seconds = seconds;
    return row;
}

std::vector<double> residual(const SystemMatrix& matrix, std::span<const double> y, std::span<const double> x) {
    std::vector<double> r = matrix.forward(x);
    for (std::size_t k = 0; k < r.size(); ++k) {
        r[k] = y[k] - r[k];
    }
    return r;
}

}  // namespace

BaselineResult run_row_action(const BaselineParams& params, const SystemMatrix& matrix, std::span<const double> y,
                              std::span<const double> x_true) {
    const Partition& partition = matrix.partition();
    BaselineSetup setup = baseline_setup(params, matrix, y, x_true, partition.row_block_count(),
                                         matrix.geometry().measurement_count());
    std::vector<double>& x = setup.x;
    const std::vector<double> m = coefficient_diagonal(params, matrix, true);
    BaselineResult result;
    const auto start = std::chrono::steady_clock::now();
    std::size_t step = 0;
    for (std::size_t epoch = 1; epoch <= params.epochs; ++epoch) {
        for (std::size_t i = 0; i < partition.row_block_count(); ++i) {
            const RowBlock& rb = partition.row_blocks[i];
            const double omega = params.block_omega.empty() ? params.omega : params.block_omega[i];
            std::vector<double> w = gather(y, rb);
            for (std::size_t j = 0; j < partition.col_block_count(); ++j) {
                const std::vector<double> ax = csgd::apply(matrix.block(i, j), gather(x, partition.col_blocks[j]));
                for (std::size_t k = 0; k < w.size(); ++k) {
                    w[k] -= ax[k];
                }
            }
            for (std::size_t k = 0; k < w.size(); ++k) {
                w[k] *= omega * m[rb.measurements[k]];
            }
            for (std::size_t j = 0; j < partition.col_block_count(); ++j) {
                const ColBlock& cb = partition.col_blocks[j];
                const std::vector<double> dx = apply_transpose(matrix.block(i, j), w);
                for (std::size_t k = 0; k < cb.size(); ++k) {
                    x[cb.voxels[k]] += dx[k];
                }
            }
            ++step;
            if (params.on_step) {
                params.on_step(step, x, residual(matrix, y, x));
            }
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.trace.append(baseline_row(epoch, matrix, y, x_true, x, params.obs_gap_interval, seconds));
    }
    result.r = residual(matrix, y, x);
    result.x = std::move(x);
    return result;
}

BaselineResult run_column_action(const BaselineParams& params, const SystemMatrix& matrix, std::span<const double> y,
                                 std::span<const double> x_true) {
    const Partition& partition = matrix.partition();
    BaselineSetup setup = baseline_setup(params, matrix, y, x_true, partition.col_block_count(),
                                         matrix.geometry().grid.voxel_count());
    std::vector<double>& x = setup.x;
    const std::vector<double> m = coefficient_diagonal(params, matrix, false);
    BaselineResult result;
    std::vector<double> r = residual(matrix, y, x);
    const auto start = std::chrono::steady_clock::now();
    std::size_t step = 0;
    for (std::size_t epoch = 1; epoch <= params.epochs; ++epoch) {
        for (std::size_t j = 0; j < partition.col_block_count(); ++j) {
            const ColBlock& cb = partition.col_blocks[j];
            const double omega = params.block_omega.empty() ? params.omega : params.block_omega[j];
            std::vector<long double> g(cb.size(), 0.0L);
            for (std::size_t i = 0; i < partition.row_block_count(); ++i) {
                const std::vector<double> part = apply_transpose(matrix.block(i, j), gather(r, partition.row_blocks[i]));
                for (std::size_t k = 0; k < cb.size(); ++k) {
                    g[k] += part[k];
                }
            }
            std::vector<double> dx(cb.size());
            for (std::size_t k = 0; k < cb.size(); ++k) {
                dx[k] = omega * m[cb.voxels[k]] * static_cast<double>(g[k]);
                x[cb.voxels[k]] += dx[k];
            }
            for (std::size_t i = 0; i < partition.row_block_count(); ++i) {
                const RowBlock& rb = partition.row_blocks[i];
                const std::vector<double> adx = csgd::apply(matrix.block(i, j), dx);
                for (std::size_t k = 0; k < rb.size(); ++k) {
                    r[rb.measurements[k]] -= adx[k];
                }
            }
            ++step;
            if (params.on_step) {
                params.on_step(step, x, r);
            }
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.trace.append(baseline_row(epoch, matrix, y, x_true, x, params.obs_gap_interval, seconds));
    }
    result.r = std::move(r);
    result.x = std::move(x);
    return result;
}

WindowSearchResult search_relaxation_window(const CsgdParams& base, const Problem& problem,
                                            std::span<const double> candidates, std::size_t probe_epochs) {
    if (candidates.empty()) {
        throw ConfigError("relaxation search needs at least one candidate b");
    }
    if (probe_epochs == 0) {
        throw ConfigError("relaxation search needs at least one probe epoch");
    }
    std::vector<double> order(candidates.begin(), candidates.end());
    std::sort(order.begin(), order.end(), std::greater<>());
    const bool use_snr = !problem.x_true.empty();
    WindowSearchResult result;
    for (double b : order) {
        CsgdParams params = base;
        params.b = b;
        params.epochs = probe_epochs;
        params.audit_interval = 0;
        params.obs_gap_interval = use_snr ? 0 : 1;
        WindowProbe probe;
        probe.b = b;
        SolverState state = SolverState::initial(problem.matrix.partition(),
                                                 problem.matrix.geometry().grid.voxel_count(), problem.y);
        try {
            const ConvergenceTrace trace = run_gcsgd(state, params, problem);
            double previous = 0.0;  // x = 0 scores 0 dB on both measures
            probe.monotone = true;
            for (const auto& row : trace.rows) {
                const double value = use_snr ? row.snr_db : row.obs_gap_db;
                if (!(value > previous)) {
                    probe.monotone = false;
                }
                previous = value;
            }
            probe.final_snr_db = trace.rows.empty() ? 0.0 : trace.rows.back().snr_db;
        } catch (const DivergenceError&) {
            probe.diverged = true;
        }
        result.probes.push_back(probe);
        if (!probe.diverged && probe.monotone) {
            result.b = b;
            break;
        }
    }
    return result;
}

}  // namespace csgd
