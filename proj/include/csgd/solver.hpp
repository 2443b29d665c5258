#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "csgd/execution_mode.hpp"
#include "csgd/executor.hpp"
#include "csgd/geometry.hpp"
#include "csgd/metrics.hpp"
#include "csgd/projector.hpp"
#include "csgd/rng.hpp"
#include "csgd/sampler.hpp"
#include "csgd/state.hpp"

namespace csgd {

struct CsgdParams {
    double b = 1.0;  // beta = b * P_S / P_T
    SamplingConfig sampling;
    std::size_t group_size = 1;
    std::size_t epochs = 0;
    ExecutionMode mode = ExecutionMode::serial_faithful;
    std::size_t worker_count = 1;
    std::size_t audit_interval = 0;    // full residual audit every k epochs; 0 = off
    std::size_t obs_gap_interval = 1;  // observation gap every k epochs; 0 = off
    double theta_start = 0.0;          // initial mixing parameter (mixed only)
    double divergence_factor = 1e6;    // |x| above this multiple of its first-epoch value aborts

    void validate() const;
};

/// Inputs shared by every solver run on one scan.
struct Problem {
    const SystemMatrix& matrix;
    const ProbabilityTable& table;
    std::span<const double> y;
    std::span<const double> x_true;  // may be empty; SNR is then NaN
};

/// One realized (epoch, J, I-group) selection. Epochs count from 1.
struct ScheduledTask {
    std::size_t epoch = 0;
    std::size_t col_block = 0;
    std::vector<std::size_t> row_blocks;
    bool operator==(const ScheduledTask&) const = default;
};
using SelectionSchedule = std::vector<ScheduledTask>;

/// Text format: one task per line, "epoch J i1 i2 ...". '#' starts a comment.
SelectionSchedule parse_schedule(std::istream& is);
SelectionSchedule read_schedule(const std::string& path);
void write_schedule(std::ostream& os, const SelectionSchedule& schedule);

/// b * sum_{i in group} P(i, J) / P_T(J).
double group_beta(const ProbabilityTable& table, double b, std::size_t col_block,
                  std::span<const std::size_t> row_blocks);

/// Draws each epoch's (J, I-group) tasks from one seeded stream.
class SelectionPlanner {
public:
    SelectionPlanner(const ProbabilityTable& table, const CsgdParams& params);

    /// Tasks of one epoch in schedule order: J blocks in draw order, and for each J
    /// ceil(alpha m / s) groups of s row blocks drawn without replacement.
    std::vector<TaskDescriptor> plan(std::size_t epoch, std::size_t snapshot_version);

    /// Mixing parameter in force for the next planned epoch.
    double theta() const { return theta_.theta; }
    /// Called once after each epoch.
    void advance() { theta_ = advance_theta(theta_); }

private:
    const ProbabilityTable* table_;
    CsgdParams params_;
    Rng rng_;
    ThetaState theta_;
    std::vector<std::size_t> eligible_;
};

/// Optional instrumentation of a solver run.
struct RunHooks {
    const SelectionSchedule* script = nullptr;  // replaces the planner when set
    SelectionSchedule* realized = nullptr;      // receives every task actually run
    /// Called after each committed epoch with the trace so far.
    std::function<void(const ConvergenceTrace&, const SolverState&)> on_epoch;
};

/// Algo "CSGD with importance sampling": GCSGD with group size 1.
ConvergenceTrace run_csgd(SolverState& state, const CsgdParams& params, const Problem& problem,
                          const RunHooks& hooks = {});

/// Algo "GCSGD with importance sampling". Throws DivergenceError on non-finite
/// values or runaway growth of |x|.
ConvergenceTrace run_gcsgd(SolverState& state, const CsgdParams& params, const Problem& problem,
                           const RunHooks& hooks = {});

enum class CoefficientRule { identity, sum_inverse, norm_inverse, diagonal };
std::string_view to_string(CoefficientRule rule);
CoefficientRule parse_coefficient_rule(std::string_view text);

struct BaselineParams {
    double omega = 1.0;
    std::vector<double> block_omega;  // per-block override; empty = omega everywhere
    /// M_i (row action, over rows) or M_j (column action, over voxels). sum_inverse
    /// uses row sums for row action and column sums for column action.
    CoefficientRule rule = CoefficientRule::identity;
    std::vector<double> diagonal;  // rule == diagonal: one entry per measurement or voxel
    std::size_t epochs = 0;
    std::vector<double> x0;  // empty = zero
    std::size_t obs_gap_interval = 1;
    /// Called after every inner step with the current x and residual y - A x.
    std::function<void(std::size_t, std::span<const double>, std::span<const double>)> on_step;

    void validate() const;
};

struct BaselineResult {
    std::vector<double> x;
    std::vector<double> r;  // y - A x at the end
    ConvergenceTrace trace;
};

/// Algo "generic row action": x += omega_i A_i^T M_i (y_i - A_i x), cycling row blocks.
BaselineResult run_row_action(const BaselineParams& params, const SystemMatrix& matrix, std::span<const double> y,
                              std::span<const double> x_true = {});

/// Algo "generic column action": dx_j = omega_j M_j (A^j)^T r, r -= A^j dx_j, cycling column blocks.
BaselineResult run_column_action(const BaselineParams& params, const SystemMatrix& matrix, std::span<const double> y,
                                 std::span<const double> x_true = {});

struct WindowProbe {
    double b = 0.0;
    bool diverged = false;
    bool monotone = false;
    double final_snr_db = 0.0;
};

struct WindowSearchResult {
    double b = 0.0;  // largest accepted candidate; 0 when none qualified
    std::vector<WindowProbe> probes;
};

/// Probes candidate b values from largest to smallest for `probe_epochs` epochs
/// and returns the first that neither diverges nor lets SNR (or the observation
/// gap when x_true is absent) decrease.
WindowSearchResult search_relaxation_window(const CsgdParams& base, const Problem& problem,
                                            std::span<const double> candidates, std::size_t probe_epochs);

}  // namespace csgd
