#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "csgd/basic_iteration.hpp"
#include "csgd/errors.hpp"
#include "csgd/execution_mode.hpp"
#include "csgd/metrics.hpp"
#include "csgd/state.hpp"

namespace csgd {

/// One unit of work: a basic iteration on (union of row_blocks, col_block).
struct TaskDescriptor {
    std::size_t epoch = 0;
    std::size_t col_block = 0;
    std::vector<std::size_t> row_blocks;
    std::size_t snapshot_version = 0;  // state.version the task reads
    double beta = 0.0;
};

/// A worker's value-only answer for one task.
struct TaskResult {
    std::vector<double> proposal;  // x_J + mu g_J
    std::vector<double> z;         // rows of the group, concatenated
    double mu = 0.0;
    bool null_space = false;
    std::size_t bytes_moved = 0;
};

/// A task failed; the epoch was rolled back.
class TaskFailure : public Error {
public:
    TaskFailure(const std::string& what, std::size_t task, std::size_t epoch, std::size_t block)
        : Error(what), task_(task), epoch_(epoch), block_(block) {}
    std::size_t task() const noexcept { return task_; }
    std::size_t epoch() const noexcept { return epoch_; }
    std::size_t block() const noexcept { return block_; }

private:
    std::size_t task_;
    std::size_t epoch_;
    std::size_t block_;
};

/// Per-epoch partial results keyed by schedule position, so the reduction does
/// not depend on arrival order.
class ReductionBuffer {
public:
    ReductionBuffer(std::size_t col_blocks, std::span<const TaskDescriptor> tasks);

    void store(std::size_t task, TaskResult result);
    bool complete() const;
    const TaskResult& result(std::size_t task) const { return results_[task]; }
    std::span<const TaskDescriptor> tasks() const { return tasks_; }

    /// Column blocks in ascending order with the task positions that touched them.
    const std::vector<std::vector<std::size_t>>& tasks_by_block() const { return by_block_; }

private:
    std::span<const TaskDescriptor> tasks_;
    std::vector<TaskResult> results_;
    std::vector<bool> filled_;
    std::vector<std::vector<std::size_t>> by_block_;
};

/// Elementwise sum of vectors by a fixed balanced pairwise tree.
std::vector<double> pairwise_sum(std::span<const std::vector<double>* const> parts);

/// Commits a complete buffer: x_J = mean of proposals for every updated J
/// (pairwise tree in schedule order), z entries replaced, r refreshed on the
/// touched row blocks. Untouched blocks are left alone.
void reduce(const ReductionBuffer& buffer, SolverState& state, const Partition& partition, std::span<const double> y);

struct ExecutorOptions {
    std::size_t worker_count = 1;
    ExecutionMode mode = ExecutionMode::serial_faithful;
};

/// In-process coordinator/worker pool. The coordinator is the only writer of the
/// solver state; workers receive immutable inputs and return TaskResults.
class Executor {
public:
    Executor(const SystemMatrix& matrix, std::span<const double> y, ExecutorOptions options);

    /// Runs one epoch of tasks and commits it. On any task failure the state is
    /// left untouched and the failure (lowest failing task) is rethrown.
    EpochCounters run_epoch(SolverState& state, std::span<const TaskDescriptor> tasks);

    const ExecutorOptions& options() const { return options_; }

    /// Bytes a task moves: r_I and x_J in, proposal and z out.
    static std::size_t task_bytes(std::size_t rows, std::size_t cols) { return 2 * (rows + cols) * sizeof(double); }

private:
    TaskResult run_task(const TaskDescriptor& task, std::span<const double> x, std::span<const double> r) const;

    const SystemMatrix* matrix_;
    std::span<const double> y_;
    ExecutorOptions options_;
};

}  // namespace csgd
