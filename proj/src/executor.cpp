#include "csgd/executor.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <set>
#include <thread>
#include <tuple>

#include "csgd/errors.hpp"

namespace csgd {
namespace {

// Runs body(k) for k in [0, count) on `workers` threads. Every failure is kept;
// the one with the lowest index is rethrown after all workers have stopped.
template <typename Body>
void parallel_for(std::size_t count, std::size_t workers, Body&& body) {
    if (workers <= 1 || count <= 1) {
        for (std::size_t k = 0; k < count; ++k) {
            body(k);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex mutex;
    std::size_t failed_index = count;
    std::exception_ptr failure;
    auto worker = [&] {
        for (;;) {
            if (failed.load(std::memory_order_relaxed)) {
                return;
            }
            const std::size_t k = next.fetch_add(1);
            if (k >= count) {
                return;
            }
            try {
                body(k);
            } catch (...) {
                std::lock_guard lock(mutex);
                if (k < failed_index) {
                    failed_index = k;
                    failure = std::current_exception();
                }
                failed.store(true);
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        const std::size_t n = std::min(workers, count);
        pool.reserve(n);
        for (std::size_t t = 0; t < n; ++t) {
            pool.emplace_back(worker);
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double a) { return std::isfinite(a); });
}

void write_z(const TaskDescriptor& task, const TaskResult& result, SolverState& state, const Partition& partition) {
    std::size_t offset = 0;
    for (std::size_t i : task.row_blocks) {
        const std::size_t rows = partition.row_blocks[i].size();
        auto& slot = state.z[task.col_block][i];
        slot.assign(result.z.begin() + static_cast<std::ptrdiff_t>(offset),
                    result.z.begin() + static_cast<std::ptrdiff_t>(offset + rows));
        offset += rows;
    }
}

}  // namespace

ReductionBuffer::ReductionBuffer(std::size_t col_blocks, std::span<const TaskDescriptor> tasks)
    : tasks_(tasks), results_(tasks.size()), filled_(tasks.size(), false), by_block_(col_blocks) {
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        if (tasks[t].col_block >= col_blocks) {
            throw ContractError("task " + std::to_string(t) + " names column block " +
                                std::to_string(tasks[t].col_block) + " of " + std::to_string(col_blocks));
        }
        by_block_[tasks[t].col_block].push_back(t);
    }
}

void ReductionBuffer::store(std::size_t task, TaskResult result) {
    if (task >= results_.size()) {
        throw ContractError("result for unknown task " + std::to_string(task));
    }
    results_[task] = std::move(result);
    filled_[task] = true;
}

bool ReductionBuffer::complete() const {
    return std::all_of(filled_.begin(), filled_.end(), [](bool f) { return f; });
}

std::vector<double> pairwise_sum(std::span<const std::vector<double>* const> parts) {
    if (parts.empty()) {
        return {};
    }
    if (parts.size() == 1) {
        return *parts.front();
    }
    const std::size_t mid = parts.size() / 2;
    std::vector<double> left = pairwise_sum(parts.first(mid));
    const std::vector<double> right = pairwise_sum(parts.subspan(mid));
    for (std::size_t k = 0; k < left.size(); ++k) {
        left[k] += right[k];
    }
    return left;
}

void reduce(const ReductionBuffer& buffer, SolverState& state, const Partition& partition, std::span<const double> y) {
    if (!buffer.complete()) {
        throw InternalError("reduce called before every task of the epoch reported");
    }
    std::fill(state.x_hat.begin(), state.x_hat.end(), 0.0);
    std::fill(state.update_counts.begin(), state.update_counts.end(), 0);
    const auto& by_block = buffer.tasks_by_block();
    for (std::size_t j = 0; j < by_block.size(); ++j) {
        const auto& ids = by_block[j];
        if (ids.empty()) {
            continue;
        }
        std::vector<const std::vector<double>*> parts;
        parts.reserve(ids.size());
        for (std::size_t t : ids) {
            parts.push_back(&buffer.result(t).proposal);
        }
        const std::vector<double> sum = pairwise_sum(parts);
        const ColBlock& cb = partition.col_blocks[j];
        if (sum.size() != cb.size()) {
            throw InternalError("proposal size mismatch for column block " + std::to_string(j));
        }
        const auto count = static_cast<double>(ids.size());
        if (!(count > 0.0)) {
            throw InternalError("column block " + std::to_string(j) + " marked updated with zero count");
        }
        for (std::size_t k = 0; k < cb.size(); ++k) {
            state.x_hat[cb.voxels[k]] = sum[k];
            state.x[cb.voxels[k]] = sum[k] / count;
        }
        state.update_counts[j] = ids.size();
    }
    std::set<std::size_t> touched;
    for (std::size_t t = 0; t < buffer.tasks().size(); ++t) {
        const auto& task = buffer.tasks()[t];
        write_z(task, buffer.result(t), state, partition);
        touched.insert(task.row_blocks.begin(), task.row_blocks.end());
    }
    for (std::size_t i : touched) {
        state.refresh_rows(partition, i, y);
    }
    ++state.version;
}

Executor::Executor(const SystemMatrix& matrix, std::span<const double> y, ExecutorOptions options)
    : matrix_(&matrix), y_(y), options_(options) {
    if (options_.worker_count < 1) {
        throw ConfigError("worker_count must be >= 1");
    }
    if (y.size() != matrix.geometry().measurement_count()) {
        throw ContractError("executor: y has " + std::to_string(y.size()) + " entries, scan has " +
                            std::to_string(matrix.geometry().measurement_count()));
    }
}

TaskResult Executor::run_task(const TaskDescriptor& task, std::span<const double> x, std::span<const double> r) const {
    const Partition& partition = matrix_->partition();
    const ColBlock& cb = partition.col_blocks[task.col_block];
    std::vector<double> x_block(cb.size());
    for (std::size_t k = 0; k < cb.size(); ++k) {
        x_block[k] = x[cb.voxels[k]];
    }
    std::vector<double> r_rows;
    for (std::size_t i : task.row_blocks) {
        for (std::size_t m : partition.row_blocks[i].measurements) {
            r_rows.push_back(r[m]);
        }
    }
    BasicStep step = basic_iteration(*matrix_, task.row_blocks, task.col_block, r_rows, x_block, task.beta);
    if (!all_finite(step.x_new) || !all_finite(step.z) || !std::isfinite(step.mu)) {
        throw DivergenceError("non-finite update in epoch " + std::to_string(task.epoch) + ", column block " +
                                  std::to_string(task.col_block),
                              task.epoch, task.col_block);
    }
    TaskResult result;
    result.bytes_moved = task_bytes(r_rows.size(), x_block.size());
    result.proposal = std::move(step.x_new);
    result.z = std::move(step.z);
    result.mu = step.mu;
    result.null_space = step.null_space;
    return result;
}

EpochCounters Executor::run_epoch(SolverState& state, std::span<const TaskDescriptor> tasks) {
    const auto start = std::chrono::steady_clock::now();
    const Partition& partition = matrix_->partition();
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        const auto& task = tasks[t];
        if (task.row_blocks.empty()) {
            throw ContractError("task " + std::to_string(t) + " has an empty row-block list");
        }
        std::vector<std::size_t> sorted = task.row_blocks;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
            throw ContractError("task " + std::to_string(t) + " repeats a row block");
        }
        if (sorted.back() >= partition.row_block_count()) {
            throw ContractError("task " + std::to_string(t) + " names an unknown row block");
        }
        if (task.snapshot_version > state.version) {
            throw ContractError("task " + std::to_string(t) + " reads a snapshot from the future");
        }
    }

    ReductionBuffer buffer(partition.col_block_count(), tasks);
    // stages share one residual snapshot; serial mode refreshes r between them
    std::vector<std::pair<std::size_t, std::size_t>> stages;
    if (options_.mode == ExecutionMode::parallel) {
        if (!tasks.empty()) {
            stages.emplace_back(0, tasks.size());
        }
    } else {
        for (std::size_t b = 0; b < tasks.size();) {
            std::size_t e = b + 1;
            while (e < tasks.size() && tasks[e].col_block == tasks[b].col_block) {
                ++e;
            }
            stages.emplace_back(b, e);
            b = e;
        }
    }

    const std::vector<double> r_backup = state.r;
    std::vector<std::tuple<std::size_t, std::size_t, std::vector<double>>> z_backup;
    std::set<std::pair<std::size_t, std::size_t>> saved;
    try {
        for (const auto& [b, e] : stages) {
            parallel_for(e - b, options_.worker_count, [&](std::size_t k) {
                const std::size_t t = b + k;
                try {
                    buffer.store(t, run_task(tasks[t], state.x, state.r));
                } catch (const DivergenceError& err) {
                    throw DivergenceError(std::string(err.what()) + " (task " + std::to_string(t) + ")", err.epoch(),
                                          err.block());
                } catch (const std::exception& err) {
                    throw TaskFailure("task " + std::to_string(t) + " (epoch " + std::to_string(tasks[t].epoch) +
                                          ", column block " + std::to_string(tasks[t].col_block) +
                                          ") failed: " + err.what(),
                                      t, tasks[t].epoch, tasks[t].col_block);
                }
            });
            if (options_.mode == ExecutionMode::serial_faithful) {
                std::set<std::size_t> touched;
                for (std::size_t t = b; t < e; ++t) {
                    for (std::size_t i : tasks[t].row_blocks) {
                        if (saved.emplace(tasks[t].col_block, i).second) {
                            z_backup.emplace_back(tasks[t].col_block, i, state.z[tasks[t].col_block][i]);
                        }
                        touched.insert(i);
                    }
                    write_z(tasks[t], buffer.result(t), state, partition);
                }
                for (std::size_t i : touched) {
                    state.refresh_rows(partition, i, y_);
                }
            }
        }
        reduce(buffer, state, partition, y_);
    } catch (...) {
        state.r = r_backup;
        for (auto& [j, i, old] : z_backup) {
            state.z[j][i] = std::move(old);
        }
        throw;
    }

    EpochCounters counters;
    counters.epoch = tasks.empty() ? state.version : tasks.front().epoch;
    counters.tasks = tasks.size();
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        counters.bytes_moved += buffer.result(t).bytes_moved;
        counters.null_space_events += buffer.result(t).null_space ? 1 : 0;
    }
    counters.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return counters;
}

}  // namespace csgd
