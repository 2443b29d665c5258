#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "csgd/errors.hpp"
#include "csgd/executor.hpp"
#include "csgd/phantom.hpp"
#include "csgd/solver.hpp"
#include "support.hpp"

using namespace csgd;

namespace {

struct Bench {
    std::unique_ptr<testing::Scan> scan;
    ProbabilityTable table;
    std::vector<double> y;
};

Bench make_bench() {
    Bench b;
    b.scan = testing::make_scan(testing::fan_geometry(8, 8, 10, 14, 24.0, 1.0), {2, 2}, {2}, true);
    b.table = build_probability_table(b.scan->geometry, b.scan->partition);
    const Phantom ph = make_phantom(PhantomKind::shepp_logan_2d, b.scan->geometry.grid);
    b.y = simulate_projections(ph, *b.scan->matrix);
    return b;
}

std::vector<TaskDescriptor> plan_epoch(const Bench& b, std::uint64_t seed, std::size_t s, std::size_t version) {
    CsgdParams p;
    p.b = 5.0;
    p.group_size = s;
    p.sampling.alpha = 0.6;
    p.sampling.seed = seed;
    SelectionPlanner planner(b.table, p);
    return planner.plan(version + 1, version);
}

TaskResult fake_result(std::vector<double> proposal, std::size_t z_rows, double z_value) {
    TaskResult r;
    r.proposal = std::move(proposal);
    r.z.assign(z_rows, z_value);
    return r;
}

}  // namespace

TEST_CASE("pairwise sum uses a fixed balanced tree") {
    const std::vector<double> a{1.0};
    const std::vector<double> b{1e16};
    const std::vector<double> c{-1e16};
    const std::vector<const std::vector<double>*> three{&a, &b, &c};
    // a + (b + c) = 1, while (a + b) + c would give 0
    CHECK(pairwise_sum(three)[0] == 1.0);
    const std::vector<double> d{-1.0};
    const std::vector<const std::vector<double>*> four{&a, &b, &c, &d};
    // (a + b) + (c + d) = 1e16 - 1e16 = 0
    CHECK(pairwise_sum(four)[0] == 0.0);
    CHECK(pairwise_sum(std::span<const std::vector<double>* const>{}).empty());
}

TEST_CASE("reduce averages proposals per column block") {
    auto scan = testing::make_scan(testing::fan_geometry(4, 4, 2, 6, 12.0, 1.0), {2, 1}, {2});
    const auto& part = scan->partition;
    const std::size_t rows = part.row_blocks[0].size();
    std::vector<double> y(scan->geometry.measurement_count(), 1.0);
    SolverState state = SolverState::initial(part, 16, y);

    const std::vector<TaskDescriptor> tasks{
        {1, 0, {0}, 0, 1.0},
        {1, 1, {1}, 0, 1.0},
        {1, 0, {2}, 0, 1.0},
        {1, 0, {3}, 0, 1.0},
    };
    ReductionBuffer buffer(2, tasks);
    CHECK(buffer.tasks_by_block()[0] == std::vector<std::size_t>{0, 2, 3});
    CHECK(buffer.tasks_by_block()[1] == std::vector<std::size_t>{1});
    buffer.store(3, fake_result(std::vector<double>(8, 6.0), rows, 0.25));
    buffer.store(0, fake_result(std::vector<double>(8, 1.0), rows, 0.5));
    CHECK_FALSE(buffer.complete());
    CHECK_THROWS_AS(reduce(buffer, state, part, y), InternalError);
    buffer.store(1, fake_result(std::vector<double>(8, 4.0), rows, 0.75));
    buffer.store(2, fake_result(std::vector<double>(8, 2.0), rows, 0.125));
    CHECK(buffer.complete());
    CHECK_THROWS_AS(buffer.store(4, TaskResult{}), ContractError);

    reduce(buffer, state, part, y);
    CHECK(state.version == 1);
    for (std::size_t v : part.col_blocks[0].voxels) {
        CHECK(state.x[v] == 3.0);
        CHECK(state.x_hat[v] == 9.0);
    }
    for (std::size_t v : part.col_blocks[1].voxels) {
        CHECK(state.x[v] == 4.0);
    }
    CHECK(state.update_counts == std::vector<std::size_t>{3, 1});
    // r_i = y_i - z^0_i - z^1_i on touched rows
    for (std::size_t m : part.row_blocks[0].measurements) {
        CHECK(state.r[m] == 0.5);
    }
    for (std::size_t m : part.row_blocks[1].measurements) {
        CHECK(state.r[m] == 0.25);
    }
    for (std::size_t m : part.row_blocks[3].measurements) {
        CHECK(state.r[m] == 0.75);
    }
    CHECK(state.audit(part, y) == 0.0);

    const std::vector<TaskDescriptor> bad{{1, 5, {0}, 0, 1.0}};
    CHECK_THROWS_AS(ReductionBuffer(2, bad), ContractError);
}

TEST_CASE("reduction is independent of arrival order") {
    auto scan = testing::make_scan(testing::fan_geometry(4, 4, 2, 6, 12.0, 1.0), {2, 1}, {2});
    const auto& part = scan->partition;
    const std::vector<double> y(scan->geometry.measurement_count(), 1.0);
    std::mt19937_64 gen(8);
    std::vector<TaskDescriptor> tasks;
    std::vector<TaskResult> results;
    for (std::size_t t = 0; t < 7; ++t) {
        tasks.push_back({1, t % 2, {t % 4}, 0, 1.0});
        results.push_back(fake_result(testing::random_vector(8, gen), part.row_blocks[t % 4].size(), 0.1 * t));
    }
    std::vector<std::size_t> order(7);
    std::iota(order.begin(), order.end(), 0);
    SolverState reference = SolverState::initial(part, 16, y);
    {
        ReductionBuffer buffer(2, tasks);
        for (std::size_t t : order) {
            buffer.store(t, results[t]);
        }
        reduce(buffer, reference, part, y);
    }
    for (int trial = 0; trial < 10; ++trial) {
        std::shuffle(order.begin(), order.end(), gen);
        SolverState state = SolverState::initial(part, 16, y);
        ReductionBuffer buffer(2, tasks);
        for (std::size_t t : order) {
            buffer.store(t, results[t]);
        }
        reduce(buffer, state, part, y);
        CHECK(state.x == reference.x);
        CHECK(state.r == reference.r);
    }
}

TEST_CASE("worker count does not change the result") {
    const Bench b = make_bench();
    for (auto mode : {ExecutionMode::serial_faithful, ExecutionMode::parallel}) {
        std::vector<std::vector<double>> xs;
        std::vector<std::vector<double>> rs;
        for (std::size_t workers : {1u, 2u, 3u, 8u}) {
            Executor exec(*b.scan->matrix, b.y, {workers, mode});
            SolverState state = SolverState::initial(b.scan->partition, 64, b.y);
            for (std::size_t e = 0; e < 4; ++e) {
                const auto tasks = plan_epoch(b, 100 + e, 2, state.version);
                exec.run_epoch(state, tasks);
            }
            xs.push_back(state.x);
            rs.push_back(state.r);
        }
        for (std::size_t k = 1; k < xs.size(); ++k) {
            CHECK(xs[k] == xs[0]);
            CHECK(rs[k] == rs[0]);
        }
    }
}

TEST_CASE("parallel tasks read the epoch-start residual") {
    const Bench b = make_bench();
    // Two tasks on different column blocks sharing a row block: in parallel mode
    // the second sees the same r as when run alone.
    std::size_t shared = 0;
    while (!(b.table(shared, 0) > 0.0 && b.table(shared, 1) > 0.0)) {
        ++shared;
    }
    const std::vector<TaskDescriptor> both{{1, 0, {shared}, 0, 0.5}, {1, 1, {shared}, 0, 0.5}};
    const std::vector<TaskDescriptor> second{{1, 1, {shared}, 0, 0.5}};
    Executor par(*b.scan->matrix, b.y, {1, ExecutionMode::parallel});
    SolverState s1 = SolverState::initial(b.scan->partition, 64, b.y);
    SolverState s2 = SolverState::initial(b.scan->partition, 64, b.y);
    par.run_epoch(s1, both);
    par.run_epoch(s2, second);
    for (std::size_t v : b.scan->partition.col_blocks[1].voxels) {
        CHECK(s1.x[v] == s2.x[v]);
    }
    // serial mode refreshes r between the two column blocks, so block 1 moves differently
    Executor ser(*b.scan->matrix, b.y, {1, ExecutionMode::serial_faithful});
    SolverState s3 = SolverState::initial(b.scan->partition, 64, b.y);
    ser.run_epoch(s3, both);
    bool differs = false;
    for (std::size_t v : b.scan->partition.col_blocks[1].voxels) {
        differs = differs || s3.x[v] != s1.x[v];
    }
    CHECK(differs);
}

TEST_CASE("epoch counters") {
    const Bench b = make_bench();
    Executor exec(*b.scan->matrix, b.y, {2, ExecutionMode::parallel});
    SolverState state = SolverState::initial(b.scan->partition, 64, b.y);
    const auto tasks = plan_epoch(b, 3, 3, 0);
    const EpochCounters c = exec.run_epoch(state, tasks);
    CHECK(c.tasks == tasks.size());
    std::size_t bytes = 0;
    for (const auto& t : tasks) {
        std::size_t rows = 0;
        for (std::size_t i : t.row_blocks) {
            rows += b.scan->partition.row_blocks[i].size();
        }
        bytes += Executor::task_bytes(rows, b.scan->partition.col_blocks[t.col_block].size());
    }
    CHECK(c.bytes_moved == bytes);
    CHECK(c.null_space_events == 0);
    CHECK(c.seconds >= 0.0);
}

TEST_CASE("empty epoch only advances the version") {
    const Bench b = make_bench();
    Executor exec(*b.scan->matrix, b.y, {4, ExecutionMode::parallel});
    SolverState state = SolverState::initial(b.scan->partition, 64, b.y);
    const auto c = exec.run_epoch(state, {});
    CHECK(c.tasks == 0);
    CHECK(state.version == 1);
    CHECK(state.x == std::vector<double>(64, 0.0));
    CHECK(state.r == b.y);
}

TEST_CASE("a failing task rolls the epoch back") {
    const Bench b = make_bench();
    for (auto mode : {ExecutionMode::serial_faithful, ExecutionMode::parallel}) {
        for (std::size_t workers : {1u, 4u}) {
            Executor exec(*b.scan->matrix, b.y, {workers, mode});
            SolverState state = SolverState::initial(b.scan->partition, 64, b.y);
            exec.run_epoch(state, plan_epoch(b, 1, 1, 0));
            const SolverState before = state;

            auto tasks = plan_epoch(b, 2, 1, state.version);
            REQUIRE(tasks.size() > 3);
            tasks[tasks.size() - 2].beta = std::nan("");
            try {
                exec.run_epoch(state, tasks);
                FAIL("expected a task failure");
            } catch (const TaskFailure& e) {
                CHECK(e.task() == tasks.size() - 2);
                CHECK(e.epoch() == 2);
                CHECK(e.block() == tasks[tasks.size() - 2].col_block);
            }
            CHECK(state.x == before.x);
            CHECK(state.r == before.r);
            CHECK(state.z == before.z);
            CHECK(state.version == before.version);
        }
    }
}

TEST_CASE("task validation") {
    const Bench b = make_bench();
    Executor exec(*b.scan->matrix, b.y, {1, ExecutionMode::parallel});
    SolverState state = SolverState::initial(b.scan->partition, 64, b.y);
    const std::vector<TaskDescriptor> empty_rows{{1, 0, {}, 0, 1.0}};
    CHECK_THROWS_AS(exec.run_epoch(state, empty_rows), ContractError);
    const std::vector<TaskDescriptor> repeated{{1, 0, {2, 2}, 0, 1.0}};
    CHECK_THROWS_AS(exec.run_epoch(state, repeated), ContractError);
    const std::vector<TaskDescriptor> unknown{{1, 0, {999}, 0, 1.0}};
    CHECK_THROWS_AS(exec.run_epoch(state, unknown), ContractError);
    const std::vector<TaskDescriptor> future{{1, 0, {1}, 5, 1.0}};
    CHECK_THROWS_AS(exec.run_epoch(state, future), ContractError);
    CHECK(state.version == 0);
    CHECK_THROWS_AS(Executor(*b.scan->matrix, b.y, {0, ExecutionMode::parallel}), ConfigError);
    CHECK_THROWS_AS(Executor(*b.scan->matrix, std::vector<double>(3), {1, ExecutionMode::parallel}), ContractError);
}

TEST_CASE("execution mode names") {
    CHECK(parse_execution_mode("parallel") == ExecutionMode::parallel);
    CHECK(parse_execution_mode(to_string(ExecutionMode::serial_faithful)) == ExecutionMode::serial_faithful);
    CHECK_THROWS_AS(parse_execution_mode("async"), ConfigError);
}
