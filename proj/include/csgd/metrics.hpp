#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "csgd/execution_mode.hpp"

namespace csgd {

/// 20 log10(|x_true| / |x_true - x_est|). Returns +infinity for an exact estimate.
double snr_db(std::span<const double> x_true, std::span<const double> x_est);

/// 20 log10(|y| / |y - y_est|), with y_est = A x_est. +infinity when the data fit is exact.
double observation_gap_db(std::span<const double> y, std::span<const double> y_est);

struct TraceRow {
    std::size_t epoch = 0;
    double effective_epoch = 0.0;
    double snr_db = 0.0;
    double obs_gap_db = 0.0;  // NaN when not evaluated for this epoch
    double wall_seconds = 0.0;
    ExecutionMode mode = ExecutionMode::serial_faithful;
    double theta = 0.0;
};

/// Per-epoch work and traffic counters from the executor.
struct EpochCounters {
    std::size_t epoch = 0;
    std::size_t tasks = 0;
    std::size_t bytes_moved = 0;
    std::size_t null_space_events = 0;
    double seconds = 0.0;
};

/// Residual bookkeeping audit: maintained r against y - sum_j z^j recomputed from scratch.
struct AuditRecord {
    std::size_t epoch = 0;
    double relative_error = 0.0;
};

struct ConvergenceTrace {
    std::vector<TraceRow> rows;
    std::vector<EpochCounters> counters;
    std::vector<AuditRecord> audits;

    /// Rows must arrive with strictly increasing epoch.
    void append(const TraceRow& row);

    /// epoch,effective_epoch,snr_db,obs_gap_db,wall_seconds,mode,theta
    void write_csv(std::ostream& os) const;
    void write_counters_csv(std::ostream& os) const;

    std::vector<double> snr_series() const;
};

}  // namespace csgd
