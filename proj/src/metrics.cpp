#include "csgd/metrics.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "csgd/errors.hpp"

namespace csgd {
namespace {

double ratio_db(std::span<const double> ref, std::span<const double> est, const char* what) {
    if (ref.size() != est.size()) {
        throw ContractError(std::string(what) + ": length mismatch " + std::to_string(ref.size()) + " vs " +
                            std::to_string(est.size()));
    }
    long double ref_sq = 0.0L;
    long double diff_sq = 0.0L;
    for (std::size_t k = 0; k < ref.size(); ++k) {
        const long double d = static_cast<long double>(ref[k]) - est[k];
        ref_sq += static_cast<long double>(ref[k]) * ref[k];
        diff_sq += d * d;
    }
    if (!(ref_sq > 0.0L)) {
        throw ContractError(std::string(what) + ": reference vector is zero");
    }
    if (diff_sq == 0.0L) {
        return std::numeric_limits<double>::infinity();
    }
    return static_cast<double>(10.0L * std::log10(ref_sq / diff_sq));
}

void write_number(std::ostream& os, double v) {
    if (std::isnan(v)) {
        os << "nan";
    } else if (std::isinf(v)) {
        os << (v > 0 ? "inf" : "-inf");
    } else {
        os << v;
    }
}

}  // namespace

double snr_db(std::span<const double> x_true, std::span<const double> x_est) {
    return ratio_db(x_true, x_est, "snr_db");
}

double observation_gap_db(std::span<const double> y, std::span<const double> y_est) {
    return ratio_db(y, y_est, "observation_gap_db");
}

void ConvergenceTrace::append(const TraceRow& row) {
    if (!rows.empty() && row.epoch <= rows.back().epoch) {
        throw InternalError("trace rows must have strictly increasing epochs");
    }
    rows.push_back(row);
}

void ConvergenceTrace::write_csv(std::ostream& os) const {
    const auto old = os.precision(12);
    os << "epoch,effective_epoch,snr_db,obs_gap_db,wall_seconds,mode,theta\n";
    for (const auto& r : rows) {
        os << r.epoch << ',';
        write_number(os, r.effective_epoch);
        os << ',';
        write_number(os, r.snr_db);
        os << ',';
        write_number(os, r.obs_gap_db);
        os << ',';
        write_number(os, r.wall_seconds);
        os << ',' << to_string(r.mode) << ',';
        write_number(os, r.theta);
        os << '\n';
    }
    os.precision(old);
}

void ConvergenceTrace::write_counters_csv(std::ostream& os) const {
    os << "epoch,tasks,bytes_moved,null_space_events,seconds\n";
    for (const auto& c : counters) {
        os << c.epoch << ',' << c.tasks << ',' << c.bytes_moved << ',' << c.null_space_events << ',' << c.seconds
           << '\n';
    }
}

std::vector<double> ConvergenceTrace::snr_series() const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        out.push_back(r.snr_db);
    }
    return out;
}

}  // namespace csgd
