#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "csgd/rng.hpp"

namespace csgd {

enum class SamplingStrategy { random, importance, mixed };

std::string_view to_string(SamplingStrategy s);
SamplingStrategy parse_sampling_strategy(std::string_view text);

struct SamplingConfig {
    SamplingStrategy strategy = SamplingStrategy::importance;
    double alpha = 1.0;       // fraction of row blocks used per column block
    double gamma = 1.0;       // fraction of column blocks visited per epoch
    double theta_step = 0.0;  // per-epoch increment of the mixing parameter (mixed only)
    std::uint64_t seed = 0;

    void validate() const;
};

/// ceil(fraction * total), at least 1 for a positive fraction.
std::size_t fraction_count(double fraction, std::size_t total);

/// ceil(gamma * n) distinct column blocks, uniformly without replacement.
std::vector<std::size_t> select_column_blocks(std::size_t n, double gamma, Rng& rng);

/// k distinct indices by sequential weighted draws without replacement; each draw
/// is proportional to the weights still in the pool. Zero weights are never drawn.
/// `context` names the column block in error messages.
std::vector<std::size_t> select_row_blocks(std::span<const double> weights, std::size_t k, Rng& rng,
                                           std::string_view context = {});

/// raw_i + theta * (max(raw) - raw_i): theta = 0 keeps the importance weights,
/// theta = 1 flattens them to uniform.
std::vector<double> mixed_weights(std::span<const double> raw, double theta);

/// Mixing state advanced once per epoch. theta is recomputed from the advance
/// count so repeated small steps land exactly on 1.
struct ThetaState {
    double theta = 0.0;
    double step = 0.0;
    double start = 0.0;
    std::size_t advances = 0;

    static ThetaState initial(double start, double step) { return {start, step, start, 0}; }
};

ThetaState advance_theta(ThetaState state);

/// Row-block weights the given strategy uses for one column block.
std::vector<double> strategy_weights(SamplingStrategy strategy, std::span<const double> raw, double theta);

}  // namespace csgd
