#include "csgd/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "csgd/errors.hpp"

namespace csgd {

std::string_view to_string(SamplingStrategy s) {
    switch (s) {
        case SamplingStrategy::random:
            return "random";
        case SamplingStrategy::importance:
            return "importance";
        case SamplingStrategy::mixed:
            return "mixed";
    }
    return "?";
}

SamplingStrategy parse_sampling_strategy(std::string_view text) {
    if (text == "random") {
        return SamplingStrategy::random;
    }
    if (text == "importance") {
        return SamplingStrategy::importance;
    }
    if (text == "mixed") {
        return SamplingStrategy::mixed;
    }
    throw ConfigError("unknown sampling strategy '" + std::string(text) + "'");
}

void SamplingConfig::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw ConfigError("alpha must lie in (0, 1]");
    }
    if (!(gamma > 0.0 && gamma <= 1.0)) {
        throw ConfigError("gamma must lie in (0, 1]");
    }
    if (!(theta_step >= 0.0) || !std::isfinite(theta_step)) {
        throw ConfigError("theta_step must be >= 0");
    }
}

std::size_t fraction_count(double fraction, std::size_t total) {
    // tolerate representation error such as 0.3 * 10 = 3.0000000000000004
    const double scaled = fraction * static_cast<double>(total);
    auto k = static_cast<std::size_t>(std::ceil(scaled - 1e-9 * std::max(1.0, scaled)));
    return std::clamp<std::size_t>(k, total == 0 ? 0 : 1, total);
}

std::vector<std::size_t> select_column_blocks(std::size_t n, double gamma, Rng& rng) {
    if (!(gamma > 0.0 && gamma <= 1.0)) {
        throw ConfigError("gamma must lie in (0, 1]");
    }
    const std::size_t k = fraction_count(gamma, n);
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    // partial Fisher-Yates
    for (std::size_t t = 0; t < k; ++t) {
        const std::size_t pick = t + rng.below(n - t);
        std::swap(pool[t], pool[pick]);
    }
    pool.resize(k);
    return pool;
}

std::vector<std::size_t> select_row_blocks(std::span<const double> weights, std::size_t k, Rng& rng,
                                           std::string_view context) {
    std::vector<std::size_t> pool;
    pool.reserve(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
            throw ScheduleError("row-block weight " + std::to_string(i) + " is negative or not finite");
        }
        if (weights[i] > 0.0) {
            pool.push_back(i);
        }
    }
    if (k > pool.size()) {
        throw ScheduleError("cannot draw " + std::to_string(k) + " row blocks for " +
                            (context.empty() ? std::string("column block") : std::string(context)) + ": only " +
                            std::to_string(pool.size()) + " have positive weight");
    }
    std::vector<std::size_t> picked;
    picked.reserve(k);
    for (std::size_t draw = 0; draw < k; ++draw) {
        const double u = rng.uniform();
        const double w0 = weights[pool.front()];
        const bool uniform =
            std::all_of(pool.begin(), pool.end(), [&](std::size_t i) { return weights[i] == w0; });
        std::size_t slot = 0;
        if (uniform) {
            slot = std::min(static_cast<std::size_t>(u * static_cast<double>(pool.size())), pool.size() - 1);
        } else {
            double total = 0.0;
            for (std::size_t i : pool) {
                total += weights[i];
            }
            const double target = u * total;
            double cum = 0.0;
            slot = pool.size() - 1;
            for (std::size_t s = 0; s < pool.size(); ++s) {
                cum += weights[pool[s]];
                if (target < cum) {
                    slot = s;
                    break;
                }
            }
        }
        picked.push_back(pool[slot]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(slot));
    }
    return picked;
}

std::vector<double> mixed_weights(std::span<const double> raw, double theta) {
    if (!(theta >= 0.0 && theta <= 1.0)) {
        throw ConfigError("theta must lie in [0, 1]");
    }
    double max_raw = 0.0;
    for (double v : raw) {
        if (!(v >= 0.0)) {
            throw ScheduleError("raw overlap weights must be non-negative");
        }
        max_raw = std::max(max_raw, v);
    }
    if (!(max_raw > 0.0)) {
        throw ScheduleError("all raw overlap weights are zero; nothing to mix");
    }
    // (1 - theta) raw + theta max is the same line written so both ends are exact
    std::vector<double> w(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        w[i] = (1.0 - theta) * raw[i] + theta * max_raw;
    }
    return w;
}

ThetaState advance_theta(ThetaState state) {
    ++state.advances;
    const double next = state.start + static_cast<double>(state.advances) * state.step;
    state.theta = next >= 1.0 - 1e-12 ? 1.0 : std::max(next, state.theta);
    return state;
}

std::vector<double> strategy_weights(SamplingStrategy strategy, std::span<const double> raw, double theta) {
    switch (strategy) {
        case SamplingStrategy::importance:
            return {raw.begin(), raw.end()};
        case SamplingStrategy::mixed:
            return mixed_weights(raw, theta);
        case SamplingStrategy::random:
            return std::vector<double>(raw.size(), 1.0);
    }
    return {};
}

}  // namespace csgd
