#pragma once

#include <string>
#include <string_view>

#include "csgd/errors.hpp"

namespace csgd {

/// serial_faithful refreshes the residual after every column block, as the
/// sequential loop does; parallel lets a whole epoch read the epoch-start residual
/// and refreshes it once at the barrier.
enum class ExecutionMode { serial_faithful, parallel };

inline std::string_view to_string(ExecutionMode mode) {
    return mode == ExecutionMode::parallel ? "parallel" : "serial_faithful";
}

inline ExecutionMode parse_execution_mode(std::string_view text) {
    if (text == "serial_faithful") {
        return ExecutionMode::serial_faithful;
    }
    if (text == "parallel") {
        return ExecutionMode::parallel;
    }
    throw ConfigError("unknown execution mode '" + std::string(text) + "'");
}

}  // namespace csgd
