#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace csgd {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration values.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Geometrically undefined request (degenerate ray, source inside a block, ...).
class GeometryError : public Error {
public:
    using Error::Error;
};

/// Caller violated an operation contract (dimension mismatch and the like).
class ContractError : public Error {
public:
    using Error::Error;
};

/// The sampler cannot satisfy a selection request.
class ScheduleError : public Error {
public:
    using Error::Error;
};

/// Refusal to allocate beyond a configured memory budget.
class ResourceError : public Error {
public:
    using Error::Error;
};

/// Malformed input data (phantom files, schedules).
class InputError : public Error {
public:
    using Error::Error;
};

/// File system failure.
class IoError : public Error {
public:
    using Error::Error;
};

/// Broken internal bookkeeping; indicates a bug rather than bad input.
class InternalError : public Error {
public:
    using Error::Error;
};

/// The iteration blew up. Carries the epoch and column block where it was detected.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::size_t epoch, std::size_t block)
        : Error(what), epoch_(epoch), block_(block) {}

    std::size_t epoch() const noexcept { return epoch_; }
    std::size_t block() const noexcept { return block_; }

private:
    std::size_t epoch_;
    std::size_t block_;
};

}  // namespace csgd
