#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "csgd/projector.hpp"

namespace csgd {

/// Squared norms of A g below this are treated as a null-space direction.
inline constexpr double kNullSpaceTolerance = 1e-30;

/// Outcome of one restricted steepest-descent step on (I_g, J).
struct BasicStep {
    std::vector<double> x_new;  // x_J + mu g_J
    std::vector<double> z;      // A_{I_g}^J x_new, rows concatenated in group order
    double mu = 0.0;
    double gradient_norm_sq = 0.0;
    bool null_space = false;  // g != 0 but |A g|^2 vanished; treated as a no-op
};

/// g_J = (A_I^J)^T r_I, mu = beta g'g / |A_I^J g|^2, x_new = x_J + mu g_J and
/// z = A_I^J x_new, where I is the union of `row_blocks` (in the given order)
/// and `r_rows` is r restricted to those rows in the same order.
BasicStep basic_iteration(const SystemMatrix& matrix, std::span<const std::size_t> row_blocks,
                          std::size_t col_block, std::span<const double> r_rows, std::span<const double> x_block,
                          double beta);

}  // namespace csgd
