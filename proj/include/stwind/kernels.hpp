#pragma once

// Data-parallel inner loops. Every kernel has a plain serial reference and an
// OpenMP version; both write identical results (outputs are partitioned, never
// reduced across threads), so tests compare them bit for bit unless noted.

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace stwind {

enum class Execution { kSerial, kParallel };

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace kernels {

/// One summand of a fixed-pattern linear combination: `values[k]` lands at
/// position `positions[k]` (sorted ascending) of the output value array.
struct ScatterTerm {
  std::span<const std::int64_t> positions;
  std::span<const double> values;
};

/// out[p] = sum_t coeffs[t] * term_t[p], terms added in order.
void combine_terms(std::span<const ScatterTerm> terms, std::span<const double> coeffs, std::span<double> out,
                   Execution exec);

/// Sample CRPS per row of `samples` (cases x n) against `truth`:
/// mean |x_k - y| - 1/(2 n^2) sum_{k,l} |x_k - x_l|.
/// Serial: the direct double sum. Parallel: sorted O(n log n) form; agrees with
/// the serial result to rounding (not bitwise).
void crps_rows(const RowMatrix& samples, std::span<const double> truth, std::span<double> out, Execution exec);

/// Empirical quantiles with linear interpolation (position (n - 1) alpha in
/// the sorted sample), one row per case: out is cases x alphas.
void quantile_rows(const RowMatrix& samples, std::span<const double> alphas, RowMatrix& out, Execution exec);

/// Row means of `samples`.
void mean_rows(const RowMatrix& samples, std::span<double> out, Execution exec);

/// n_mc draws of Binomial(n_cases, alpha) / n_cases for each alpha, sorted
/// ascending; stream for alpha i is seeded from (seed, i). out is alphas x n_mc.
void binomial_coverage_draws(std::int64_t n_cases, std::span<const double> alphas, std::int64_t n_mc,
                             std::uint64_t seed, RowMatrix& out, Execution exec);

/// Standard normal draws, one row per sample, each row from its own stream
/// seeded by (seed, row).
void standard_normal_rows(std::uint64_t seed, RowMatrix& out, Execution exec);

}  // namespace kernels
}  // namespace stwind
