#include "stwind/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <omp.h>

#include "stwind/error.hpp"
#include "stwind/rng.hpp"

namespace stwind::kernels {

namespace {

void combine_range(std::span<const ScatterTerm> terms, std::span<const double> coeffs, std::span<double> out,
                   std::int64_t lo, std::int64_t hi) {
  std::fill(out.begin() + lo, out.begin() + hi, 0.0);
  for (std::size_t t = 0; t < terms.size(); ++t) {
    const auto& pos = terms[t].positions;
    const auto& val = terms[t].values;
    const double c = coeffs[t];
    auto first = std::lower_bound(pos.begin(), pos.end(), lo);
    for (auto k = static_cast<std::size_t>(first - pos.begin()); k < pos.size() && pos[k] < hi; ++k)
      out[static_cast<std::size_t>(pos[k])] += c * val[k];
  }
}

// Mean absolute error taken relative to the first term, so identical samples
// give |x - y| without rounding.
double mean_abs_error(const double* x, Eigen::Index n, double y) {
  const double d0 = std::abs(x[0] - y);
  double excess = 0.0;
  for (Eigen::Index k = 1; k < n; ++k) excess += std::abs(x[k] - y) - d0;
  return d0 + excess / static_cast<double>(n);
}

double crps_direct(const double* x, Eigen::Index n, double y) {
  double spread = 0.0;
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index l = 0; l < n; ++l) spread += std::abs(x[k] - x[l]);
  const double dn = static_cast<double>(n);
  return mean_abs_error(x, n, y) - spread / (2.0 * dn * dn);
}

double crps_sorted(std::vector<double>& x, double y) {
  std::sort(x.begin(), x.end());
  const auto n = static_cast<double>(x.size());
  double weighted = 0.0;
  // sum_{k,l} |x_k - x_l| = 2 sum_i (2i - n + 1) x_(i), 0-based; the weights
  // sum to zero, so shifting by the minimum changes nothing.
  for (std::size_t i = 1; i < x.size(); ++i) weighted += (2.0 * static_cast<double>(i) + 1.0 - n) * (x[i] - x[0]);
  return mean_abs_error(x.data(), static_cast<Eigen::Index>(x.size()), y) - weighted / (n * n);
}

void quantiles_of_row(const double* row, Eigen::Index n, std::span<const double> alphas, double* out,
                      std::vector<double>& scratch) {
  scratch.assign(row, row + n);
  std::sort(scratch.begin(), scratch.end());
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    const double h = static_cast<double>(n - 1) * alphas[a];
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, static_cast<std::size_t>(n - 1));
    out[a] = scratch[lo] + (h - static_cast<double>(lo)) * (scratch[hi] - scratch[lo]);
  }
}

void binomial_row(std::int64_t n_cases, double alpha, std::uint64_t seed, double* out, std::int64_t n_mc) {
  Rng rng(seed);
  std::binomial_distribution<std::int64_t> dist(n_cases, alpha);
  for (std::int64_t m = 0; m < n_mc; ++m) out[m] = static_cast<double>(dist(rng)) / static_cast<double>(n_cases);
  std::sort(out, out + n_mc);
}

void normal_row(std::uint64_t seed, double* out, Eigen::Index n) {
  Rng rng(seed);
  std::normal_distribution<double> z;
  for (Eigen::Index k = 0; k < n; ++k) out[k] = z(rng);
}

}  // namespace

void combine_terms(std::span<const ScatterTerm> terms, std::span<const double> coeffs, std::span<double> out,
                   Execution exec) {
  if (coeffs.size() != terms.size()) throw DimensionError("one coefficient per term required");
  const auto n = static_cast<std::int64_t>(out.size());
  if (exec == Execution::kSerial) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t t = 0; t < terms.size(); ++t)
      for (std::size_t k = 0; k < terms[t].positions.size(); ++k)
        out[static_cast<std::size_t>(terms[t].positions[k])] += coeffs[t] * terms[t].values[k];
    return;
  }
  constexpr std::int64_t kChunk = 1 << 14;
  const std::int64_t n_chunks = (n + kChunk - 1) / kChunk;
#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < n_chunks; ++c)
    combine_range(terms, coeffs, out, c * kChunk, std::min(n, (c + 1) * kChunk));
}

void crps_rows(const RowMatrix& samples, std::span<const double> truth, std::span<double> out, Execution exec) {
  const Eigen::Index cases = samples.rows(), n = samples.cols();
  if (static_cast<Eigen::Index>(truth.size()) != cases || static_cast<Eigen::Index>(out.size()) != cases)
    throw DimensionError("crps: truth/out length must equal the number of cases");
  if (n < 1) throw ArgumentError("crps needs at least one sample");
  if (exec == Execution::kSerial) {
    for (Eigen::Index c = 0; c < cases; ++c) out[c] = crps_direct(samples.row(c).data(), n, truth[c]);
    return;
  }
#pragma omp parallel
  {
    std::vector<double> scratch;
#pragma omp for schedule(static)
    for (Eigen::Index c = 0; c < cases; ++c) {
      scratch.assign(samples.row(c).data(), samples.row(c).data() + n);
      out[c] = crps_sorted(scratch, truth[c]);
    }
  }
}

void quantile_rows(const RowMatrix& samples, std::span<const double> alphas, RowMatrix& out, Execution exec) {
  const Eigen::Index cases = samples.rows(), n = samples.cols();
  if (n < 1) throw ArgumentError("quantiles need at least one sample");
  out.resize(cases, static_cast<Eigen::Index>(alphas.size()));
  if (exec == Execution::kSerial) {
    std::vector<double> scratch;
    for (Eigen::Index c = 0; c < cases; ++c) quantiles_of_row(samples.row(c).data(), n, alphas, out.row(c).data(), scratch);
    return;
  }
#pragma omp parallel
  {
    std::vector<double> scratch;
#pragma omp for schedule(static)
    for (Eigen::Index c = 0; c < cases; ++c) quantiles_of_row(samples.row(c).data(), n, alphas, out.row(c).data(), scratch);
  }
}

void mean_rows(const RowMatrix& samples, std::span<double> out, Execution exec) {
  const Eigen::Index cases = samples.rows();
  if (static_cast<Eigen::Index>(out.size()) != cases) throw DimensionError("mean_rows: output length mismatch");
  if (exec == Execution::kSerial) {
    for (Eigen::Index c = 0; c < cases; ++c) out[c] = samples.row(c).mean();
    return;
  }
#pragma omp parallel for schedule(static)
  for (Eigen::Index c = 0; c < cases; ++c) out[c] = samples.row(c).mean();
}

void binomial_coverage_draws(std::int64_t n_cases, std::span<const double> alphas, std::int64_t n_mc,
                             std::uint64_t seed, RowMatrix& out, Execution exec) {
  if (n_cases < 1 || n_mc < 1) throw ArgumentError("binomial draws need n_cases >= 1 and n_mc >= 1");
  const auto na = static_cast<Eigen::Index>(alphas.size());
  out.resize(na, n_mc);
  if (exec == Execution::kSerial) {
    for (Eigen::Index a = 0; a < na; ++a)
      binomial_row(n_cases, alphas[a], derive_seed(seed, {static_cast<std::uint64_t>(a)}), out.row(a).data(), n_mc);
    return;
  }
#pragma omp parallel for schedule(static)
  for (Eigen::Index a = 0; a < na; ++a)
    binomial_row(n_cases, alphas[a], derive_seed(seed, {static_cast<std::uint64_t>(a)}), out.row(a).data(), n_mc);
}

void standard_normal_rows(std::uint64_t seed, RowMatrix& out, Execution exec) {
  const Eigen::Index rows = out.rows(), cols = out.cols();
  if (exec == Execution::kSerial) {
    for (Eigen::Index r = 0; r < rows; ++r)
      normal_row(derive_seed(seed, {static_cast<std::uint64_t>(r)}), out.row(r).data(), cols);
    return;
  }
#pragma omp parallel for schedule(static)
  for (Eigen::Index r = 0; r < rows; ++r)
    normal_row(derive_seed(seed, {static_cast<std::uint64_t>(r)}), out.row(r).data(), cols);
}

}  // namespace stwind::kernels
