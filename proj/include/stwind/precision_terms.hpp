#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "stwind/kernels.hpp"
#include "stwind/spde.hpp"

namespace stwind {

/// Symmetric sparse matrix of the form sum_t c_t M_t over fixed terms M_t.
/// Only the lower triangle is kept, and every evaluation shares one nonzero
/// pattern (explicit zeros included), so a symbolic Cholesky analysis can be
/// reused across coefficient values.
class TermCombination {
 public:
  TermCombination() = default;
  explicit TermCombination(const std::vector<SparseMatrix>& terms);

  Index rows() const { return pattern_.rows(); }
  Index n_terms() const { return static_cast<Index>(positions_.size()); }
  Index nnz() const { return pattern_.nonZeros(); }

  /// Lower triangle of sum_t coeffs[t] * M_t.
  SparseMatrix evaluate(std::span<const double> coeffs, Execution exec = Execution::kParallel) const;
  void evaluate_into(std::span<const double> coeffs, SparseMatrix& out, Execution exec = Execution::kParallel) const;

 private:
  SparseMatrix pattern_;
  std::vector<std::vector<std::int64_t>> positions_;
  std::vector<std::vector<double>> values_;
};

}  // namespace stwind
