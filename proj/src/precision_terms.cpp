#include "stwind/precision_terms.hpp"

#include <algorithm>

#include "stwind/error.hpp"

namespace stwind {

TermCombination::TermCombination(const std::vector<SparseMatrix>& terms) {
  if (terms.empty()) throw ArgumentError("TermCombination needs at least one term");
  const Index n = terms.front().rows();
  std::vector<Eigen::Triplet<double>> trip;
  for (const auto& m : terms) {
    if (m.rows() != n || m.cols() != n) throw DimensionError("all terms must be square of equal size");
    for (Index k = 0; k < m.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(m, k); it; ++it)
        if (it.row() >= it.col()) trip.emplace_back(it.row(), it.col(), 1.0);
  }
  pattern_.resize(n, n);
  pattern_.setFromTriplets(trip.begin(), trip.end());
  pattern_.makeCompressed();

  const auto* outer = pattern_.outerIndexPtr();
  const auto* inner = pattern_.innerIndexPtr();
  for (const auto& m : terms) {
    std::vector<std::int64_t> pos;
    std::vector<double> val;
    for (Index col = 0; col < m.outerSize(); ++col) {
      for (SparseMatrix::InnerIterator it(m, col); it; ++it) {
        if (it.row() < it.col()) continue;
        const auto* first = inner + outer[col];
        const auto* last = inner + outer[col + 1];
        const auto* hit = std::lower_bound(first, last, static_cast<int>(it.row()));
        pos.push_back(hit - inner);
        val.push_back(it.value());
      }
    }
    positions_.push_back(std::move(pos));
    values_.push_back(std::move(val));
  }
}

void TermCombination::evaluate_into(std::span<const double> coeffs, SparseMatrix& out, Execution exec) const {
  if (static_cast<Index>(coeffs.size()) != n_terms()) throw DimensionError("one coefficient per term required");
  if (out.rows() != rows() || out.nonZeros() != nnz() || !out.isCompressed()) out = pattern_;
  std::vector<kernels::ScatterTerm> terms;
  terms.reserve(positions_.size());
  for (std::size_t t = 0; t < positions_.size(); ++t) terms.push_back({positions_[t], values_[t]});
  kernels::combine_terms(terms, coeffs, std::span<double>(out.valuePtr(), static_cast<std::size_t>(nnz())), exec);
}

SparseMatrix TermCombination::evaluate(std::span<const double> coeffs, Execution exec) const {
  SparseMatrix out = pattern_;
  evaluate_into(coeffs, out, exec);
  return out;
}

}  // namespace stwind
