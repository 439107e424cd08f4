#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sepclr/diff/tape.hpp"

namespace sepclr::diff {

// Elementwise binary ops accept equal shapes, or a row vector ((C) or
// (1, C)) broadcast over the rows of an (N, C) operand.
DiffArray add(const DiffArray& a, const DiffArray& b);
DiffArray sub(const DiffArray& a, const DiffArray& b);
DiffArray mul(const DiffArray& a, const DiffArray& b);

DiffArray scale(const DiffArray& a, double s);
DiffArray add_scalar(const DiffArray& a, double s);

DiffArray matmul(const DiffArray& a, const DiffArray& b);
DiffArray transpose(const DiffArray& a);

DiffArray exp(const DiffArray& a);
DiffArray log(const DiffArray& a);
DiffArray relu(const DiffArray& a);
DiffArray tanh(const DiffArray& a);

DiffArray sum(const DiffArray& a);
DiffArray mean(const DiffArray& a);

/// log sum_j exp(a_ij) per row, max-shifted. Shape (N).
DiffArray row_logsumexp(const DiffArray& a);
/// log sum exp over every element, max-shifted. Scalar.
DiffArray logsumexp(const DiffArray& a);
/// ||a_i||^2 per row. Shape (N).
DiffArray row_sq_norms(const DiffArray& a);
/// ||a_i - b_j||^2 as ||a_i||^2 + ||b_j||^2 - 2 a_i.b_j, clamped at 0.
/// When a and b are the same array the diagonal is exactly 0.
DiffArray pairwise_sq_dists(const DiffArray& a, const DiffArray& b);

/// Rows scaled to unit L2 norm. Rows with norm below eps become the first
/// basis vector and pass no gradient.
DiffArray normalize_rows(const DiffArray& a, double eps = 1e-12);

struct ColumnStats {
  std::vector<double> mean;
  std::vector<double> var;  // biased
};
/// Per-column (x - mean) / sqrt(var + eps) with batch statistics.
DiffArray batch_standardize(const DiffArray& a, double eps, ColumnStats* stats_out = nullptr);

DiffArray gather_rows(const DiffArray& a, std::span<const std::size_t> rows);
DiffArray slice_cols(const DiffArray& a, std::size_t begin, std::size_t end);
DiffArray concat_rows(const DiffArray& a, const DiffArray& b);
DiffArray concat_cols(const DiffArray& a, const DiffArray& b);
/// Reinterprets the element buffer with a new shape of equal size.
DiffArray reshape(const DiffArray& a, Shape shape);

}  // namespace sepclr::diff
