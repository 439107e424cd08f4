#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "sepclr/diff/tape.hpp"
#include "sepclr/matrix.hpp"

namespace sepclr::diff {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  std::size_t coordinates = 0;
  bool passed = false;
};

/// Builds a scalar from x on a fresh tape.
using ScalarFn = std::function<DiffArray(Tape&, const DiffArray& x)>;

/// Compares the reverse-mode gradient of f at x against central differences
/// (f(x + h e_i) - f(x - h e_i)) / 2h. A coordinate whose absolute
/// discrepancy is at most 1e-7 counts as exact; the rest contribute
/// |analytic - numeric| / max(|analytic|, |numeric|).
///
/// Throws sepclr::Error naming the coordinate if f is non-finite.
GradCheckReport check_gradients(const ScalarFn& f, const Shape& shape, const std::vector<double>& x,
                                double h = 1e-5, double rtol = 1e-4);
GradCheckReport check_gradients(const ScalarFn& f, const Matrix& x, double h = 1e-5, double rtol = 1e-4);

inline constexpr double kGradCheckAbsFloor = 1e-7;

}  // namespace sepclr::diff
