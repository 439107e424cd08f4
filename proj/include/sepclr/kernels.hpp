#pragma once

#include "sepclr/diff/tape.hpp"

namespace sepclr::kernels {

/// Kernel bandwidth. For the Gaussian kernel tau plays the role of the
/// variance scale (exp(-d^2 / 2 tau)); for von Mises-Fisher the
/// concentration is 1 / tau.
class Bandwidth {
 public:
  explicit Bandwidth(double tau);
  double tau() const { return tau_; }
  double concentration() const { return 1.0 / tau_; }

 private:
  double tau_;
};

inline constexpr double kDefaultTau = 0.5;

/// (i, j) -> ||a_i - b_j||^2, clamped at 0.
diff::DiffArray pairwise_sq_dists(const diff::DiffArray& a, const diff::DiffArray& b);

/// Log Gaussian kernel -d2 / (2 tau). The normalizer log sqrt(2 pi tau) is
/// dropped everywhere.
diff::DiffArray gaussian_log_kernel(const diff::DiffArray& d2, Bandwidth bw);

/// Log von Mises-Fisher kernel (a_i . b_j) / tau on unit rows, without the
/// -1/tau - log C(kappa) constant. On unit rows it differs from the
/// Gaussian log-kernel of the same pair by exactly 1/tau.
///
/// Throws InvalidArgument naming the first row whose norm is off by more
/// than 1e-6.
diff::DiffArray vmf_log_kernel(const diff::DiffArray& a, const diff::DiffArray& b, Bandwidth bw);

inline constexpr double kUnitNormTolerance = 1e-6;

/// Throws InvalidArgument if some row of m is not unit-norm.
void require_unit_rows(const diff::DiffArray& m, const char* what);

}  // namespace sepclr::kernels
