#include "sepclr/kernels.hpp"

#include <cmath>
#include <string>

#include "sepclr/diff/ops.hpp"
#include "sepclr/error.hpp"

namespace sepclr::kernels {

Bandwidth::Bandwidth(double tau) : tau_(tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidArgument("bandwidth tau must be positive and finite");
}

diff::DiffArray pairwise_sq_dists(const diff::DiffArray& a, const diff::DiffArray& b) {
  return diff::pairwise_sq_dists(a, b);
}

diff::DiffArray gaussian_log_kernel(const diff::DiffArray& d2, Bandwidth bw) {
  return diff::scale(d2, -1.0 / (2.0 * bw.tau()));
}

void require_unit_rows(const diff::DiffArray& m, const char* what) {
  const auto v = m.values();
  const std::size_t c = m.cols();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += v[i * c + j] * v[i * c + j];
    if (std::abs(std::sqrt(s) - 1.0) > kUnitNormTolerance) {
      throw InvalidArgument(std::string(what) + ": row " + std::to_string(i) + " has norm " +
                            std::to_string(std::sqrt(s)) + ", expected unit norm");
    }
  }
}

diff::DiffArray vmf_log_kernel(const diff::DiffArray& a, const diff::DiffArray& b, Bandwidth bw) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols()) {
    throw ShapeError("vmf_log_kernel", a.shape(), b.shape());
  }
  require_unit_rows(a, "vmf_log_kernel");
  require_unit_rows(b, "vmf_log_kernel");
  return diff::scale(diff::matmul(a, diff::transpose(b)), bw.concentration());
}

}  // namespace sepclr::kernels
