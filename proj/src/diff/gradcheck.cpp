#include "sepclr/diff/gradcheck.hpp"

#include <cmath>
#include <string>

#include "sepclr/error.hpp"

namespace sepclr::diff {

namespace {

double evaluate(const ScalarFn& f, const Shape& shape, const std::vector<double>& x, std::size_t coord) {
  Tape tape;
  const auto xa = tape.leaf(shape, x, false);
  const double v = f(tape, xa).item();
  if (!std::isfinite(v)) {
    throw Error("check_gradients: function is non-finite when perturbing coordinate " + std::to_string(coord));
  }
  return v;
}

}  // namespace

GradCheckReport check_gradients(const ScalarFn& f, const Shape& shape, const std::vector<double>& x, double h,
                                double rtol) {
  if (!(h > 0.0)) throw InvalidArgument("check_gradients: step h must be positive");
  std::vector<double> analytic;
  {
    Tape tape;
    const auto xa = tape.leaf(shape, x, true);
    const auto y = f(tape, xa);
    if (!std::isfinite(y.item())) throw Error("check_gradients: function is non-finite at the base point");
    tape.backward(y);
    const auto g = xa.grad();
    analytic.assign(g.begin(), g.end());
    if (analytic.empty()) analytic.assign(x.size(), 0.0);
  }
  GradCheckReport report;
  report.coordinates = x.size();
  std::vector<double> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double fp = evaluate(f, shape, probe, i);
    probe[i] = x[i] - h;
    const double fm = evaluate(f, shape, probe, i);
    probe[i] = x[i];
    const double numeric = (fp - fm) / (2.0 * h);
    const double diff = std::abs(analytic[i] - numeric);
    double rel = 0.0;
    if (diff > kGradCheckAbsFloor) rel = diff / std::max(std::abs(analytic[i]), std::abs(numeric));
    if (i == 0 || rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_index = i;
      report.analytic_at_worst = analytic[i];
      report.numeric_at_worst = numeric;
    }
  }
  report.passed = report.max_rel_error <= rtol;
  return report;
}

GradCheckReport check_gradients(const ScalarFn& f, const Matrix& x, double h, double rtol) {
  return check_gradients(f, {x.rows(), x.cols()}, x.values(), h, rtol);
}

}  // namespace sepclr::diff
