#include "sepclr/diff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "sepclr/error.hpp"
#include "sepclr/simd/dispatch.hpp"

namespace sepclr::diff {

namespace {

using simd::Trans;

enum class Broadcast { none, rhs_row, lhs_row };

bool is_row_vector_of(const DiffArray& v, const DiffArray& m) {
  if (m.rank() != 2) return false;
  if (v.rank() == 1) return v.size() == m.cols();
  if (v.rank() == 2) return v.rows() == 1 && v.cols() == m.cols();
  return false;
}

Broadcast broadcast_kind(const char* op, const DiffArray& a, const DiffArray& b) {
  if (a.shape() == b.shape()) return Broadcast::none;
  if (is_row_vector_of(b, a)) return Broadcast::rhs_row;
  if (is_row_vector_of(a, b)) return Broadcast::lhs_row;
  throw ShapeError(op, a.shape(), b.shape());
}

void require_matrix(const char* op, const DiffArray& a) {
  if (a.rank() != 2) throw ShapeError(op, "expected a matrix, got shape " + format_shape(a.shape()));
}

template <typename Fwd, typename DaFn, typename DbFn>
DiffArray elementwise_binary(const char* op, const DiffArray& a, const DiffArray& b, Fwd fwd, DaFn da,
                             DbFn db) {
  const Broadcast kind = broadcast_kind(op, a, b);
  const bool swap = kind == Broadcast::lhs_row;
  const DiffArray& big = swap ? b : a;
  const std::size_t n = big.size();
  const std::size_t cols = kind == Broadcast::none ? n : big.cols();
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t ia = kind == Broadcast::lhs_row ? i % cols : i;
    const std::size_t ib = kind == Broadcast::rhs_row ? i % cols : i;
    out[i] = fwd(av[ia], bv[ib]);
  }
  const std::size_t ida = a.id();
  const std::size_t idb = b.id();
  return a.tape().record(big.shape(), std::move(out), {a, b},
                         [=](Tape& t, std::size_t self) {
                           const auto& g = t.grad(self);
                           const auto& x = t.value(ida);
                           const auto& y = t.value(idb);
                           const std::size_t total = g.size();
                           if (t.requires_grad(ida)) {
                             auto& ga = t.grad(ida);
                             for (std::size_t i = 0; i < total; ++i) {
                               const std::size_t ia = kind == Broadcast::lhs_row ? i % cols : i;
                               const std::size_t ib = kind == Broadcast::rhs_row ? i % cols : i;
                               ga[ia] += g[i] * da(x[ia], y[ib]);
                             }
                           }
                           if (t.requires_grad(idb)) {
                             auto& gb = t.grad(idb);
                             for (std::size_t i = 0; i < total; ++i) {
                               const std::size_t ia = kind == Broadcast::lhs_row ? i % cols : i;
                               const std::size_t ib = kind == Broadcast::rhs_row ? i % cols : i;
                               gb[ib] += g[i] * db(x[ia], y[ib]);
                             }
                           }
                         });
}

template <typename Fwd, typename Deriv>
DiffArray elementwise_unary(const DiffArray& a, Fwd fwd, Deriv deriv) {
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  const std::size_t ida = a.id();
  return a.tape().record(a.shape(), std::move(out), {a}, [=](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& x = t.value(ida);
    const auto& y = t.value(self);
    auto& ga = t.grad(ida);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(x[i], y[i]);
  });
}

}  // namespace

DiffArray add(const DiffArray& a, const DiffArray& b) {
  return elementwise_binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

DiffArray sub(const DiffArray& a, const DiffArray& b) {
  return elementwise_binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

DiffArray mul(const DiffArray& a, const DiffArray& b) {
  return elementwise_binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

DiffArray scale(const DiffArray& a, double s) {
  return elementwise_unary(
      a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

DiffArray add_scalar(const DiffArray& a, double s) {
  return elementwise_unary(
      a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

DiffArray exp(const DiffArray& a) {
  return elementwise_unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

DiffArray log(const DiffArray& a) {
  return elementwise_unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

DiffArray relu(const DiffArray& a) {
  return elementwise_unary(
      a, [](double x) { return x > 0.0 || std::isnan(x) ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

DiffArray tanh(const DiffArray& a) {
  return elementwise_unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

DiffArray matmul(const DiffArray& a, const DiffArray& b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  if (a.cols() != b.rows()) throw ShapeError("matmul", a.shape(), b.shape());
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n);
  simd::gemm(Trans::no, Trans::no, m, n, k, a.values().data(), b.values().data(), out.data());
  const std::size_t ida = a.id(), idb = b.id();
  return a.tape().record({m, n}, std::move(out), {a, b}, [=](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(ida)) {
      simd::gemm(Trans::no, Trans::yes, m, k, n, g.data(), t.value(idb).data(), t.grad(ida).data(), true);
    }
    if (t.requires_grad(idb)) {
      simd::gemm(Trans::yes, Trans::no, k, n, m, t.value(ida).data(), g.data(), t.grad(idb).data(), true);
    }
  });
}

DiffArray transpose(const DiffArray& a) {
  require_matrix("transpose", a);
  const std::size_t r = a.rows(), c = a.cols();
  const auto av = a.values();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  const std::size_t ida = a.id();
  return a.tape().record({c, r}, std::move(out), {a}, [=](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(ida);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
  });
}

DiffArray sum(const DiffArray& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  const std::size_t ida = a.id();
  return a.tape().record({}, {s}, {a}, [=](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    for (auto& x : t.grad(ida)) x += g;
  });
}

DiffArray mean(const DiffArray& a) {
  if (a.size() == 0) throw ShapeError("mean", "empty array");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

DiffArray row_logsumexp(const DiffArray& a) {
  const std::size_t r = a.rank() == 2 ? a.rows() : 1;
  const std::size_t c = a.rank() == 2 ? a.cols() : a.size();
  if (c == 0) throw ShapeError("row_logsumexp", "rows are empty");
  const auto av = a.values();
  std::vector<double> out(r);
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = av.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    if (mx == -std::numeric_limits<double>::infinity()) {
      out[i] = mx;
      continue;
    }
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(row[j] - mx);
    out[i] = mx + std::log(s);
  }
  const std::size_t ida = a.id();
  return a.tape().record({r}, std::move(out), {a}, [=](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& x = t.value(ida);
    const auto& y = t.value(self);
    auto& ga = t.grad(ida);
    for (std::size_t i = 0; i < r; ++i) {
      if (y[i] == -std::numeric_limits<double>::infinity()) continue;
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[i] * std::exp(x[i * c + j] - y[i]);
    }
  });
}

DiffArray logsumexp(const DiffArray& a) {
  return reshape(row_logsumexp(reshape(a, {1, a.size()})), {});
}

DiffArray row_sq_norms(const DiffArray& a) {
  require_matrix("row_sq_norms", a);
  const std::size_t r = a.rows(), c = a.cols();
  const auto& kt = simd::active();
  const auto av = a.values();
  std::vector<double> out(r);
  for (std::size_t i = 0; i < r; ++i) out[i] = kt.dot(av.data() + i * c, av.data() + i * c, c);
  const std::size_t ida = a.id();
  return a.tape().record({r}, std::move(out), {a}, [=](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& x = t.value(ida);
    auto& ga = t.grad(ida);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += 2.0 * g[i] * x[i * c + j];
  });
}

DiffArray pairwise_sq_dists(const DiffArray& a, const DiffArray& b) {
  require_matrix("pairwise_sq_dists", a);
  require_matrix("pairwise_sq_dists", b);
  if (a.cols() != b.cols()) throw ShapeError("pairwise_sq_dists", a.shape(), b.shape());
  const std::size_t n = a.rows(), m = b.rows(), d = a.cols();
  const bool same = a.id() == b.id();
  const auto& kt = simd::active();
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> na(n), nb(m);
  for (std::size_t i = 0; i < n; ++i) na[i] = kt.dot(av.data() + i * d, av.data() + i * d, d);
  for (std::size_t j = 0; j < m; ++j) nb[j] = kt.dot(bv.data() + j * d, bv.data() + j * d, d);
  std::vector<double> out(n * m);
  simd::gemm(Trans::no, Trans::yes, n, m, d, av.data(), bv.data(), out.data());
  // Entries clamped at zero carry no gradient; mask them.
  std::vector<unsigned char> active(n * m, 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double v = na[i] + nb[j] - 2.0 * out[i * m + j];
      if (same && i == j) {
        v = 0.0;
        active[i * m + j] = 0;
      } else if (v < 0.0) {
        v = 0.0;
        active[i * m + j] = 0;
      }
      out[i * m + j] = v;
    }
  }
  const std::size_t ida = a.id(), idb = b.id();
  return a.tape().record({n, m}, std::move(out), {a, b},
                         [=, active = std::move(active)](Tape& t, std::size_t self) {
                           std::vector<double> g = t.grad(self);
                           for (std::size_t k = 0; k < g.size(); ++k)
                             if (!active[k]) g[k] = 0.0;
                           const auto& x = t.value(ida);
                           const auto& y = t.value(idb);
                           // dA = 2 (diag(rowsum G) A - G B)
                           if (t.requires_grad(ida)) {
                             auto& ga = t.grad(ida);
                             for (std::size_t i = 0; i < n; ++i) {
                               double rs = 0.0;
                               for (std::size_t j = 0; j < m; ++j) rs += g[i * m + j];
                               for (std::size_t k = 0; k < d; ++k) ga[i * d + k] += 2.0 * rs * x[i * d + k];
                             }
                             std::vector<double> gb_prod(n * d);
                             simd::gemm(Trans::no, Trans::no, n, d, m, g.data(), y.data(), gb_prod.data());
                             for (std::size_t k = 0; k < n * d; ++k) ga[k] -= 2.0 * gb_prod[k];
                           }
                           // dB = 2 (diag(colsum G) B - G^T A)
                           if (t.requires_grad(idb)) {
                             auto& gb = t.grad(idb);
                             std::vector<double> cs(m, 0.0);
                             for (std::size_t i = 0; i < n; ++i)
                               for (std::size_t j = 0; j < m; ++j) cs[j] += g[i * m + j];
                             for (std::size_t j = 0; j < m; ++j)
                               for (std::size_t k = 0; k < d; ++k) gb[j * d + k] += 2.0 * cs[j] * y[j * d + k];
                             std::vector<double> ga_prod(m * d);
                             simd::gemm(Trans::yes, Trans::no, m, d, n, g.data(), x.data(), ga_prod.data());
                             for (std::size_t k = 0; k < m * d; ++k) gb[k] -= 2.0 * ga_prod[k];
                           }
                         });
}

DiffArray normalize_rows(const DiffArray& a, double eps) {
  require_matrix("normalize_rows", a);
  const std::size_t r = a.rows(), c = a.cols();
  const auto av = a.values();
  std::vector<double> out(r * c, 0.0);
  std::vector<double> norms(r);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += av[i * c + j] * av[i * c + j];
    norms[i] = std::sqrt(s);
    if (norms[i] < eps) {
      if (c > 0) out[i * c] = 1.0;
    } else {
      for (std::size_t j = 0; j < c; ++j) out[i * c + j] = av[i * c + j] / norms[i];
    }
  }
  const std::size_t ida = a.id();
  return a.tape().record({r, c}, std::move(out), {a},
                         [=, norms = std::move(norms)](Tape& t, std::size_t self) {
                           const auto& g = t.grad(self);
                           const auto& y = t.value(self);
                           auto& ga = t.grad(ida);
                           for (std::size_t i = 0; i < r; ++i) {
                             if (norms[i] < eps) continue;
                             double yg = 0.0;
                             for (std::size_t j = 0; j < c; ++j) yg += y[i * c + j] * g[i * c + j];
                             for (std::size_t j = 0; j < c; ++j)
                               ga[i * c + j] += (g[i * c + j] - y[i * c + j] * yg) / norms[i];
                           }
                         });
}

DiffArray batch_standardize(const DiffArray& a, double eps, ColumnStats* stats_out) {
  require_matrix("batch_standardize", a);
  const std::size_t r = a.rows(), c = a.cols();
  if (r == 0) throw ShapeError("batch_standardize", "empty batch");
  const auto av = a.values();
  std::vector<double> mu(c, 0.0), var(c, 0.0), inv_std(c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) mu[j] += av[i * c + j];
  for (auto& m : mu) m /= static_cast<double>(r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const double dv = av[i * c + j] - mu[j];
      var[j] += dv * dv;
    }
  for (std::size_t j = 0; j < c; ++j) {
    var[j] /= static_cast<double>(r);
    inv_std[j] = 1.0 / std::sqrt(var[j] + eps);
  }
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = (av[i * c + j] - mu[j]) * inv_std[j];
  if (stats_out) *stats_out = ColumnStats{mu, var};
  const std::size_t ida = a.id();
  return a.tape().record({r, c}, std::move(out), {a},
                         [=, inv_std = std::move(inv_std)](Tape& t, std::size_t self) {
                           const auto& g = t.grad(self);
                           const auto& y = t.value(self);
                           auto& ga = t.grad(ida);
                           const double inv_n = 1.0 / static_cast<double>(r);
                           for (std::size_t j = 0; j < c; ++j) {
                             double sg = 0.0, sgy = 0.0;
                             for (std::size_t i = 0; i < r; ++i) {
                               sg += g[i * c + j];
                               sgy += g[i * c + j] * y[i * c + j];
                             }
                             for (std::size_t i = 0; i < r; ++i) {
                               ga[i * c + j] +=
                                   inv_std[j] * (g[i * c + j] - inv_n * sg - y[i * c + j] * inv_n * sgy);
                             }
                           }
                         });
}

DiffArray gather_rows(const DiffArray& a, std::span<const std::size_t> rows) {
  require_matrix("gather_rows", a);
  const std::size_t c = a.cols();
  const auto av = a.values();
  std::vector<double> out(rows.size() * c);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= a.rows()) {
      throw ShapeError("gather_rows", "row " + std::to_string(rows[i]) + " out of range for shape " +
                                          format_shape(a.shape()));
    }
    std::copy_n(av.data() + rows[i] * c, c, out.data() + i * c);
  }
  const std::size_t ida = a.id();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return a.tape().record({rows.size(), c}, std::move(out), {a},
                         [=, idx = std::move(idx)](Tape& t, std::size_t self) {
                           const auto& g = t.grad(self);
                           auto& ga = t.grad(ida);
                           for (std::size_t i = 0; i < idx.size(); ++i)
                             for (std::size_t j = 0; j < c; ++j) ga[idx[i] * c + j] += g[i * c + j];
                         });
}

DiffArray slice_cols(const DiffArray& a, std::size_t begin, std::size_t end) {
  require_matrix("slice_cols", a);
  if (begin >= end || end > a.cols()) {
    throw ShapeError("slice_cols", "columns [" + std::to_string(begin) + ", " + std::to_string(end) +
                                       ") invalid for shape " + format_shape(a.shape()));
  }
  const std::size_t r = a.rows(), c = a.cols(), w = end - begin;
  const auto av = a.values();
  std::vector<double> out(r * w);
  for (std::size_t i = 0; i < r; ++i) std::copy_n(av.data() + i * c + begin, w, out.data() + i * w);
  const std::size_t ida = a.id();
  return a.tape().record({r, w}, std::move(out), {a}, [=](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad(ida);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) ga[i * c + begin + j] += g[i * w + j];
  });
}

DiffArray concat_rows(const DiffArray& a, const DiffArray& b) {
  require_matrix("concat_rows", a);
  require_matrix("concat_rows", b);
  if (a.cols() != b.cols()) throw ShapeError("concat_rows", a.shape(), b.shape());
  std::vector<double> out(a.values().begin(), a.values().end());
  out.insert(out.end(), b.values().begin(), b.values().end());
  const std::size_t ida = a.id(), idb = b.id(), na = a.size();
  return a.tape().record({a.rows() + b.rows(), a.cols()}, std::move(out), {a, b},
                         [=](Tape& t, std::size_t self) {
                           const auto& g = t.grad(self);
                           if (t.requires_grad(ida)) {
                             auto& ga = t.grad(ida);
                             for (std::size_t k = 0; k < na; ++k) ga[k] += g[k];
                           }
                           if (t.requires_grad(idb)) {
                             auto& gb = t.grad(idb);
                             for (std::size_t k = 0; k < gb.size(); ++k) gb[k] += g[na + k];
                           }
                         });
}

DiffArray concat_cols(const DiffArray& a, const DiffArray& b) {
  const auto as_matrix = [](const DiffArray& v) { return v.rank() == 2 ? v : reshape(v, {v.size(), 1}); };
  const DiffArray am = as_matrix(a);
  const DiffArray bm = as_matrix(b);
  if (am.rows() != bm.rows()) throw ShapeError("concat_cols", a.shape(), b.shape());
  const std::size_t r = am.rows(), ca = am.cols(), cb = bm.cols(), c = ca + cb;
  const auto av = am.values();
  const auto bv = bm.values();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(av.data() + i * ca, ca, out.data() + i * c);
    std::copy_n(bv.data() + i * cb, cb, out.data() + i * c + ca);
  }
  const std::size_t ida = am.id(), idb = bm.id();
  return a.tape().record({r, c}, std::move(out), {am, bm}, [=](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(ida)) {
      auto& ga = t.grad(ida);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < ca; ++j) ga[i * ca + j] += g[i * c + j];
    }
    if (t.requires_grad(idb)) {
      auto& gb = t.grad(idb);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < cb; ++j) gb[i * cb + j] += g[i * c + ca + j];
    }
  });
}

DiffArray reshape(const DiffArray& a, Shape shape) {
  if (shape.size() > 2 || shape_size(shape) != a.size()) {
    throw ShapeError("reshape", a.shape(), shape);
  }
  const std::size_t ida = a.id();
  return a.tape().record(std::move(shape), std::vector<double>(a.values().begin(), a.values().end()), {a},
                         [=](Tape& t, std::size_t self) {
                           const auto& g = t.grad(self);
                           auto& ga = t.grad(ida);
                           for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
                         });
}

}  // namespace sepclr::diff
