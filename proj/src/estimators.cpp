#include "sepclr/estimators.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "sepclr/diff/ops.hpp"
#include "sepclr/error.hpp"

namespace sepclr::estimators {

namespace d = sepclr::diff;

namespace {

void require_rows(const char* op, const DiffArray& z, std::size_t min_rows) {
  if (z.rank() != 2) throw ShapeError(op, "expected an (N, D) matrix, got " + format_shape(z.shape()));
  if (z.rows() < min_rows) {
    throw InvalidArgument(std::string(op) + ": needs at least " + std::to_string(min_rows) + " rows, got " +
                          std::to_string(z.rows()));
  }
}

// Constant (N, N) matrix with -inf on the diagonal.
DiffArray self_mask(diff::Tape& tape, std::size_t n) {
  std::vector<double> m(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) m[i * n + i] = -std::numeric_limits<double>::infinity();
  return tape.leaf({n, n}, std::move(m));
}

// (1/N) sum_i log[(1/M) sum_j exp(logk_ij)] where M is the per-row count.
DiffArray mean_log_mean_exp(DiffArray logk, bool exclude_self) {
  const std::size_t n = logk.rows();
  if (exclude_self) logk = d::add(logk, self_mask(logk.tape(), n));
  const double per_row = static_cast<double>(exclude_self ? n - 1 : logk.cols());
  return d::add_scalar(d::mean(d::row_logsumexp(logk)), -std::log(per_row));
}

DiffArray null_row(diff::Tape& tape, const NullVector& s_prime, std::size_t dim, const char* op) {
  if (s_prime.s_prime.size() != dim) {
    throw ShapeError(op, "s' has dimension " + std::to_string(s_prime.s_prime.size()) + ", embeddings have " +
                             std::to_string(dim));
  }
  return tape.leaf({1, dim}, s_prime.s_prime);
}

void require_same_length(const char* op, const DiffArray& s_d, std::span<const double> a_d) {
  if (s_d.rank() != 2 || s_d.cols() != 1) {
    throw ShapeError(op, "salient coordinate must be an (N, 1) column, got " + format_shape(s_d.shape()));
  }
  if (s_d.rows() != a_d.size()) {
    throw ShapeError(op, "salient coordinate has " + std::to_string(s_d.rows()) + " rows, attribute has " +
                             std::to_string(a_d.size()));
  }
}

}  // namespace

void EmbeddingBatch::validate() const {
  if (!z.valid() || z.rank() != 2) throw ShapeError("EmbeddingBatch", "z must be an (N, D) matrix");
  if (!origin.empty() && origin.size() != z.rows()) {
    throw ShapeError("EmbeddingBatch", "origin tags " + std::to_string(origin.size()) + " for " +
                                           std::to_string(z.rows()) + " rows");
  }
  if (space == Space::common_sphere) kernels::require_unit_rows(z, "EmbeddingBatch");
}

DiffArray entropy_hat(const DiffArray& z, Bandwidth bw, EntropyOptions opts) {
  require_rows("entropy_hat", z, 2);
  const auto logk = kernels::gaussian_log_kernel(kernels::pairwise_sq_dists(z, z), bw);
  return d::scale(mean_log_mean_exp(logk, opts.exclude_self), -1.0);
}

DiffArray entropy_hat(const EmbeddingBatch& batch, Bandwidth bw, EntropyOptions opts) {
  batch.validate();
  return entropy_hat(batch.z, bw, opts);
}

DiffArray uniformity_loss(const DiffArray& z, Bandwidth bw, EntropyOptions opts) {
  require_rows("uniformity_loss", z, 2);
  const std::size_t n = z.rows();
  auto logk = kernels::gaussian_log_kernel(kernels::pairwise_sq_dists(z, z), bw);
  if (opts.exclude_self) logk = d::add(logk, self_mask(z.tape(), n));
  const double pairs = static_cast<double>(opts.exclude_self ? n * (n - 1) : n * n);
  return d::add_scalar(d::logsumexp(logk), -std::log(pairs));
}

DiffArray uniformity_loss(const EmbeddingBatch& batch, Bandwidth bw, EntropyOptions opts) {
  batch.validate();
  return uniformity_loss(batch.z, bw, opts);
}

DiffArray alignment_loss(const DiffArray& z, std::span<const DiffArray> views, Bandwidth bw) {
  if (views.empty()) throw InvalidArgument("alignment_loss: needs at least one view (K >= 1)");
  require_rows("alignment_loss", z, 1);
  DiffArray logk;
  for (std::size_t k = 0; k < views.size(); ++k) {
    if (views[k].shape() != z.shape()) throw ShapeError("alignment_loss", z.shape(), views[k].shape());
    const auto col = kernels::gaussian_log_kernel(d::row_sq_norms(d::sub(z, views[k])), bw);
    logk = k == 0 ? d::reshape(col, {z.rows(), 1}) : d::concat_cols(logk, col);
  }
  return d::scale(mean_log_mean_exp(logk, false), -1.0);
}

DiffArray sprime_uniformity_loss(const DiffArray& s_target, const NullVector& s_prime, Bandwidth bw) {
  require_rows("sprime_uniformity_loss", s_target, 1);
  const std::size_t n = s_target.rows();
  auto& tape = s_target.tape();
  const auto sp = null_row(tape, s_prime, s_target.cols(), "sprime_uniformity_loss");
  const double inv_tau = 1.0 / bw.tau();
  // Per row: logsumexp over [a_i, b_i1 - log 2N, ..., b_iN - log 2N].
  const auto to_null = d::scale(d::row_sq_norms(d::sub(s_target, sp)), -inv_tau);
  const auto pairwise = d::add_scalar(d::scale(d::pairwise_sq_dists(s_target, s_target), -inv_tau),
                                      -std::log(2.0 * static_cast<double>(n)));
  const auto per_row = d::row_logsumexp(d::concat_cols(to_null, pairwise));
  return d::add_scalar(d::logsumexp(per_row), -std::log(static_cast<double>(n)));
}

DiffArray infoless_loss(const DiffArray& s_background, const NullVector& s_prime, Bandwidth bw) {
  require_rows("infoless_loss", s_background, 1);
  const auto sp = null_row(s_background.tape(), s_prime, s_background.cols(), "infoless_loss");
  return d::scale(d::mean(d::row_sq_norms(d::sub(s_background, sp))), 1.0 / (2.0 * bw.tau()));
}

DiffArray kjem_loss(const DiffArray& c, const DiffArray& s, Bandwidth bw, EntropyOptions opts) {
  require_rows("kjem_loss", c, 2);
  require_rows("kjem_loss", s, 2);
  if (c.rows() != s.rows()) {
    throw ShapeError("kjem_loss", "common batch has " + std::to_string(c.rows()) + " rows, salient batch has " +
                                      std::to_string(s.rows()));
  }
  const auto logk = d::add(kernels::gaussian_log_kernel(kernels::pairwise_sq_dists(c, c), bw),
                           kernels::gaussian_log_kernel(kernels::pairwise_sq_dists(s, s), bw));
  return mean_log_mean_exp(logk, opts.exclude_self);
}

DiffArray kmi_loss(const DiffArray& c, const DiffArray& s, Bandwidth bw, EntropyOptions opts) {
  const auto joint = kjem_loss(c, s, bw, opts);
  return d::add(d::add(entropy_hat(c, bw, opts), entropy_hat(s, bw, opts)), joint);
}

DiffArray mmd_loss(const DiffArray& cx, const DiffArray& cy, Bandwidth bw) {
  require_rows("mmd_loss", cx, 1);
  require_rows("mmd_loss", cy, 1);
  if (cx.cols() != cy.cols()) throw ShapeError("mmd_loss", cx.shape(), cy.shape());
  const auto k = [&](const DiffArray& a, const DiffArray& b) {
    return d::mean(d::exp(kernels::gaussian_log_kernel(kernels::pairwise_sq_dists(a, b), bw)));
  };
  return d::sub(d::add(k(cx, cx), k(cy, cy)), d::scale(k(cx, cy), 2.0));
}

Matrix attribute_weights(std::span<const double> a, double sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("attribute_weights: sigma must be positive");
  const std::size_t n = a.size();
  Matrix w(n, n);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (std::size_t i = 0; i < n; ++i) {
    // The diagonal contributes 1, so the row sum never underflows.
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double diffv = a[i] - a[j];
      w(i, j) = std::exp(-diffv * diffv * inv);
      total += w(i, j);
    }
    for (std::size_t j = 0; j < n; ++j) w(i, j) /= total;
  }
  return w;
}

DiffArray sup_alignment_out(const DiffArray& s_d, std::span<const double> a_d, double sigma, Bandwidth bw) {
  require_same_length("sup_alignment_out", s_d, a_d);
  const std::size_t n = s_d.rows();
  const auto w = attribute_weights(a_d, sigma);
  const auto weights = s_d.tape().leaf(w);
  const auto d2 = d::pairwise_sq_dists(s_d, s_d);
  return d::scale(d::sum(d::mul(d2, weights)), 1.0 / (2.0 * bw.tau() * static_cast<double>(n)));
}

DiffArray sup_alignment_in(const DiffArray& s_d, std::span<const double> a_d, double sigma, Bandwidth bw) {
  require_same_length("sup_alignment_in", s_d, a_d);
  auto w = attribute_weights(a_d, sigma);
  for (auto& v : w.values()) v = std::log(v);
  const auto log_w = s_d.tape().leaf(w);
  const auto logk = d::add(kernels::gaussian_log_kernel(d::pairwise_sq_dists(s_d, s_d), bw), log_w);
  return d::scale(d::mean(d::row_logsumexp(logk)), -1.0);
}

DiffArray sup_infomax_loss(const DiffArray& s_d, std::span<const double> a_d, double sigma, Bandwidth bw) {
  const auto align = sup_alignment_out(s_d, a_d, sigma, bw);
  return d::add(align, uniformity_loss(s_d, bw));
}

}  // namespace sepclr::estimators
