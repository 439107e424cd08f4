#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sepclr/diff/tape.hpp"
#include "sepclr/kernels.hpp"
#include "sepclr/matrix.hpp"
#include "sepclr/origin.hpp"

// Kernel-density plug-in estimators. Every function returns a scalar
// DiffArray in minimization convention and drops the Gaussian normalizer
// log sqrt(2 pi tau) consistently, so composite identities such as
// k-MI = H(c) + H(s) - H(c, s) hold exactly.
namespace sepclr::estimators {

using diff::DiffArray;
using kernels::Bandwidth;

enum class Space { common_sphere, salient_euclidean };
using sepclr::Origin;

/// Embeddings of one batch. Rows of a common_sphere batch are unit-norm.
struct EmbeddingBatch {
  DiffArray z;
  Space space = Space::salient_euclidean;
  std::vector<Origin> origin;

  /// Throws on a row count mismatch or a non-unit row in the common space.
  void validate() const;
};

/// Information-less salient vector s'. Fixed for a whole run.
struct NullVector {
  std::vector<double> s_prime;
  static NullVector zeros(std::size_t dim) { return {std::vector<double>(dim, 0.0)}; }
};

struct EntropyOptions {
  /// Drop j = i from the resubstitution sums (denominator becomes N - 1).
  bool exclude_self = false;
};

/// H = -(1/N) sum_i log[(1/N) sum_j exp(-||z_i - z_j||^2 / 2 tau)].
DiffArray entropy_hat(const DiffArray& z, Bandwidth bw, EntropyOptions opts = {});
DiffArray entropy_hat(const EmbeddingBatch& batch, Bandwidth bw, EntropyOptions opts = {});

/// log[(1/N^2) sum_ij exp(-||z_i - z_j||^2 / 2 tau)]; -L_unif <= H by Jensen.
DiffArray uniformity_loss(const DiffArray& z, Bandwidth bw, EntropyOptions opts = {});
DiffArray uniformity_loss(const EmbeddingBatch& batch, Bandwidth bw, EntropyOptions opts = {});

/// -(1/N) sum_i log[(1/K) sum_k exp(-||z_i - z_i^k||^2 / 2 tau)] over K
/// view batches, each row-aligned with z.
DiffArray alignment_loss(const DiffArray& z, std::span<const DiffArray> views, Bandwidth bw);

/// Target-only salient uniformity with the background collapsed on s':
/// log[(1/N) sum_i (exp(-||s_i - s'||^2 / tau)
///                  + (1/2N) sum_j exp(-||s_i - s_j||^2 / tau))].
/// Note the /tau exponent; the closed form assumes balanced batches.
DiffArray sprime_uniformity_loss(const DiffArray& s_target, const NullVector& s_prime, Bandwidth bw);

/// (1/N) sum_i ||s_i - s'||^2 / 2 tau over background rows.
DiffArray infoless_loss(const DiffArray& s_background, const NullVector& s_prime, Bandwidth bw);

/// -H(c, s) with the product kernel exp(-||c_i-c_j||^2/2tau) exp(-||s_i-s_j||^2/2tau).
DiffArray kjem_loss(const DiffArray& c, const DiffArray& s, Bandwidth bw, EntropyOptions opts = {});

/// Plug-in I(c; s) = H(c) + H(s) - H(c, s).
DiffArray kmi_loss(const DiffArray& c, const DiffArray& s, Bandwidth bw, EntropyOptions opts = {});

/// Biased (V-statistic) MMD^2 with the Gaussian kernel exp(-d^2 / 2 tau).
DiffArray mmd_loss(const DiffArray& cx, const DiffArray& cy, Bandwidth bw);

/// W_ij = K(a_i, a_j) / sum_j' K(a_i, a_j') with K(u, v) = exp(-(u-v)^2 / 2 sigma^2).
Matrix attribute_weights(std::span<const double> a, double sigma);

/// Out-form supervised alignment (1/N) sum_ij W_ij ||s_i - s_j||^2 / 2 tau.
DiffArray sup_alignment_out(const DiffArray& s_d, std::span<const double> a_d, double sigma, Bandwidth bw);
/// In-form supervised alignment -(1/N) sum_i log sum_j W_ij exp(-||s_i - s_j||^2 / 2 tau).
/// Never larger than the out form.
DiffArray sup_alignment_in(const DiffArray& s_d, std::span<const double> a_d, double sigma, Bandwidth bw);

/// One attribute's supervised InfoMax loss: out-form alignment plus
/// uniformity of the salient coordinate. s_d is an (N, 1) column.
DiffArray sup_infomax_loss(const DiffArray& s_d, std::span<const double> a_d, double sigma, Bandwidth bw);

}  // namespace sepclr::estimators
