#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sepclr/estimators.hpp"
#include "sepclr/matrix.hpp"

// Training objective, written as a loss to minimize:
//
//   term          estimator                 weight      sign vs. the InfoMax objective
//   align         alignment_loss (all)      lambda_C    -(alignment of x and y)
//   unif          uniformity_loss (all)     lambda_C    -(entropy lower bound of c)
//   y_align       alignment_loss (target)   lambda_S    -(target-only alignment)
//   sprime_unif   sprime_uniformity_loss    lambda_S    -(s'-entropy lower bound)
//   infoless      infoless_loss             beta        +(KL to the Dirac at s')
//   independence  kjem | kmi | mmd | none   lambda_ind  -(joint entropy) for kjem
namespace sepclr::losses {

using diff::DiffArray;
using estimators::NullVector;

enum class IndependenceMode { kjem, kmi, mmd, none };
enum class ObjectiveMode { unsupervised, attribute_supervised };

std::string_view to_string(IndependenceMode m);
std::string_view to_string(ObjectiveMode m);
IndependenceMode parse_independence_mode(std::string_view s);
ObjectiveMode parse_objective_mode(std::string_view s);

struct LossWeights {
  double lambda_c = 1.0;
  double lambda_s = 1000.0;
  double beta = 1000.0;
  double lambda_ind = 10.0;
  double tau = 0.5;
  double sigma_attr = 0.1;
  IndependenceMode independence_mode = IndependenceMode::kjem;
  /// Attribute mode only: keep the unsupervised salient InfoMax terms.
  bool salient_infomax_in_attribute_mode = false;

  /// Default lambda_ind for an independence mode (10 for the kernel
  /// entropies, 50 for MMD, 0 for none).
  static double default_lambda_ind(IndependenceMode m);
  void validate() const;
};

/// Component values of one evaluation of the objective.
struct LossBundle {
  double align = 0.0;
  double unif = 0.0;
  double y_align = 0.0;
  double sprime_unif = 0.0;
  double infoless = 0.0;
  double independence = 0.0;
  std::vector<double> sup_terms;
  double total = 0.0;

  bool all_finite() const;
  std::string describe() const;
};

/// Embeddings of a balanced batch under two views.
struct BatchEmbeddings {
  DiffArray common;         // (N, D_c), unit rows, view 1
  DiffArray common_view;    // (N, D_c), view 2
  DiffArray salient;        // (N, D_s), view 1
  DiffArray salient_view;   // (N, D_s), view 2
  std::vector<std::size_t> background_rows;
  std::vector<std::size_t> target_rows;
  /// (N_target, D_S), row-aligned with target_rows; attribute mode only.
  const Matrix* attributes = nullptr;
  NullVector s_prime;
};

struct CommonTerms {
  DiffArray align;
  DiffArray unif;
};
/// Unweighted common InfoMax terms over every row, background and target.
CommonTerms common_loss(const DiffArray& c_all, std::span<const DiffArray> c_views, const LossWeights& w);

struct SalientTerms {
  DiffArray y_align;
  DiffArray sprime_unif;
  DiffArray infoless;
};
/// Unweighted salient terms: target-only alignment and s'-uniformity, and
/// the background information-less penalty.
SalientTerms salient_loss(const DiffArray& s_target, std::span<const DiffArray> s_target_views,
                          const DiffArray& s_background, const NullVector& s_prime, const LossWeights& w);

/// Unweighted independence regularizer for the configured mode. The MMD
/// arm compares background and target rows of the common space.
DiffArray independence_loss(const DiffArray& c, const DiffArray& s, std::span<const std::size_t> background_rows,
                            std::span<const std::size_t> target_rows, const LossWeights& w);

struct TotalLoss {
  DiffArray total;
  LossBundle bundle;
};

/// unsupervised:  lambda_C (align + unif) + lambda_S (y_align + sprime_unif)
///                + beta infoless + lambda_ind independence
/// attribute:     lambda_C (align + unif) + (lambda_S / D_S) sum_d sup_d
///                + beta infoless + lambda_ind independence
///                (+ lambda_S (y_align + sprime_unif) when enabled)
TotalLoss total_loss(const BatchEmbeddings& batch, const LossWeights& w, ObjectiveMode mode);

}  // namespace sepclr::losses
