#include "sepclr/losses.hpp"

#include <cmath>
#include <sstream>

#include "sepclr/diff/ops.hpp"
#include "sepclr/error.hpp"

namespace sepclr::losses {

namespace d = sepclr::diff;
namespace est = sepclr::estimators;

std::string_view to_string(IndependenceMode m) {
  switch (m) {
    case IndependenceMode::kjem:
      return "kjem";
    case IndependenceMode::kmi:
      return "kmi";
    case IndependenceMode::mmd:
      return "mmd";
    case IndependenceMode::none:
      return "none";
  }
  return "?";
}

std::string_view to_string(ObjectiveMode m) {
  return m == ObjectiveMode::unsupervised ? "unsupervised" : "attribute_supervised";
}

IndependenceMode parse_independence_mode(std::string_view s) {
  if (s == "kjem") return IndependenceMode::kjem;
  if (s == "kmi") return IndependenceMode::kmi;
  if (s == "mmd") return IndependenceMode::mmd;
  if (s == "none") return IndependenceMode::none;
  throw ConfigError("unknown independence mode '" + std::string(s) + "' (expected kjem|kmi|mmd|none)");
}

ObjectiveMode parse_objective_mode(std::string_view s) {
  if (s == "unsupervised") return ObjectiveMode::unsupervised;
  if (s == "attribute_supervised" || s == "attribute") return ObjectiveMode::attribute_supervised;
  throw ConfigError("unknown mode '" + std::string(s) + "' (expected unsupervised|attribute_supervised)");
}

double LossWeights::default_lambda_ind(IndependenceMode m) {
  switch (m) {
    case IndependenceMode::kjem:
    case IndependenceMode::kmi:
      return 10.0;
    case IndependenceMode::mmd:
      return 50.0;
    case IndependenceMode::none:
      return 0.0;
  }
  return 0.0;
}

void LossWeights::validate() const {
  const auto nonneg = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be a finite value >= 0");
  };
  nonneg(lambda_c, "lambda_c");
  nonneg(lambda_s, "lambda_s");
  nonneg(beta, "beta");
  nonneg(lambda_ind, "lambda_ind");
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  if (!(sigma_attr > 0.0)) throw ConfigError("sigma_attr must be > 0");
}

bool LossBundle::all_finite() const {
  bool ok = std::isfinite(align) && std::isfinite(unif) && std::isfinite(y_align) &&
            std::isfinite(sprime_unif) && std::isfinite(infoless) && std::isfinite(independence) &&
            std::isfinite(total);
  for (double v : sup_terms) ok = ok && std::isfinite(v);
  return ok;
}

std::string LossBundle::describe() const {
  std::ostringstream os;
  os << "align=" << align << " unif=" << unif << " y_align=" << y_align << " sprime_unif=" << sprime_unif
     << " infoless=" << infoless << " independence=" << independence;
  for (std::size_t i = 0; i < sup_terms.size(); ++i) os << " sup" << i << '=' << sup_terms[i];
  os << " total=" << total;
  return os.str();
}

CommonTerms common_loss(const DiffArray& c_all, std::span<const DiffArray> c_views, const LossWeights& w) {
  const kernels::Bandwidth bw(w.tau);
  return {est::alignment_loss(c_all, c_views, bw), est::uniformity_loss(c_all, bw)};
}

SalientTerms salient_loss(const DiffArray& s_target, std::span<const DiffArray> s_target_views,
                          const DiffArray& s_background, const NullVector& s_prime, const LossWeights& w) {
  const kernels::Bandwidth bw(w.tau);
  if (s_target.rows() == 0) throw InvalidArgument("salient_loss: empty target slice");
  if (s_background.rows() == 0) throw InvalidArgument("salient_loss: empty background slice");
  return {est::alignment_loss(s_target, s_target_views, bw), est::sprime_uniformity_loss(s_target, s_prime, bw),
          est::infoless_loss(s_background, s_prime, bw)};
}

DiffArray independence_loss(const DiffArray& c, const DiffArray& s, std::span<const std::size_t> background_rows,
                            std::span<const std::size_t> target_rows, const LossWeights& w) {
  const kernels::Bandwidth bw(w.tau);
  switch (w.independence_mode) {
    case IndependenceMode::kjem:
      return est::kjem_loss(c, s, bw);
    case IndependenceMode::kmi:
      return est::kmi_loss(c, s, bw);
    case IndependenceMode::mmd:
      return est::mmd_loss(d::gather_rows(c, background_rows), d::gather_rows(c, target_rows), bw);
    case IndependenceMode::none:
      break;
  }
  return c.tape().scalar(0.0);
}

TotalLoss total_loss(const BatchEmbeddings& batch, const LossWeights& w, ObjectiveMode mode) {
  w.validate();
  if (batch.background_rows.empty() || batch.target_rows.empty()) {
    throw InvalidArgument("total_loss: batch needs both background and target rows");
  }
  const kernels::Bandwidth bw(w.tau);

  const DiffArray c_views[] = {batch.common_view};
  const auto common = common_loss(batch.common, c_views, w);

  const auto s_tg = d::gather_rows(batch.salient, batch.target_rows);
  const DiffArray s_tg_views[] = {d::gather_rows(batch.salient_view, batch.target_rows)};
  const auto s_bg = d::gather_rows(batch.salient, batch.background_rows);
  const auto salient = salient_loss(s_tg, s_tg_views, s_bg, batch.s_prime, w);

  const auto indep =
      independence_loss(batch.common, batch.salient, batch.background_rows, batch.target_rows, w);

  TotalLoss out;
  auto& b = out.bundle;
  b.align = common.align.item();
  b.unif = common.unif.item();
  b.y_align = salient.y_align.item();
  b.sprime_unif = salient.sprime_unif.item();
  b.infoless = salient.infoless.item();
  b.independence = indep.item();

  auto total = d::scale(d::add(common.align, common.unif), w.lambda_c);
  const auto salient_infomax = d::scale(d::add(salient.y_align, salient.sprime_unif), w.lambda_s);

  if (mode == ObjectiveMode::unsupervised) {
    total = d::add(total, salient_infomax);
  } else {
    if (batch.attributes == nullptr) throw InvalidArgument("total_loss: attribute mode requires attributes");
    const Matrix& attrs = *batch.attributes;
    const std::size_t ds = attrs.cols();
    if (attrs.rows() != batch.target_rows.size()) {
      throw ShapeError("total_loss", "attributes have " + std::to_string(attrs.rows()) + " rows for " +
                                         std::to_string(batch.target_rows.size()) + " target rows");
    }
    if (s_tg.cols() != ds) {
      throw ShapeError("total_loss", "salient space has " + std::to_string(s_tg.cols()) +
                                         " dimensions, attribute mode needs exactly D_S = " + std::to_string(ds));
    }
    DiffArray sup_sum;
    for (std::size_t k = 0; k < ds; ++k) {
      const auto a_k = attrs.column(k);
      const auto term = est::sup_infomax_loss(d::slice_cols(s_tg, k, k + 1), a_k, w.sigma_attr, bw);
      b.sup_terms.push_back(term.item());
      sup_sum = k == 0 ? term : d::add(sup_sum, term);
    }
    total = d::add(total, d::scale(sup_sum, w.lambda_s / static_cast<double>(ds)));
    if (w.salient_infomax_in_attribute_mode) total = d::add(total, salient_infomax);
  }
  total = d::add(total, d::scale(salient.infoless, w.beta));
  total = d::add(total, d::scale(indep, w.lambda_ind));
  b.total = total.item();
  out.total = total;
  return out;
}

}  // namespace sepclr::losses
