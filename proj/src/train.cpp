#include "sepclr/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>

#include "sepclr/diff/ops.hpp"
#include "sepclr/random.hpp"

namespace sepclr::train {

namespace d = diff;
using sepclr::Origin;

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 4 || batch_size % 2 != 0) throw ConfigError("batch_size must be even and >= 4");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
  weights.validate();
}

TrainingDiverged::TrainingDiverged(std::size_t step, LossBundle loss)
    : Error("non-finite loss at step " + std::to_string(step) + ": " + loss.describe()),
      step_(step),
      loss_(std::move(loss)) {}

Matrix scaled_target_attributes(const data::Dataset& ds) {
  if (!ds.has_attributes()) throw InvalidArgument("dataset has no attributes");
  const auto rows = ds.rows_with(Origin::target);
  Matrix a = ds.attributes.gather_rows(rows);
  for (std::size_t k = 0; k < a.cols(); ++k) {
    double lo = a(0, k), hi = a(0, k);
    for (std::size_t i = 0; i < a.rows(); ++i) {
      if (!std::isfinite(a(i, k))) throw InvalidArgument("target attribute is missing or non-finite");
      lo = std::min(lo, a(i, k));
      hi = std::max(hi, a(i, k));
    }
    const double span = hi - lo;
    for (std::size_t i = 0; i < a.rows(); ++i) a(i, k) = span > 0 ? (a(i, k) - lo) / span : 0.0;
  }
  return a;
}

Adam::Adam(std::vector<std::size_t> sizes, double lr, double beta1, double beta2, double eps)
    : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
  for (auto n : sizes) {
    m_.emplace_back(n, 0.0);
    v_.emplace_back(n, 0.0);
  }
}

void Adam::step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) throw InvalidArgument("Adam: buffer count mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto w = params[p];
    const auto g = grads[p];
    if (w.size() != m_[p].size()) throw InvalidArgument("Adam: buffer size changed");
    if (!g.empty() && g.size() != w.size()) throw InvalidArgument("Adam: gradient size mismatch");
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g.empty() ? 0.0 : g[i];
      m[i] = b1_ * m[i] + (1.0 - b1_) * gi;
      v[i] = b2_ * v[i] + (1.0 - b2_) * gi * gi;
      w[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

std::size_t steps_per_epoch(const data::Dataset& ds, std::size_t batch_size) {
  const std::size_t half = batch_size / 2;
  return std::min(ds.count(Origin::background), ds.count(Origin::target)) / half;
}

namespace {

std::vector<std::size_t> buffer_sizes(const EncoderPair& enc) {
  std::vector<std::size_t> out;
  for (const auto* m : {&enc.common, &enc.salient})
    for (const auto& p : m->parameters()) out.push_back(p.size());
  return out;
}

}  // namespace

TrainResult train(const data::Dataset& ds, EncoderPair enc, const TrainConfig& cfg, const TrainCallbacks& callbacks) {
  cfg.validate();
  auto bg = ds.rows_with(Origin::background);
  auto tg = ds.rows_with(Origin::target);
  if (bg.empty() || tg.empty()) throw InvalidArgument("train: dataset needs background and target samples");
  if (enc.common.spec().input_dim() != ds.input_dim() || enc.salient.spec().input_dim() != ds.input_dim()) {
    throw ShapeError("train", "encoder input width " + std::to_string(enc.common.spec().input_dim()) +
                                  " does not match dataset input width " + std::to_string(ds.input_dim()));
  }
  const std::size_t half = cfg.batch_size / 2;
  const std::size_t steps = steps_per_epoch(ds, cfg.batch_size);
  if (steps == 0) {
    throw ConfigError("batch_size " + std::to_string(cfg.batch_size) + " exceeds twice the smaller population");
  }
  const auto aug = cfg.augmentation.value_or(data::AugmentationSpec::defaults_for(ds.kind));
  aug.validate(ds.image);

  const bool attribute_mode = cfg.mode == ObjectiveMode::attribute_supervised;
  Matrix attrs;
  std::vector<std::size_t> target_pos(ds.size(), 0);
  if (attribute_mode) {
    attrs = scaled_target_attributes(ds);
    for (std::size_t j = 0; j < tg.size(); ++j) target_pos[tg[j]] = j;
  }

  const std::uint64_t view_seed = mix_seed({cfg.seed, 0x7669657773ULL});
  Adam opt(buffer_sizes(enc), cfg.learning_rate);
  std::vector<HistoryRow> history;
  history.reserve(cfg.epochs * steps);

  const std::size_t dim = ds.input_dim();
  const std::size_t n = cfg.batch_size;
  std::vector<std::size_t> batch_rows(n), first(n), second(n), bg_rows(half), tg_rows(half);
  for (std::size_t i = 0; i < n; ++i) {
    first[i] = i;
    second[i] = n + i;
  }
  for (std::size_t i = 0; i < half; ++i) {
    bg_rows[i] = i;
    tg_rows[i] = half + i;
  }
  std::vector<double> views(2 * n * dim);
  Matrix batch_attrs(attribute_mode ? half : 0, attrs.cols());
  std::size_t global_step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng order({cfg.seed, 0x6F72646572ULL, epoch});
    order.shuffle(bg);
    order.shuffle(tg);
    for (std::size_t s = 0; s < steps; ++s, ++global_step) {
      for (std::size_t i = 0; i < half; ++i) {
        batch_rows[i] = bg[s * half + i];
        batch_rows[half + i] = tg[s * half + i];
      }
      for (std::size_t v = 0; v < 2; ++v) {
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t id = batch_rows[i];
          std::span<double> out(views.data() + (v * n + i) * dim, dim);
          data::make_view_into(ds.inputs.row(id), ds.image, aug, view_seed, id, 2 * epoch + v, out);
        }
      }
      if (attribute_mode) {
        for (std::size_t i = 0; i < half; ++i) {
          const auto src = attrs.row(target_pos[batch_rows[half + i]]);
          std::copy(src.begin(), src.end(), batch_attrs.row(i).begin());
        }
      }

      d::Tape tape;
      const auto input = tape.leaf({2 * n, dim}, views, false);
      const auto out = encoders::forward(enc, tape, input, encoders::Phase::train, true);

      losses::BatchEmbeddings batch;
      batch.common = d::gather_rows(out.common.projection, first);
      batch.common_view = d::gather_rows(out.common.projection, second);
      batch.salient = d::gather_rows(out.salient.projection, first);
      batch.salient_view = d::gather_rows(out.salient.projection, second);
      batch.background_rows = bg_rows;
      batch.target_rows = tg_rows;
      batch.attributes = attribute_mode ? &batch_attrs : nullptr;
      batch.s_prime = estimators::NullVector::zeros(enc.salient.spec().output_dim());

      auto loss = losses::total_loss(batch, cfg.weights, cfg.mode);
      if (!loss.bundle.all_finite()) throw TrainingDiverged(global_step, loss.bundle);
      tape.backward(loss.total);

      std::vector<std::span<double>> params;
      std::vector<std::span<const double>> grads;
      for (auto [m, o] : {std::pair{&enc.common, &out.common}, std::pair{&enc.salient, &out.salient}}) {
        auto ps = m->parameters();
        for (std::size_t k = 0; k < ps.size(); ++k) {
          params.push_back(ps[k]);
          grads.emplace_back(tape.grad_if_any(o->params[k].id()));
        }
      }
      opt.step(params, grads);
      if (enc.common.has_head()) enc.common.update_running_stats(out.common.head_stats);
      if (enc.salient.has_head()) enc.salient.update_running_stats(out.salient.head_stats);

      history.push_back({global_step, epoch, std::move(loss.bundle)});
      if (callbacks.on_step) callbacks.on_step(history.back());
    }
    if (cfg.eval_every > 0 && callbacks.on_eval && (epoch + 1) % cfg.eval_every == 0) {
      callbacks.on_eval(epoch + 1, enc);
    }
  }
  return {std::move(enc), std::move(history)};
}

void write_history_csv(std::span<const HistoryRow> history, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  const std::size_t nsup = history.empty() ? 0 : history.front().loss.sup_terms.size();
  os << "step,epoch,align,unif,y_align,sprime_unif,infoless,independence";
  for (std::size_t k = 0; k < nsup; ++k) os << ",sup_" << k;
  os << ",total\n" << std::setprecision(17);
  for (const auto& h : history) {
    const auto& l = h.loss;
    os << h.step << ',' << h.epoch << ',' << l.align << ',' << l.unif << ',' << l.y_align << ',' << l.sprime_unif
       << ',' << l.infoless << ',' << l.independence;
    for (std::size_t k = 0; k < nsup; ++k) os << ',' << (k < l.sup_terms.size() ? l.sup_terms[k] : NAN);
    os << ',' << l.total << '\n';
  }
}

std::pair<double, double> ema_endpoints(std::span<const HistoryRow> history, double alpha) {
  if (history.empty()) throw InvalidArgument("ema_endpoints: empty history");
  // The start value is the EMA run backwards from the first steps so both
  // ends average over a comparable window.
  double back = history.back().loss.total;
  for (std::size_t i = history.size(); i-- > 0;) back = alpha * history[i].loss.total + (1 - alpha) * back;
  double fwd = history.front().loss.total;
  for (const auto& h : history) fwd = alpha * h.loss.total + (1 - alpha) * fwd;
  return {back, fwd};
}

}  // namespace sepclr::train
