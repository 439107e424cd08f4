#include "sepclr/probes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>

#include "sepclr/error.hpp"
#include "sepclr/random.hpp"

namespace sepclr::probes {

using data::Dataset;
using data::FactorKind;
using data::FactorScope;
using sepclr::Origin;
using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace {

EMat to_eigen(const Matrix& m) {
  return Eigen::Map<const EMat>(m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
}

// Standardized features with a trailing column of ones.
EMat design(const Standardizer& s, const Matrix& z) {
  const Matrix zs = s.apply(z);
  EMat x(zs.rows(), zs.cols() + 1);
  x.leftCols(static_cast<Eigen::Index>(zs.cols())) = to_eigen(zs);
  x.col(static_cast<Eigen::Index>(zs.cols())).setOnes();
  return x;
}

void softmax_rows(EMat& logits) {
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    auto r = logits.row(i);
    r.array() -= r.maxCoeff();
    r = r.array().exp().matrix();
    r /= r.sum();
  }
}

}  // namespace

Split stratified_split(std::span<const std::size_t> cells, std::uint64_t seed, double test_fraction) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw InvalidArgument("test_fraction must be in (0, 1)");
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < cells.size(); ++i) groups[cells[i]].push_back(i);
  if (groups.empty()) throw InvalidArgument("stratified_split: no rows");
  std::size_t smallest = cells.size();
  for (const auto& [_, rows] : groups) smallest = std::min(smallest, rows.size());
  const auto per_cell = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(smallest)));
  if (per_cell == 0) {
    throw InvalidArgument("stratified_split: smallest cell has " + std::to_string(smallest) +
                          " rows, too few for a held-out split");
  }
  Rng rng({seed, 0x73706C6974ULL});
  Split out;
  for (auto& [_, rows] : groups) {
    rng.shuffle(rows);
    out.test.insert(out.test.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(per_cell));
    out.train.insert(out.train.end(), rows.begin() + static_cast<std::ptrdiff_t>(per_cell), rows.end());
  }
  std::sort(out.test.begin(), out.test.end());
  std::sort(out.train.begin(), out.train.end());
  return out;
}

Standardizer Standardizer::fit(const Matrix& z) {
  if (z.rows() == 0) throw InvalidArgument("Standardizer: no rows");
  Standardizer s;
  s.mean.assign(z.cols(), 0.0);
  s.scale.assign(z.cols(), 1.0);
  const double n = static_cast<double>(z.rows());
  for (std::size_t j = 0; j < z.cols(); ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i) m += z(i, j);
    m /= n;
    double v = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i) v += (z(i, j) - m) * (z(i, j) - m);
    const double sd = std::sqrt(v / n);
    s.mean[j] = m;
    s.scale[j] = sd > 1e-12 * std::max(1.0, std::abs(m)) ? sd : 0.0;
  }
  return s;
}

Standardizer Standardizer::identity(std::size_t dim) { return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)}; }

Matrix Standardizer::apply(const Matrix& z) const {
  if (z.cols() != mean.size()) throw ShapeError("Standardizer::apply", "feature width changed");
  Matrix out(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.cols(); ++j) out(i, j) = scale[j] > 0 ? (z(i, j) - mean[j]) / scale[j] : 0.0;
  return out;
}

std::vector<std::size_t> LogisticProbe::predict(const Matrix& z) const {
  const EMat x = design(standardizer, z);
  const EMat logits = x * to_eigen(weight);
  std::vector<std::size_t> out(z.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index k = 0;
    logits.row(i).maxCoeff(&k);
    out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(k);
  }
  return out;
}

LogisticProbe fit_logistic(const Matrix& z, std::span<const std::size_t> labels, std::size_t num_classes,
                           const LogisticOptions& opts) {
  if (labels.size() != z.rows()) throw ShapeError("fit_logistic", "label count differs from row count");
  if (num_classes < 2) throw InvalidArgument("fit_logistic: need >= 2 classes");
  std::vector<bool> seen(num_classes, false);
  for (auto y : labels) {
    if (y >= num_classes) throw InvalidArgument("fit_logistic: label out of range");
    seen[y] = true;
  }
  if (std::count(seen.begin(), seen.end(), true) < 2) throw InvalidArgument("fit_logistic: single-class input");

  LogisticProbe probe;
  probe.standardizer = opts.standardize ? Standardizer::fit(z) : Standardizer::identity(z.cols());
  const EMat x = design(probe.standardizer, z);
  const auto n = static_cast<double>(z.rows());
  const Eigen::Index p = x.cols();
  const auto k = static_cast<Eigen::Index>(num_classes);
  EMat y = EMat::Zero(x.rows(), k);
  for (std::size_t i = 0; i < labels.size(); ++i) y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(labels[i])) = 1.0;

  // Lipschitz bound of the gradient: 0.5 * lambda_max(X^T X / n) + l2.
  const EMat gram = x.transpose() * x / n;
  const double lmax = Eigen::SelfAdjointEigenSolver<EMat>(gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  const double step = 1.0 / (0.5 * lmax + opts.l2);

  EMat penalty = EMat::Constant(p, k, opts.l2);
  penalty.row(p - 1).setZero();
  const auto gradient = [&](const EMat& w) {
    EMat prob = x * w;
    softmax_rows(prob);
    EMat g = x.transpose() * (prob - y) / n;
    g.array() += penalty.array() * w.array();
    return g;
  };

  EMat w = EMat::Zero(p, k), w_prev = w;
  double t = 1.0;
  std::size_t it = 0;
  double gnorm = gradient(w).norm();
  while (it < opts.max_iter && gnorm > opts.grad_tol) {
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const EMat look = w + ((t - 1.0) / t_next) * (w - w_prev);
    w_prev = w;
    w = look - step * gradient(look);
    t = t_next;
    ++it;
    gnorm = gradient(w).norm();
  }
  probe.weight = Matrix(static_cast<std::size_t>(p), num_classes);
  Eigen::Map<EMat>(probe.weight.data(), p, k) = w;
  probe.iterations = it;
  probe.grad_norm = gnorm;
  return probe;
}

std::vector<double> RidgeProbe::predict(const Matrix& z) const {
  const Matrix zs = standardizer.apply(z);
  std::vector<double> out(z.rows(), intercept);
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < zs.cols(); ++j) out[i] += zs(i, j) * weight[j];
  return out;
}

RidgeProbe fit_ridge(const Matrix& z, std::span<const double> y, double alpha) {
  if (y.size() != z.rows()) throw ShapeError("fit_ridge", "target count differs from row count");
  if (!(alpha >= 0.0)) throw InvalidArgument("fit_ridge: alpha must be >= 0");
  for (double v : y)
    if (!std::isfinite(v)) throw InvalidArgument("fit_ridge: targets must be finite continuous values");
  RidgeProbe probe;
  probe.standardizer = Standardizer::fit(z);
  const EMat x = to_eigen(probe.standardizer.apply(z));
  const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  probe.intercept = yv.mean();
  EMat a = x.transpose() * x;
  a.diagonal().array() += alpha;
  const Eigen::VectorXd w = a.ldlt().solve(x.transpose() * (yv.array() - probe.intercept).matrix());
  probe.weight.assign(w.data(), w.data() + w.size());
  return probe;
}

double balanced_accuracy(std::span<const std::size_t> truth, std::span<const std::size_t> pred) {
  if (truth.size() != pred.size() || truth.empty()) throw InvalidArgument("balanced_accuracy: bad lengths");
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> hits;  // class -> (correct, total)
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto& h = hits[truth[i]];
    h.second += 1;
    h.first += truth[i] == pred[i] ? 1 : 0;
  }
  double sum = 0.0;
  for (const auto& [_, h] : hits) sum += static_cast<double>(h.first) / static_cast<double>(h.second);
  return sum / static_cast<double>(hits.size());
}

double mean_absolute_error(std::span<const double> truth, std::span<const double> pred) {
  if (truth.size() != pred.size() || truth.empty()) throw InvalidArgument("mean_absolute_error: bad lengths");
  double s = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) s += std::abs(truth[i] - pred[i]);
  return s / static_cast<double>(truth.size());
}

double r_squared(std::span<const double> truth, std::span<const double> pred) {
  if (truth.size() != pred.size() || truth.empty()) throw InvalidArgument("r_squared: bad lengths");
  const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / static_cast<double>(truth.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
  }
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
  return 1.0 - ss_res / ss_tot;
}

std::vector<std::size_t> equal_frequency_bins(std::span<const double> values, std::size_t bins) {
  if (bins == 0) throw InvalidArgument("equal_frequency_bins: bins must be >= 1");
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<std::size_t> out(n);
  std::size_t run_bin = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t i = order[r];
    if (r == 0 || values[i] != values[order[r - 1]]) run_bin = r * bins / n;
    out[i] = run_bin;
  }
  return out;
}

double discrete_entropy(std::span<const std::size_t> a) {
  std::map<std::size_t, std::size_t> counts;
  for (auto v : a) ++counts[v];
  const double n = static_cast<double>(a.size());
  double h = 0.0;
  for (const auto& [_, c] : counts) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

double discrete_mutual_information(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.size() != b.size() || a.empty()) throw InvalidArgument("discrete_mutual_information: bad lengths");
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> joint;
  std::map<std::size_t, std::size_t> ca, cb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++joint[{a[i], b[i]}];
    ++ca[a[i]];
    ++cb[b[i]];
  }
  const double n = static_cast<double>(a.size());
  double mi = 0.0;
  for (const auto& [key, c] : joint) {
    const double pxy = static_cast<double>(c) / n;
    mi += pxy * std::log(pxy * n * n / (static_cast<double>(ca[key.first]) * static_cast<double>(cb[key.second])));
  }
  return std::max(mi, 0.0);
}

MigResult mig_score(const Matrix& s, const Matrix& attributes, std::size_t bins) {
  if (s.rows() != attributes.rows()) throw ShapeError("mig_score", "latent and attribute row counts differ");
  if (s.cols() != attributes.cols()) {
    throw ShapeError("mig_score", "latent dimension " + std::to_string(s.cols()) + " differs from D_S = " +
                                      std::to_string(attributes.cols()));
  }
  if (s.cols() < 2) throw InvalidArgument("mig_score: need at least 2 latent dimensions");
  std::vector<std::vector<std::size_t>> latent_bins;
  for (std::size_t j = 0; j < s.cols(); ++j) latent_bins.push_back(equal_frequency_bins(s.column(j), bins));
  MigResult out;
  for (std::size_t d = 0; d < attributes.cols(); ++d) {
    const auto a = equal_frequency_bins(attributes.column(d), bins);
    const double h = discrete_entropy(a);
    if (h <= 0.0) throw InvalidArgument("mig_score: attribute " + std::to_string(d) + " is constant");
    std::vector<double> mi;
    for (const auto& lb : latent_bins) mi.push_back(discrete_mutual_information(lb, a));
    std::partial_sort(mi.begin(), mi.begin() + 2, mi.end(), std::greater<>());
    out.per_dim.push_back((mi[0] - mi[1]) / h);
  }
  out.average = std::accumulate(out.per_dim.begin(), out.per_dim.end(), 0.0) / static_cast<double>(out.per_dim.size());
  return out;
}

std::string_view to_string(Space s) { return s == Space::common ? "common" : "salient"; }
std::string_view to_string(Tap t) { return t == Tap::representation ? "representation" : "projection"; }

Tap parse_tap(std::string_view s) {
  if (s == "representation" || s == "pre-head") return Tap::representation;
  if (s == "projection" || s == "post-head") return Tap::projection;
  throw InvalidArgument("unknown tap '" + std::string(s) + "' (expected representation|projection)");
}

const ProbeRow& ProbeReport::find(std::string_view factor, Space space, std::string_view metric) const {
  for (const auto& r : rows)
    if (r.factor == factor && r.space == space && r.metric == metric) return r;
  throw InvalidArgument("report has no row " + std::string(factor) + "/" + std::string(to_string(space)) + "/" +
                        std::string(metric));
}

namespace {

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

std::string csv_number(double v) {
  if (!std::isfinite(v)) return "";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

nlohmann::json ProbeReport::to_json() const {
  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    j["rows"].push_back({{"factor", r.factor},
                         {"space", std::string(to_string(r.space))},
                         {"metric", r.metric},
                         {"value", number_or_null(r.value)},
                         {"expected_best", number_or_null(r.expected_best)},
                         {"designated", r.designated}});
  }
  j["delta_tot"] = delta_tot;
  if (mig) {
    j["mig"] = {{"per_dim", mig->per_dim}, {"average", mig->average}};
  } else {
    j["mig"] = nullptr;
  }
  return j;
}

void ProbeReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << "factor,space,metric,value,expected_best,designated\n";
  for (const auto& r : rows) {
    os << r.factor << ',' << to_string(r.space) << ',' << r.metric << ',' << csv_number(r.value) << ','
       << csv_number(r.expected_best) << ',' << (r.designated ? 1 : 0) << '\n';
  }
  os << "delta_tot,,," << csv_number(delta_tot) << ",0,\n";
  if (mig) os << "mig_average,,," << csv_number(mig->average) << ",1,\n";
}

void ProbeReport::write_json(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << to_json().dump(2) << '\n';
}

namespace {

std::optional<std::size_t> designated_factor(const Dataset& ds, FactorScope scope) {
  for (std::size_t f = 0; f < ds.factors.size(); ++f)
    if (ds.factors[f].scope == scope && ds.factors[f].kind == FactorKind::categorical) return f;
  return std::nullopt;
}

std::size_t class_of(double v, const data::FactorInfo& f) {
  if (!std::isfinite(v) || v < 0 || v != std::floor(v) || v >= static_cast<double>(f.num_classes)) {
    throw InvalidArgument("factor '" + f.name + "' has a non-class value");
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

ProbeReport evaluate_representations(const Matrix& common, const Matrix& salient, const Dataset& ds,
                                     const EvalOptions& opts, const Matrix* mig_latents) {
  const auto targets = ds.rows_with(Origin::target);
  if (common.rows() != targets.size() || salient.rows() != targets.size()) {
    throw ShapeError("evaluate", "representations must have one row per target sample (" +
                                     std::to_string(targets.size()) + ")");
  }
  std::vector<std::size_t> factor_ids;
  if (opts.factors.empty()) {
    factor_ids.resize(ds.factors.size());
    std::iota(factor_ids.begin(), factor_ids.end(), 0);
  } else {
    for (const auto& name : opts.factors) factor_ids.push_back(ds.factor_index(name));
  }

  // Stratify by the joint value of every categorical factor.
  std::vector<std::size_t> cells(targets.size(), 0);
  for (std::size_t f = 0; f < ds.factors.size(); ++f) {
    const auto& info = ds.factors[f];
    if (info.kind != FactorKind::categorical) continue;
    for (std::size_t i = 0; i < targets.size(); ++i)
      cells[i] = cells[i] * info.num_classes + class_of(ds.factor_values(targets[i], f), info);
  }
  const Split split = stratified_split(cells, opts.seed, opts.test_fraction);

  const auto des_c = designated_factor(ds, FactorScope::common);
  const auto des_s = designated_factor(ds, FactorScope::salient);

  ProbeReport report;
  for (const std::size_t f : factor_ids) {
    const auto& info = ds.factors[f];
    const bool designated = f == des_c || f == des_s;
    for (const Space space : {Space::salient, Space::common}) {
      const Matrix& z = space == Space::common ? common : salient;
      const Matrix z_train = z.gather_rows(split.train);
      const Matrix z_test = z.gather_rows(split.test);
      const bool own = (info.scope == FactorScope::common) == (space == Space::common);
      if (info.kind == FactorKind::categorical) {
        std::vector<std::size_t> y_train, y_test;
        for (auto i : split.train) y_train.push_back(class_of(ds.factor_values(targets[i], f), info));
        for (auto i : split.test) y_test.push_back(class_of(ds.factor_values(targets[i], f), info));
        const auto probe = fit_logistic(z_train, y_train, info.num_classes, opts.logistic);
        const double bacc = balanced_accuracy(y_test, probe.predict(z_test));
        const double chance = 1.0 / static_cast<double>(info.num_classes);
        report.rows.push_back({info.name, space, "b_acc", bacc, own ? 1.0 : chance, designated});
      } else {
        std::vector<double> y_train, y_test;
        for (auto i : split.train) y_train.push_back(ds.factor_values(targets[i], f));
        for (auto i : split.test) y_test.push_back(ds.factor_values(targets[i], f));
        const auto probe = fit_ridge(z_train, y_train, opts.ridge_alpha);
        const auto pred = probe.predict(z_test);
        report.rows.push_back({info.name, space, "r2", r_squared(y_test, pred), own ? 1.0 : 0.0, false});
        report.rows.push_back({info.name, space, "mae", mean_absolute_error(y_test, pred),
                               own ? 0.0 : std::nan(""), false});
      }
    }
  }
  for (const auto& r : report.rows)
    if (r.designated) report.delta_tot += std::abs(r.value - r.expected_best);

  if (mig_latents != nullptr && ds.has_attributes()) {
    if (mig_latents->rows() != targets.size()) throw ShapeError("evaluate", "MIG latents must cover target rows");
    report.mig = mig_score(mig_latents->gather_rows(split.test), ds.attributes.gather_rows(targets).gather_rows(split.test),
                           opts.mig_bins);
  }
  return report;
}

ProbeReport evaluate(const encoders::EncoderPair& enc, const Dataset& ds, const EvalOptions& opts) {
  const auto targets = ds.rows_with(Origin::target);
  const auto reps = encoders::encode(enc, ds.inputs.gather_rows(targets));
  const bool pre = opts.tap == Tap::representation;
  const Matrix& c = pre ? reps.common_repr : reps.common_proj;
  const Matrix& s = pre ? reps.salient_repr : reps.salient_proj;
  const bool mig = ds.has_attributes() && reps.salient_proj.cols() == ds.attributes.cols();
  return evaluate_representations(c, s, ds, opts, mig ? &reps.salient_proj : nullptr);
}

std::pair<Matrix, Matrix> oracle_representations(const Dataset& ds) {
  const auto des_c = designated_factor(ds, FactorScope::common);
  const auto des_s = designated_factor(ds, FactorScope::salient);
  if (!des_c || !des_s) throw InvalidArgument("oracle encoder needs a categorical common and salient factor");
  const auto targets = ds.rows_with(Origin::target);
  const auto one_hot = [&](std::size_t f) {
    const auto& info = ds.factors[f];
    Matrix m(targets.size(), info.num_classes);
    for (std::size_t i = 0; i < targets.size(); ++i) m(i, class_of(ds.factor_values(targets[i], f), info)) = 1.0;
    return m;
  };
  return {one_hot(*des_c), one_hot(*des_s)};
}

std::string format_table(const ProbeReport& report) {
  const ProbeRow* cells[4] = {nullptr, nullptr, nullptr, nullptr};
  for (const auto& r : report.rows) {
    if (!r.designated) continue;
    const bool own = r.expected_best == 1.0;
    const int idx = r.space == Space::salient ? (own ? 0 : 2) : (own ? 3 : 1);
    cells[idx] = &r;
  }
  std::ostringstream os;
  const auto header = [&](int i, const char* fallback, const char* arrow) {
    std::string name = cells[i] ? cells[i]->factor : fallback;
    return name + (i == 0 || i == 2 ? " (S) " : " (C) ") + arrow;
  };
  const std::string h[4] = {header(0, "salient", "^"), header(1, "salient", "v"), header(2, "common", "v"),
                            header(3, "common", "^")};
  std::size_t w = 10;
  for (const auto& s : h) w = std::max(w, s.size() + 2);
  os << std::left << std::setw(16) << "" << std::right;
  for (const auto& s : h) os << std::setw(static_cast<int>(w)) << s;
  os << std::setw(10) << "delta_tot" << '\n';
  os << std::fixed << std::setprecision(1);
  os << std::left << std::setw(16) << "this run" << std::right;
  for (const auto* c : cells) {
    if (c)
      os << std::setw(static_cast<int>(w)) << 100.0 * c->value;
    else
      os << std::setw(static_cast<int>(w)) << "-";
  }
  os << std::setw(10) << 100.0 * report.delta_tot << '\n';
  os << std::left << std::setw(16) << "best expected" << std::right;
  for (const auto* c : cells) {
    if (c)
      os << std::setw(static_cast<int>(w)) << 100.0 * c->expected_best;
    else
      os << std::setw(static_cast<int>(w)) << "-";
  }
  os << std::setw(10) << 0.0 << '\n';
  if (report.mig) os << "MIG (avg) " << std::setprecision(3) << report.mig->average << '\n';
  return os.str();
}

}  // namespace sepclr::probes
