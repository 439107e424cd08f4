#include "sepclr/verify/suites.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "sepclr/diff/gradcheck.hpp"
#include "sepclr/diff/ops.hpp"
#include "sepclr/encoders.hpp"
#include "sepclr/error.hpp"
#include "sepclr/losses.hpp"
#include "sepclr/random.hpp"
#include "sepclr/verify/naive.hpp"

namespace sepclr::verify {

namespace d = diff;
namespace est = estimators;

EstimatorSet EstimatorSet::library() {
  EstimatorSet s;
  s.entropy_hat = [](const DiffArray& z, Bandwidth bw) { return est::entropy_hat(z, bw); };
  s.uniformity = [](const DiffArray& z, Bandwidth bw) { return est::uniformity_loss(z, bw); };
  s.alignment = [](const DiffArray& z, std::span<const DiffArray> v, Bandwidth bw) {
    return est::alignment_loss(z, v, bw);
  };
  s.sprime_uniformity = [](const DiffArray& st, const NullVector& sp, Bandwidth bw) {
    return est::sprime_uniformity_loss(st, sp, bw);
  };
  s.infoless = [](const DiffArray& sb, const NullVector& sp, Bandwidth bw) { return est::infoless_loss(sb, sp, bw); };
  s.kjem = [](const DiffArray& c, const DiffArray& z, Bandwidth bw) { return est::kjem_loss(c, z, bw); };
  s.kmi = [](const DiffArray& c, const DiffArray& z, Bandwidth bw) { return est::kmi_loss(c, z, bw); };
  s.mmd = [](const DiffArray& x, const DiffArray& y, Bandwidth bw) { return est::mmd_loss(x, y, bw); };
  s.sup_infomax = [](const DiffArray& sd, std::span<const double> a, double sigma, Bandwidth bw) {
    return est::sup_infomax_loss(sd, a, sigma, bw);
  };
  s.sup_alignment_out = [](const DiffArray& sd, std::span<const double> a, double sigma, Bandwidth bw) {
    return est::sup_alignment_out(sd, a, sigma, bw);
  };
  s.sup_alignment_in = [](const DiffArray& sd, std::span<const double> a, double sigma, Bandwidth bw) {
    return est::sup_alignment_in(sd, a, sigma, bw);
  };
  return s;
}

bool SuiteReport::passed() const {
  return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

const CheckResult& SuiteReport::find(std::string_view name) const {
  for (const auto& c : checks)
    if (c.name == name) return c;
  throw InvalidArgument("suite " + suite + " has no check '" + std::string(name) + "'");
}

namespace {

using Clock = std::chrono::steady_clock;

Matrix normal_matrix(Rng& rng, std::size_t n, std::size_t dim, double scale = 1.0) {
  Matrix m(n, dim);
  for (auto& v : m.values()) v = scale * rng.normal();
  return m;
}

Matrix unit_rows(Matrix m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    double n = 0.0;
    for (double v : r) n += v * v;
    n = std::sqrt(n);
    for (auto& v : r) v /= n;
  }
  return m;
}

std::vector<double> uniform_vector(Rng& rng, std::size_t n) {
  std::vector<double> a(n);
  for (auto& v : a) v = rng.uniform();
  return a;
}

// A random small batch; sizes and bandwidth vary with the seed.
struct Batch {
  std::size_t n;
  double tau;
  Matrix c, c_view, c_view2, s, s_view;
  Matrix x, y;  // two samples for MMD
  std::vector<double> s_prime;
  std::vector<double> attr;
  Matrix s_col;
};

Batch make_batch(std::uint64_t seed) {
  Rng rng({seed, 0x62617463ULL});
  Batch b;
  b.n = 2 + seed % 7;
  static constexpr double taus[] = {0.5, 0.25, 1.0};
  b.tau = taus[seed % 3];
  const std::size_t dc = 3, ds = 2 + seed % 3;
  b.c = unit_rows(normal_matrix(rng, b.n, dc));
  const auto jitter = [&](const Matrix& m, double sd) {
    Matrix out = m;
    for (auto& v : out.values()) v += sd * rng.normal();
    return out;
  };
  b.c_view = unit_rows(jitter(b.c, 0.2));
  b.c_view2 = unit_rows(jitter(b.c, 0.3));
  b.s = normal_matrix(rng, b.n, ds, 0.8);
  b.s_view = jitter(b.s, 0.2);
  b.x = unit_rows(normal_matrix(rng, b.n, dc));
  b.y = unit_rows(normal_matrix(rng, 1 + (seed * 5) % 7, dc));
  b.s_prime.resize(ds);
  for (auto& v : b.s_prime) v = 0.3 * rng.normal();
  b.attr = uniform_vector(rng, b.n);
  b.s_col = normal_matrix(rng, b.n, 1);
  return b;
}

struct Accumulator {
  explicit Accumulator(std::string n) : name(std::move(n)) {}
  std::string name;
  double max_error = 0.0;
  std::string worst;
  bool failed = false;

  void add(double err, const std::string& where, double tol) {
    if (!(err <= tol)) failed = true;
    if (!(err <= max_error) || worst.empty()) {
      if (std::isnan(err) || err >= max_error) {
        max_error = std::isnan(err) ? INFINITY : err;
        worst = where;
      }
    }
  }
  CheckResult result(const std::string& tol_text) const {
    return {name, !failed, max_error, "max error " + fmt(max_error) + " (" + tol_text + ") worst at " + worst};
  }
  static std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
  }
};

double rel_gap(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

std::string seed_text(std::uint64_t s) { return "seed " + std::to_string(s); }

}  // namespace

SuiteReport run_oracles(const EstimatorSet& impl, const SuiteOptions& opts) {
  const auto t0 = Clock::now();
  const char* names[] = {"entropy_hat",    "uniformity_loss",   "alignment_loss",   "sprime_uniformity_loss",
                         "infoless_loss",  "kjem_loss",         "kmi_loss",         "mmd_loss",
                         "sup_infomax_loss", "sup_alignment_out", "sup_alignment_in"};
  std::vector<Accumulator> acc;
  for (const char* n : names) acc.emplace_back(n);
  const double tol = opts.oracle_tol;
  for (std::uint64_t seed = 0; seed < opts.seeds; ++seed) {
    const Batch b = make_batch(seed);
    const Bandwidth bw(b.tau);
    const NullVector sp{b.s_prime};
    const double sigma = 0.2;
    d::Tape t;
    const auto c = t.leaf(b.c), s = t.leaf(b.s), cv = t.leaf(b.c_view), cv2 = t.leaf(b.c_view2);
    const auto x = t.leaf(b.x), y = t.leaf(b.y), scol = t.leaf(b.s_col);
    const DiffArray views[] = {cv, cv2};
    const double got[] = {impl.entropy_hat(c, bw).item(),
                          impl.uniformity(c, bw).item(),
                          impl.alignment(c, views, bw).item(),
                          impl.sprime_uniformity(s, sp, bw).item(),
                          impl.infoless(s, sp, bw).item(),
                          impl.kjem(c, s, bw).item(),
                          impl.kmi(c, s, bw).item(),
                          impl.mmd(x, y, bw).item(),
                          impl.sup_infomax(scol, b.attr, sigma, bw).item(),
                          impl.sup_alignment_out(scol, b.attr, sigma, bw).item(),
                          impl.sup_alignment_in(scol, b.attr, sigma, bw).item()};
    const double want[] = {naive::entropy(b.c, b.tau),
                           naive::uniformity(b.c, b.tau),
                           naive::alignment(b.c, {b.c_view, b.c_view2}, b.tau),
                           naive::sprime_uniformity(b.s, b.s_prime, b.tau),
                           naive::infoless(b.s, b.s_prime, b.tau),
                           naive::kjem(b.c, b.s, b.tau),
                           naive::kmi(b.c, b.s, b.tau),
                           naive::mmd(b.x, b.y, b.tau),
                           naive::sup_infomax(b.s_col, b.attr, sigma, b.tau),
                           naive::sup_alignment_out(b.s_col, b.attr, sigma, b.tau),
                           naive::sup_alignment_in(b.s_col, b.attr, sigma, b.tau)};
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k].add(rel_gap(got[k], want[k]), seed_text(seed), tol);
  }
  SuiteReport r{"oracles", {}, 0.0};
  for (const auto& a : acc) r.checks.push_back(a.result("tol " + Accumulator::fmt(tol)));
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return r;
}

namespace {

// Gradient check of f over every seed; f receives the batch and the leaf.
CheckResult grad_check(const std::string& name, const SuiteOptions& opts,
                       const std::function<Matrix(const Batch&)>& input,
                       const std::function<DiffArray(const Batch&, d::Tape&, const DiffArray&)>& f) {
  Accumulator acc{name};
  for (std::uint64_t seed = 0; seed < opts.seeds; ++seed) {
    const Batch b = make_batch(seed);
    const auto report = d::check_gradients([&](d::Tape& t, const DiffArray& x) { return f(b, t, x); }, input(b),
                                           opts.grad_h, opts.grad_rtol);
    acc.add(report.max_rel_error, seed_text(seed) + " coord " + std::to_string(report.worst_index), opts.grad_rtol);
  }
  return acc.result("rtol " + Accumulator::fmt(opts.grad_rtol));
}

}  // namespace

SuiteReport run_grads(const EstimatorSet& impl, const SuiteOptions& opts) {
  const auto t0 = Clock::now();
  SuiteReport r{"grads", {}, 0.0};
  const auto C = [](const Batch& b) { return b.c; };
  const auto S = [](const Batch& b) { return b.s; };
  const auto bw = [](const Batch& b) { return Bandwidth(b.tau); };
  const auto add = [&](CheckResult c) { r.checks.push_back(std::move(c)); };

  add(grad_check("entropy_hat", opts, C, [&](const Batch& b, d::Tape&, const DiffArray& x) {
    return impl.entropy_hat(x, bw(b));
  }));
  add(grad_check("uniformity_loss", opts, C, [&](const Batch& b, d::Tape&, const DiffArray& x) {
    return impl.uniformity(x, bw(b));
  }));
  add(grad_check("alignment_loss", opts, C, [&](const Batch& b, d::Tape& t, const DiffArray& x) {
    const DiffArray views[] = {t.leaf(b.c_view), t.leaf(b.c_view2)};
    return impl.alignment(x, views, bw(b));
  }));
  add(grad_check("alignment_loss/views", opts, [](const Batch& b) { return b.c_view; },
                 [&](const Batch& b, d::Tape& t, const DiffArray& x) {
                   const DiffArray views[] = {x};
                   return impl.alignment(t.leaf(b.c), views, bw(b));
                 }));
  add(grad_check("sprime_uniformity_loss", opts, S, [&](const Batch& b, d::Tape&, const DiffArray& x) {
    return impl.sprime_uniformity(x, NullVector{b.s_prime}, bw(b));
  }));
  add(grad_check("infoless_loss", opts, S, [&](const Batch& b, d::Tape&, const DiffArray& x) {
    return impl.infoless(x, NullVector{b.s_prime}, bw(b));
  }));
  add(grad_check("kjem_loss/common", opts, C, [&](const Batch& b, d::Tape& t, const DiffArray& x) {
    return impl.kjem(x, t.leaf(b.s), bw(b));
  }));
  add(grad_check("kjem_loss/salient", opts, S, [&](const Batch& b, d::Tape& t, const DiffArray& x) {
    return impl.kjem(t.leaf(b.c), x, bw(b));
  }));
  add(grad_check("kmi_loss/common", opts, C, [&](const Batch& b, d::Tape& t, const DiffArray& x) {
    return impl.kmi(x, t.leaf(b.s), bw(b));
  }));
  add(grad_check("kmi_loss/salient", opts, S, [&](const Batch& b, d::Tape& t, const DiffArray& x) {
    return impl.kmi(t.leaf(b.c), x, bw(b));
  }));
  add(grad_check("mmd_loss", opts, [](const Batch& b) { return b.x; },
                 [&](const Batch& b, d::Tape& t, const DiffArray& x) { return impl.mmd(x, t.leaf(b.y), bw(b)); }));
  add(grad_check("sup_infomax_loss", opts, [](const Batch& b) { return b.s_col; },
                 [&](const Batch& b, d::Tape&, const DiffArray& x) {
                   return impl.sup_infomax(x, b.attr, 0.2, bw(b));
                 }));
  add(grad_check("sup_alignment_in", opts, [](const Batch& b) { return b.s_col; },
                 [&](const Batch& b, d::Tape&, const DiffArray& x) {
                   return impl.sup_alignment_in(x, b.attr, 0.2, bw(b));
                 }));

  // Composite objective through the row normalization of the common space.
  for (const auto mode : {losses::IndependenceMode::kjem, losses::IndependenceMode::kmi, losses::IndependenceMode::mmd}) {
    add(grad_check(std::string("total_loss/") + std::string(losses::to_string(mode)), opts,
                   [](const Batch& b) {
                     Matrix m(b.n * 2, b.c.cols() + b.s.cols());
                     Rng rng({b.n, 0x746f74ULL});
                     for (auto& v : m.values()) v = rng.normal();
                     return m;
                   },
                   [&, mode](const Batch& b, d::Tape& t, const DiffArray& x) {
                     const std::size_t dc = b.c.cols(), n = x.rows(), half = n / 2;
                     losses::BatchEmbeddings batch;
                     const auto c_all = d::normalize_rows(d::slice_cols(x, 0, dc));
                     const auto s_all = d::slice_cols(x, dc, x.cols());
                     std::vector<std::size_t> first(half), second(half);
                     for (std::size_t i = 0; i < half; ++i) {
                       first[i] = i;
                       second[i] = half + i;
                     }
                     batch.common = d::gather_rows(c_all, first);
                     batch.common_view = d::gather_rows(c_all, second);
                     batch.salient = d::gather_rows(s_all, first);
                     batch.salient_view = d::gather_rows(s_all, second);
                     for (std::size_t i = 0; i < half; ++i) (i < half / 2 ? batch.background_rows : batch.target_rows).push_back(i);
                     batch.s_prime = NullVector{std::vector<double>(s_all.cols(), 0.0)};
                     losses::LossWeights w;
                     w.tau = b.tau;
                     w.lambda_s = 3.0;
                     w.beta = 2.0;
                     w.independence_mode = mode;
                     (void)t;
                     return losses::total_loss(batch, w, losses::ObjectiveMode::unsupervised).total;
                   }));
  }

  add(grad_check("normalize_rows", opts, S, [](const Batch& b, d::Tape& t, const DiffArray& x) {
    const auto w = t.leaf(normal_matrix(*std::make_unique<Rng>(b.n).get(), x.rows(), x.cols()));
    return d::sum(d::mul(d::normalize_rows(x), w));
  }));
  add(grad_check("batch_standardize", opts, S, [](const Batch& b, d::Tape& t, const DiffArray& x) {
    Rng rng(b.n + 1);
    const auto w = t.leaf(normal_matrix(rng, x.rows(), x.cols()));
    return d::sum(d::mul(d::batch_standardize(x, 1e-5), w));
  }));
  add(grad_check("encoder_forward", opts,
                 [](const Batch& b) {
                   Rng rng({b.n, 0x656e63ULL});
                   return normal_matrix(rng, std::max<std::size_t>(b.n, 3), 5);
                 },
                 [](const Batch& b, d::Tape& t, const DiffArray& x) {
                   encoders::MlpSpec spec;
                   spec.layer_widths = {5, 6, 4};
                   spec.head_widths = {6, 3};
                   spec.output_norm = encoders::OutputNorm::unit_sphere;
                   spec.activation = b.n % 2 ? encoders::Activation::tanh : encoders::Activation::rectifier;
                   spec.init_seed = b.n;
                   const encoders::Mlp mlp(spec);
                   const auto out = mlp.forward(t, x, encoders::Phase::train, false);
                   Rng rng(b.n + 7);
                   const auto w = t.leaf(normal_matrix(rng, out.projection.rows(), out.projection.cols()));
                   return d::sum(d::mul(out.projection, w));
                 }));
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return r;
}

SuiteReport run_kernels(const EstimatorSet& impl, const SuiteOptions& opts) {
  const auto t0 = Clock::now();
  SuiteReport r{"kernels", {}, 0.0};

  {
    // Gaussian minus vMF log-kernel on unit rows is the constant -1/tau.
    Accumulator acc{"gaussian_vmf_constant_offset"};
    for (std::uint64_t seed = 0; seed < opts.seeds; ++seed) {
      const Batch b = make_batch(seed);
      d::Tape t;
      const auto a = t.leaf(b.c), c = t.leaf(b.c_view);
      const auto g = kernels::gaussian_log_kernel(kernels::pairwise_sq_dists(a, c), Bandwidth(b.tau)).values();
      const auto v = kernels::vmf_log_kernel(a, c, Bandwidth(b.tau)).values();
      double mean = 0.0;
      for (std::size_t k = 0; k < g.size(); ++k) mean += g[k] - v[k];
      mean /= static_cast<double>(g.size());
      double var = 0.0;
      for (std::size_t k = 0; k < g.size(); ++k) var += (g[k] - v[k] - mean) * (g[k] - v[k] - mean);
      var /= static_cast<double>(g.size());
      acc.add(var, seed_text(seed), 1e-12);
      acc.add(std::abs(mean + 1.0 / b.tau), seed_text(seed) + " offset", 1e-12);
    }
    r.checks.push_back(acc.result("variance tol 1e-12"));
  }
  {
    Accumulator fact{"kjem_factorization"}, zero{"kmi_zero_when_independent"};
    for (std::uint64_t seed = 0; seed < opts.seeds; ++seed) {
      const Batch b = make_batch(seed);
      const Bandwidth bw(b.tau);
      d::Tape t;
      Matrix s_const(b.n, b.s.cols());
      for (std::size_t i = 0; i < b.n; ++i) std::copy(b.s_prime.begin(), b.s_prime.end(), s_const.row(i).begin());
      Matrix c_const(b.n, b.c.cols());
      for (std::size_t i = 0; i < b.n; ++i) std::copy(b.c.row(0).begin(), b.c.row(0).end(), c_const.row(i).begin());
      const auto c = t.leaf(b.c), s = t.leaf(b.s), sc = t.leaf(s_const), cc = t.leaf(c_const);
      fact.add(std::abs(impl.kjem(c, sc, bw).item() + impl.entropy_hat(c, bw).item()), seed_text(seed), 1e-12);
      fact.add(std::abs(impl.kjem(cc, s, bw).item() + impl.entropy_hat(s, bw).item()), seed_text(seed) + " sym", 1e-12);
      zero.add(std::abs(impl.kmi(c, sc, bw).item()), seed_text(seed), 1e-10);
      zero.add(std::abs(impl.kmi(cc, s, bw).item()), seed_text(seed) + " sym", 1e-10);
    }
    r.checks.push_back(fact.result("tol 1e-12"));
    r.checks.push_back(zero.result("tol 1e-10"));
  }
  {
    // Jensen: -L_unif <= H and out-form >= in-form alignment. Error is the
    // size of any violation.
    Accumulator unif{"jensen_uniformity_entropy"}, sup{"jensen_sup_alignment"};
    for (std::uint64_t k = 0; k < opts.jensen_batches; ++k) {
      Rng rng({k, 0x6a656e73ULL});
      const std::size_t n = 2 + rng.below(15);
      const double tau = rng.uniform(0.1, 2.0);
      d::Tape t;
      const auto z = t.leaf(normal_matrix(rng, n, 1 + rng.below(6), rng.uniform(0.1, 3.0)));
      const double gap = impl.entropy_hat(z, Bandwidth(tau)).item() + impl.uniformity(z, Bandwidth(tau)).item();
      unif.add(std::max(0.0, -gap), "batch " + std::to_string(k), 1e-12);
      const auto s = t.leaf(normal_matrix(rng, n, 1));
      const auto a = uniform_vector(rng, n);
      const double sigma = rng.uniform(0.05, 1.0);
      const double g2 = impl.sup_alignment_out(s, a, sigma, Bandwidth(tau)).item() -
                        impl.sup_alignment_in(s, a, sigma, Bandwidth(tau)).item();
      sup.add(std::max(0.0, -g2), "batch " + std::to_string(k), 1e-12);
    }
    r.checks.push_back(unif.result("violation tol 1e-12"));
    r.checks.push_back(sup.result("violation tol 1e-12"));
  }
  {
    Accumulator acc{"mmd_zero_on_identical_samples"};
    for (std::uint64_t seed = 0; seed < opts.seeds; ++seed) {
      const Batch b = make_batch(seed);
      d::Tape t;
      const auto x = t.leaf(b.x);
      acc.add(std::abs(impl.mmd(x, t.leaf(b.x), Bandwidth(b.tau)).item()), seed_text(seed), 1e-12);
    }
    r.checks.push_back(acc.result("tol 1e-12"));
  }
  {
    Accumulator acc{"alignment_zero_on_identical_views"};
    for (std::uint64_t seed = 0; seed < opts.seeds; ++seed) {
      const Batch b = make_batch(seed);
      d::Tape t;
      const auto c = t.leaf(b.c);
      const DiffArray views[] = {t.leaf(b.c)};
      acc.add(std::abs(impl.alignment(c, views, Bandwidth(b.tau)).item()), seed_text(seed), 1e-12);
    }
    r.checks.push_back(acc.result("tol 1e-12"));
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return r;
}

std::vector<std::string> suite_names() { return {"grads", "oracles", "kernels"}; }

SuiteReport run_suite(std::string_view name, const EstimatorSet& impl, const SuiteOptions& opts) {
  if (name == "grads") return run_grads(impl, opts);
  if (name == "oracles") return run_oracles(impl, opts);
  if (name == "kernels") return run_kernels(impl, opts);
  throw InvalidArgument("unknown suite '" + std::string(name) + "' (expected grads|oracles|kernels)");
}

std::string format(const SuiteReport& report) {
  std::ostringstream os;
  std::size_t failed = 0;
  for (const auto& c : report.checks) {
    os << (c.passed ? "PASS " : "FAIL ") << report.suite << "/" << c.name << "  " << c.detail << "\n";
    failed += c.passed ? 0 : 1;
  }
  os.precision(3);
  os << report.suite << ": " << report.checks.size() - failed << "/" << report.checks.size() << " passed in "
     << report.seconds << " s\n";
  return os.str();
}

}  // namespace sepclr::verify
