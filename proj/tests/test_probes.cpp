#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "helpers.hpp"
#include "sepclr/datagen.hpp"
#include "sepclr/error.hpp"
#include "sepclr/probes.hpp"
#include "sepclr/random.hpp"

using namespace sepclr;
using namespace sepclr::probes;

namespace {

// Gaussian elimination with partial pivoting; small dense systems only.
std::vector<double> solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    std::swap(a[c], a[p]);
    std::swap(b[c], b[p]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t c = n; c-- > 0;) {
    double s = b[c];
    for (std::size_t k = c + 1; k < n; ++k) s -= a[c][k] * x[k];
    x[c] = s / a[c][c];
  }
  return x;
}

}  // namespace

TEST_CASE("stratified split: disjoint, complete, balanced test cells") {
  std::vector<std::size_t> cells;
  for (std::size_t i = 0; i < 103; ++i) cells.push_back(i % 4 == 3 ? 3 : i % 3);
  const auto s = stratified_split(cells, 5);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  for (auto i : s.test) CHECK(all.insert(i).second);
  CHECK(all.size() == cells.size());
  std::map<std::size_t, std::size_t> per;
  for (auto i : s.test) ++per[cells[i]];
  CHECK(per.size() == 4);
  for (auto [_, c] : per) CHECK(c == per.begin()->second);
  const auto again = stratified_split(cells, 5);
  CHECK(again.test == s.test);
  CHECK(stratified_split(cells, 6).test != s.test);
  const std::vector<std::size_t> tiny = {0, 0, 0, 1};
  CHECK_THROWS_AS(stratified_split(tiny, 0), InvalidArgument);
  CHECK_THROWS_AS(stratified_split(cells, 0, 1.0), InvalidArgument);
}

TEST_CASE("standardizer centers, scales and zeroes constant columns") {
  Matrix z = testing::random_matrix(1, 50, 3, -4.0, 10.0);
  for (std::size_t i = 0; i < 50; ++i) z(i, 2) = 7.0;
  const auto st = Standardizer::fit(z);
  const Matrix out = st.apply(z);
  for (std::size_t j = 0; j < 2; ++j) {
    double m = 0, v = 0;
    for (std::size_t i = 0; i < 50; ++i) m += out(i, j);
    m /= 50;
    for (std::size_t i = 0; i < 50; ++i) v += (out(i, j) - m) * (out(i, j) - m);
    CHECK(std::abs(m) < 1e-12);
    CHECK(v / 50 == doctest::Approx(1.0).epsilon(1e-12));
  }
  for (std::size_t i = 0; i < 50; ++i) CHECK(out(i, 2) == 0.0);
  CHECK_THROWS_AS(st.apply(Matrix(2, 4)), ShapeError);
}

TEST_CASE("logistic probe: optimum satisfies the stationarity condition") {
  const std::size_t n = 120, d = 3, k = 3;
  const Matrix z = testing::random_matrix(2, n, d);
  std::vector<std::size_t> y(n);
  Rng rng(3);
  for (std::size_t i = 0; i < n; ++i) y[i] = (z(i, 0) + 0.8 * rng.normal() > 0.3) ? 2 : (z(i, 1) > 0 ? 1 : 0);
  LogisticOptions opts;
  opts.l2 = 0.05;
  opts.max_iter = 5000;
  opts.grad_tol = 1e-10;
  const auto probe = fit_logistic(z, y, k, opts);
  CHECK(probe.grad_norm <= 1e-10);
  // Gradient of the objective recomputed independently at the fitted weights.
  const Matrix x = probe.standardizer.apply(z);
  std::vector<double> g((d + 1) * k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> logit(k, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
      logit[c] = probe.weight(d, c);
      for (std::size_t j = 0; j < d; ++j) logit[c] += x(i, j) * probe.weight(j, c);
    }
    const double mx = *std::max_element(logit.begin(), logit.end());
    double den = 0;
    for (double& l : logit) den += (l = std::exp(l - mx));
    for (std::size_t c = 0; c < k; ++c) {
      const double r = logit[c] / den - (y[i] == c ? 1.0 : 0.0);
      for (std::size_t j = 0; j < d; ++j) g[j * k + c] += x(i, j) * r / n;
      g[d * k + c] += r / n;
    }
  }
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t c = 0; c < k; ++c) g[j * k + c] += opts.l2 * probe.weight(j, c);
  for (double v : g) CHECK(std::abs(v) < 1e-8);
}

TEST_CASE("logistic probe: separable classes are recovered") {
  const std::size_t n = 300;
  Matrix z(n, 2);
  std::vector<std::size_t> y(n);
  Rng rng(4);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = i % 3;
    z(i, 0) = 5.0 * static_cast<double>(y[i]) + rng.normal(0.0, 0.3);
    z(i, 1) = rng.normal();
  }
  const auto probe = fit_logistic(z, y, 3);
  CHECK(balanced_accuracy(y, probe.predict(z)) == 1.0);
  CHECK_THROWS_AS(fit_logistic(z, std::vector<std::size_t>(n, 1), 3), InvalidArgument);
  CHECK_THROWS_AS(fit_logistic(z, std::vector<std::size_t>(n, 4), 3), InvalidArgument);
  CHECK_THROWS_AS(fit_logistic(z, std::vector<std::size_t>(n - 1, 0), 3), ShapeError);
}

TEST_CASE("ridge probe matches the normal equations") {
  const std::size_t n = 40, d = 4;
  const Matrix z = testing::random_matrix(5, n, d, -2.0, 3.0);
  std::vector<double> y(n);
  Rng rng(6);
  for (std::size_t i = 0; i < n; ++i) y[i] = 2.0 * z(i, 0) - z(i, 3) + 0.5 + 0.1 * rng.normal();
  const double alpha = 0.7;
  const auto probe = fit_ridge(z, y, alpha);
  const Matrix x = Standardizer::fit(z).apply(z);
  double ybar = 0;
  for (double v : y) ybar += v / n;
  std::vector<std::vector<double>> a(d, std::vector<double>(d, 0.0));
  std::vector<double> b(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < d; ++p) {
      b[p] += x(i, p) * (y[i] - ybar);
      for (std::size_t q = 0; q < d; ++q) a[p][q] += x(i, p) * x(i, q);
    }
  for (std::size_t p = 0; p < d; ++p) a[p][p] += alpha;
  const auto w = solve(a, b);
  CHECK(probe.intercept == doctest::Approx(ybar).epsilon(1e-12));
  for (std::size_t p = 0; p < d; ++p) CHECK(probe.weight[p] == doctest::Approx(w[p]).epsilon(1e-10));
  CHECK(r_squared(y, fit_ridge(z, y, 0.0).predict(z)) > 0.99);
  std::vector<double> bad = y;
  bad[3] = std::nan("");
  CHECK_THROWS_AS(fit_ridge(z, bad, 1.0), InvalidArgument);
  CHECK_THROWS_AS(fit_ridge(z, y, -1.0), InvalidArgument);
}

TEST_CASE("metric examples") {
  const std::vector<std::size_t> t = {0, 0, 0, 1}, p = {0, 0, 1, 1};
  CHECK(balanced_accuracy(t, p) == doctest::Approx((2.0 / 3.0 + 1.0) / 2.0));
  CHECK(balanced_accuracy(t, t) == 1.0);
  const std::vector<double> a = {1, 2, 3, 4}, b = {1, 2, 3, 6};
  CHECK(mean_absolute_error(a, b) == doctest::Approx(0.5));
  CHECK(r_squared(a, b) == doctest::Approx(1.0 - 4.0 / 5.0));
  CHECK(r_squared(a, a) == 1.0);
  const std::vector<double> c = {2, 2, 2, 2};
  CHECK(r_squared(c, c) == 1.0);
  CHECK_THROWS_AS(balanced_accuracy(t, std::vector<std::size_t>{0}), InvalidArgument);
}

TEST_CASE("discrete information measures") {
  const std::vector<std::size_t> a = {0, 1, 2, 3, 0, 1, 2, 3};
  CHECK(discrete_entropy(a) == doctest::Approx(std::log(4.0)));
  CHECK(discrete_mutual_information(a, a) == doctest::Approx(std::log(4.0)));
  const std::vector<std::size_t> b = {0, 0, 0, 0, 1, 1, 1, 1};
  CHECK(discrete_mutual_information(a, b) == doctest::Approx(0.0).epsilon(1e-15));
  const std::vector<std::size_t> half = {0, 0, 1, 1, 0, 0, 1, 1};
  CHECK(discrete_mutual_information(a, half) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("equal-frequency bins") {
  std::vector<double> v(100);
  for (std::size_t i = 0; i < 100; ++i) v[i] = static_cast<double>((i * 37) % 100);
  const auto bins = equal_frequency_bins(v, 20);
  std::map<std::size_t, std::size_t> counts;
  for (std::size_t i = 0; i < 100; ++i) {
    ++counts[bins[i]];
    CHECK(bins[i] == static_cast<std::size_t>(v[i]) / 5);
  }
  CHECK(counts.size() == 20);
  const std::vector<double> ties = {1, 1, 1, 1, 2, 3};
  const auto tb = equal_frequency_bins(ties, 3);
  CHECK(tb[0] == tb[3]);
  CHECK(tb[4] != tb[0]);
  CHECK_THROWS_AS(equal_frequency_bins(ties, 0), InvalidArgument);
}

TEST_CASE("MIG: aligned latents score high, shuffled latents near zero") {
  const std::size_t n = 4000, d = 3;
  const Matrix attr = testing::random_matrix(7, n, d, 0.0, 1.0);
  Matrix lat(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) lat(i, j) = 3.0 * attr(i, (j + 1) % d) - 1.0;
  const auto good = mig_score(lat, attr);
  CHECK(good.per_dim.size() == d);
  for (double v : good.per_dim) CHECK(v >= 0.95);
  CHECK(good.average == doctest::Approx(mig_score(attr, attr).average).epsilon(1e-14));
  const auto noise = mig_score(testing::random_matrix(8, n, d), attr);
  CHECK(noise.average < 0.05);
  Matrix mixed = lat;
  for (std::size_t i = 0; i < n; ++i) mixed(i, 1) = lat(i, 0);
  CHECK(mig_score(mixed, attr).average < good.average);
  CHECK_THROWS_AS(mig_score(Matrix(n, 2), attr), ShapeError);
}

TEST_CASE("oracle representations probe to the best-expected table") {
  const auto ds = data::gen_colored_shapes(20, 480, 9);
  const auto [c, s] = oracle_representations(ds);
  const auto report = evaluate_representations(c, s, ds, {});
  CHECK(report.delta_tot == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(report.find("hue", Space::salient, "b_acc").value == 1.0);
  CHECK(report.find("shape", Space::common, "b_acc").value == 1.0);
  CHECK(report.find("hue", Space::common, "b_acc").value == doctest::Approx(0.25));
  CHECK(report.find("shape", Space::salient, "b_acc").value == doctest::Approx(1.0 / 3.0));
  std::size_t designated = 0;
  for (const auto& r : report.rows) designated += r.designated ? 1 : 0;
  CHECK(designated == 4);
  CHECK_THROWS_AS(report.find("hue", Space::common, "r2"), InvalidArgument);
  const auto table = format_table(report);
  CHECK(table.find("delta_tot") != std::string::npos);
  CHECK(table.find("100") != std::string::npos);
}

TEST_CASE("swapped representations give the worst designated gap") {
  const auto ds = data::gen_colored_shapes(20, 480, 10);
  const auto [c, s] = oracle_representations(ds);
  const auto report = evaluate_representations(s, c, ds, {});
  const double expect = 2.0 * (1.0 - 0.25) + 2.0 * (1.0 - 1.0 / 3.0);
  CHECK(report.delta_tot == doctest::Approx(expect).epsilon(1e-12));
  CHECK_THROWS_AS(evaluate_representations(Matrix(3, 2), s, ds, {}), ShapeError);
}

TEST_CASE("continuous factors get r2 and mae rows and MIG") {
  const auto ds = data::gen_attr_sprites(40, 800, 11);
  const auto targets = ds.rows_with(Origin::target);
  const Matrix attr = ds.attributes.gather_rows(targets);
  Matrix common(targets.size(), 1);
  for (std::size_t i = 0; i < targets.size(); ++i) common(i, 0) = ds.factor_values(targets[i], 0);
  const auto report = evaluate_representations(common, attr, ds, {}, &attr);
  CHECK(report.find("zoom", Space::salient, "r2").value > 0.999);
  CHECK(report.find("zoom", Space::salient, "mae").value < 1e-6);
  CHECK(std::isnan(report.find("zoom", Space::common, "mae").expected_best));
  REQUIRE(report.mig.has_value());
  CHECK(report.mig->per_dim.size() == 5);
  CHECK(report.mig->average > 0.5);
}

TEST_CASE("reports serialize") {
  const auto ds = data::gen_colored_shapes(20, 240, 12);
  const auto [c, s] = oracle_representations(ds);
  const auto report = evaluate_representations(c, s, ds, {});
  testing::TempDir dir("report");
  report.write_csv(dir / "r.csv");
  report.write_json(dir / "r.json");
  std::ifstream csv(dir / "r.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "factor,space,metric,value,expected_best,designated");
  const auto j = nlohmann::json::parse(std::ifstream(dir / "r.json"));
  CHECK(j["delta_tot"].get<double>() == doctest::Approx(report.delta_tot));
  CHECK(j["rows"].size() == report.rows.size());
  CHECK(parse_tap("projection") == Tap::projection);
  CHECK(parse_tap("pre-head") == Tap::representation);
  CHECK_THROWS_AS(parse_tap("middle"), InvalidArgument);
}

TEST_CASE("labels independent of the features probe at chance") {
  const std::size_t n = 2000;
  const Matrix z = testing::random_matrix(13, n, 8);
  std::vector<std::size_t> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = i % 4;
  Rng rng(14);
  rng.shuffle(y);
  const auto split = stratified_split(y, 15);
  std::vector<std::size_t> ytr, yte;
  for (auto i : split.train) ytr.push_back(y[i]);
  for (auto i : split.test) yte.push_back(y[i]);
  const auto probe = fit_logistic(z.gather_rows(split.train), ytr, 4);
  CHECK(std::abs(balanced_accuracy(yte, probe.predict(z.gather_rows(split.test))) - 0.25) <= 0.1);
}
