#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "sepclr/error.hpp"
#include "sepclr/estimators.hpp"
#include "sepclr/verify/naive.hpp"

using namespace sepclr;
using namespace sepclr::estimators;
namespace naive = sepclr::verify::naive;
using testing::random_matrix;
using testing::random_unit;

namespace {

const Bandwidth half(0.5);

Matrix constant_rows(std::size_t n, std::vector<double> row) {
  Matrix m(n, row.size());
  for (std::size_t i = 0; i < n; ++i) std::copy(row.begin(), row.end(), m.row(i).begin());
  return m;
}

Matrix shifted(Matrix m, double by) {
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t k = 0; k < m.cols(); ++k) m(i, k) += by * static_cast<double>(k + 1);
  return m;
}

}  // namespace

TEST_CASE("entropy_hat examples") {
  diff::Tape t;
  CHECK(entropy_hat(t.leaf(constant_rows(4, {0.3, -1.0})), half).item() == 0.0);
  const auto two = t.leaf(Matrix(2, 1, std::vector<double>{0.0, 1.0}));
  CHECK(entropy_hat(two, half).item() == doctest::Approx(-std::log((1.0 + std::exp(-1.0)) / 2.0)).epsilon(1e-14));
  CHECK(entropy_hat(two, half).item() == doctest::Approx(0.37988).epsilon(1e-4));
  const Matrix z = random_matrix(1, 6, 3);
  CHECK(std::abs(entropy_hat(t.leaf(z), half).item() - naive::entropy(z, 0.5)) < 1e-12);
}

TEST_CASE("entropy_hat exclude_self option") {
  diff::Tape t;
  const Matrix z = random_matrix(2, 5, 2);
  const double got = entropy_hat(t.leaf(z), half, {.exclude_self = true}).item();
  CHECK(std::abs(got - naive::entropy(z, 0.5, true)) < 1e-12);
  CHECK(got != doctest::Approx(naive::entropy(z, 0.5)));
}

TEST_CASE("uniformity_loss examples") {
  diff::Tape t;
  CHECK(uniformity_loss(t.leaf(constant_rows(3, {1, 2, 3})), half).item() == 0.0);
  const Matrix z = random_matrix(3, 8, 2);
  CHECK(std::abs(uniformity_loss(t.leaf(z), half).item() - naive::uniformity(z, 0.5)) < 1e-12);
}

TEST_CASE("alignment_loss examples") {
  diff::Tape t;
  const Matrix z = random_unit(4, 5, 3);
  const auto zl = t.leaf(z);
  const diff::DiffArray same[] = {t.leaf(z), t.leaf(z)};
  CHECK(std::abs(alignment_loss(zl, same, half).item()) < 1e-15);

  const auto one = t.leaf(Matrix(1, 2, std::vector<double>{1, 0}));
  const diff::DiffArray far[] = {t.leaf(Matrix(1, 2, std::vector<double>{0, 1}))};
  CHECK(alignment_loss(one, far, half).item() == doctest::Approx(2.0).epsilon(1e-14));

  std::vector<Matrix> views{random_unit(5, 5, 3), random_unit(6, 5, 3), random_unit(7, 5, 3)};
  std::vector<diff::DiffArray> vl;
  for (const auto& v : views) vl.push_back(t.leaf(v));
  CHECK(std::abs(alignment_loss(zl, vl, half).item() - naive::alignment(z, views, 0.5)) < 1e-12);
}

TEST_CASE("alignment_loss rejects misaligned views") {
  diff::Tape t;
  const auto z = t.leaf(random_matrix(8, 4, 2));
  const diff::DiffArray bad[] = {t.leaf(random_matrix(9, 3, 2))};
  CHECK_THROWS(alignment_loss(z, bad, half));
  CHECK_THROWS(alignment_loss(z, std::span<const diff::DiffArray>{}, half));
}

TEST_CASE("sprime_uniformity_loss examples") {
  diff::Tape t;
  const NullVector sp{{0.2, -0.4}};
  CHECK(sprime_uniformity_loss(t.leaf(constant_rows(6, sp.s_prime)), sp, half).item() ==
        doctest::Approx(std::log(1.5)).epsilon(1e-14));
  const auto single = t.leaf(Matrix(1, 2, std::vector<double>{1.2, -0.4}));
  const double v = sprime_uniformity_loss(single, sp, half).item();
  CHECK(v == doctest::Approx(std::log(0.5 + std::exp(-2.0))).epsilon(1e-14));
  CHECK(v == doctest::Approx(-0.45360).epsilon(1e-5));
  const Matrix s = random_matrix(10, 5, 2);
  CHECK(std::abs(sprime_uniformity_loss(t.leaf(s), sp, half).item() - naive::sprime_uniformity(s, sp.s_prime, 0.5)) <
        1e-12);
}

TEST_CASE("infoless_loss examples") {
  diff::Tape t;
  const auto sp = NullVector::zeros(3);
  CHECK(infoless_loss(t.leaf(Matrix(4, 3, 0.0)), sp, half).item() == 0.0);
  CHECK(infoless_loss(t.leaf(Matrix(1, 3, std::vector<double>{0, 2, 0})), sp, half).item() == 4.0);
  const Matrix s = random_matrix(11, 6, 3);
  CHECK(std::abs(infoless_loss(t.leaf(s), sp, half).item() - naive::infoless(s, sp.s_prime, 0.5)) < 1e-12);
}

TEST_CASE("null vector length must match") {
  diff::Tape t;
  CHECK_THROWS(infoless_loss(t.leaf(Matrix(2, 3, 0.0)), NullVector::zeros(2), half));
  CHECK_THROWS(sprime_uniformity_loss(t.leaf(Matrix(2, 3, 0.0)), NullVector::zeros(4), half));
}

TEST_CASE("kjem_loss examples") {
  diff::Tape t;
  const Matrix c = random_unit(12, 6, 3), s = random_matrix(13, 6, 2);
  const auto cl = t.leaf(c), sl = t.leaf(s);
  const auto s_const = t.leaf(constant_rows(6, {0.5, 0.5}));
  const auto c_const = t.leaf(constant_rows(6, {1, 0, 0}));
  CHECK(std::abs(kjem_loss(cl, s_const, half).item() + entropy_hat(cl, half).item()) < 1e-12);
  CHECK(std::abs(kjem_loss(c_const, sl, half).item() + entropy_hat(sl, half).item()) < 1e-12);
  CHECK(std::abs(kjem_loss(c_const, s_const, half).item()) < 1e-15);
  CHECK(std::abs(kjem_loss(cl, sl, half).item() - naive::kjem(c, s, 0.5)) < 1e-12);
}

TEST_CASE("kmi_loss examples") {
  diff::Tape t;
  const Matrix c = random_unit(14, 6, 3);
  const auto cl = t.leaf(c);
  CHECK(std::abs(kmi_loss(cl, t.leaf(constant_rows(6, {1.0, 2.0})), half).item()) < 1e-10);
  const double self = kmi_loss(cl, cl, half).item();
  CHECK(std::abs(self - naive::kmi(c, c, 0.5)) < 1e-12);
  CHECK(self > 0.0);
  const Matrix s = random_matrix(15, 6, 2);
  CHECK(std::abs(kmi_loss(cl, t.leaf(s), half).item() - naive::kmi(c, s, 0.5)) < 1e-12);
}

TEST_CASE("kmi is H(c) + H(s) - H(c, s) exactly") {
  diff::Tape t;
  const auto c = t.leaf(random_unit(16, 7, 3)), s = t.leaf(random_matrix(17, 7, 2));
  const double parts = entropy_hat(c, half).item() + entropy_hat(s, half).item() + kjem_loss(c, s, half).item();
  CHECK(std::abs(kmi_loss(c, s, half).item() - parts) < 1e-12);
}

TEST_CASE("mmd_loss examples") {
  diff::Tape t;
  const Matrix x = random_unit(18, 5, 3);
  CHECK(std::abs(mmd_loss(t.leaf(x), t.leaf(x), half).item()) < 1e-15);
  // two tight clusters far apart: the cross term vanishes
  const Matrix a = shifted(random_matrix(19, 4, 2, -0.01, 0.01), 0.0);
  const Matrix b = shifted(random_matrix(20, 3, 2, -0.01, 0.01), 40.0);
  const double far = mmd_loss(t.leaf(a), t.leaf(b), half).item();
  const auto mean_k = [](const Matrix& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t j = 0; j < m.rows(); ++j) s += std::exp(-naive::sq_dist(m.row(i), m.row(j)));
    return s / static_cast<double>(m.rows() * m.rows());
  };
  CHECK(far == doctest::Approx(mean_k(a) + mean_k(b)).epsilon(1e-12));
  const Matrix y = random_unit(21, 7, 3);
  CHECK(std::abs(mmd_loss(t.leaf(x), t.leaf(y), half).item() - naive::mmd(x, y, 0.5)) < 1e-12);
}

TEST_CASE("attribute_weights examples") {
  const std::vector<double> same(5, 0.3);
  const Matrix w = attribute_weights(same, 0.1);
  for (double v : w.values()) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));
  const Matrix far = attribute_weights(std::vector<double>{0.0, 1.0}, 0.01);
  CHECK(far(0, 0) == doctest::Approx(1.0));
  CHECK(far(0, 1) < 1e-100);
  Rng rng(3);
  std::vector<double> a(8);
  for (auto& v : a) v = rng.uniform();
  const Matrix r = attribute_weights(a, 0.2);
  const Matrix ref = naive::attribute_weights(a, 0.2);
  for (std::size_t i = 0; i < 8; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < 8; ++j) {
      row += r(i, j);
      CHECK(std::abs(r(i, j) - ref(i, j)) < 1e-12);
    }
    CHECK(std::abs(row - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS(attribute_weights(a, 0.0), InvalidArgument);
}

TEST_CASE("supervised infomax examples") {
  diff::Tape t;
  const std::vector<double> a{0.0, 0.25, 0.5, 0.75, 1.0};
  const auto constant = t.leaf(Matrix(5, 1, 0.7));
  CHECK(sup_infomax_loss(constant, a, 0.1, half).item() == 0.0);
  CHECK(sup_alignment_out(constant, a, 0.1, half).item() == 0.0);

  const auto ranked = t.leaf(Matrix(5, 1, a));
  CHECK(sup_alignment_out(ranked, a, 1e-3, half).item() < 1e-12);
  CHECK(sup_alignment_out(ranked, a, 1.0, half).item() > 0.05);

  const Matrix s = random_matrix(22, 6, 1);
  std::vector<double> b{0.1, 0.9, 0.4, 0.4, 0.0, 0.7};
  const auto sl = t.leaf(s);
  CHECK(std::abs(sup_infomax_loss(sl, b, 0.2, half).item() - naive::sup_infomax(s, b, 0.2, 0.5)) < 1e-12);
  CHECK(std::abs(sup_alignment_in(sl, b, 0.2, half).item() - naive::sup_alignment_in(s, b, 0.2, 0.5)) < 1e-12);
}

TEST_CASE("every estimator matches its oracle on small batches") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CAPTURE(seed);
    const std::size_t n = 2 + seed % 7;
    const double tau = 0.2 + 0.15 * static_cast<double>(seed);
    const Bandwidth bw(tau);
    const Matrix c = random_unit(seed, n, 3), c2 = random_unit(seed + 20, n, 3), s = random_matrix(seed + 40, n, 2);
    const Matrix y = random_unit(seed + 60, 9 - n, 3), col = random_matrix(seed + 80, n, 1);
    std::vector<double> a(n);
    Rng rng(seed);
    for (auto& v : a) v = rng.uniform();
    const std::vector<double> sp{0.1, -0.2};
    diff::Tape t;
    const auto cl = t.leaf(c), sl = t.leaf(s), coll = t.leaf(col);
    const diff::DiffArray views[] = {t.leaf(c2)};
    const auto rel = [](double got, double want) { return std::abs(got - want) / std::max(1.0, std::abs(want)); };
    CHECK(rel(entropy_hat(cl, bw).item(), naive::entropy(c, tau)) < 1e-12);
    CHECK(rel(uniformity_loss(cl, bw).item(), naive::uniformity(c, tau)) < 1e-12);
    CHECK(rel(alignment_loss(cl, views, bw).item(), naive::alignment(c, {c2}, tau)) < 1e-12);
    CHECK(rel(sprime_uniformity_loss(sl, {sp}, bw).item(), naive::sprime_uniformity(s, sp, tau)) < 1e-12);
    CHECK(rel(infoless_loss(sl, {sp}, bw).item(), naive::infoless(s, sp, tau)) < 1e-12);
    CHECK(rel(kjem_loss(cl, sl, bw).item(), naive::kjem(c, s, tau)) < 1e-12);
    CHECK(rel(kmi_loss(cl, sl, bw).item(), naive::kmi(c, s, tau)) < 1e-12);
    CHECK(rel(mmd_loss(cl, t.leaf(y), bw).item(), naive::mmd(c, y, tau)) < 1e-12);
    CHECK(rel(sup_infomax_loss(coll, a, 0.15, bw).item(), naive::sup_infomax(col, a, 0.15, tau)) < 1e-12);
  }
}

TEST_CASE("estimators are invariant under a simultaneous row permutation") {
  const std::size_t n = 7;
  const auto p = testing::permutation(5, n);
  const Matrix c = random_unit(23, n, 3), s = random_matrix(24, n, 2), v = random_unit(25, n, 3);
  std::vector<double> a(n);
  Rng rng(9);
  for (auto& x : a) x = rng.uniform();
  std::vector<double> ap(n);
  for (std::size_t i = 0; i < n; ++i) ap[i] = a[p[i]];
  diff::Tape t;
  const auto C = t.leaf(c), S = t.leaf(s), V = t.leaf(v);
  const auto Cp = t.leaf(c.gather_rows(p)), Sp = t.leaf(s.gather_rows(p)), Vp = t.leaf(v.gather_rows(p));
  const NullVector sp{{0.3, 0.1}};
  const auto same = [](double x, double y) { CHECK(std::abs(x - y) < 1e-12); };
  same(entropy_hat(C, half).item(), entropy_hat(Cp, half).item());
  same(uniformity_loss(C, half).item(), uniformity_loss(Cp, half).item());
  const diff::DiffArray vv[] = {V}, vvp[] = {Vp};
  same(alignment_loss(C, vv, half).item(), alignment_loss(Cp, vvp, half).item());
  same(sprime_uniformity_loss(S, sp, half).item(), sprime_uniformity_loss(Sp, sp, half).item());
  same(infoless_loss(S, sp, half).item(), infoless_loss(Sp, sp, half).item());
  same(kjem_loss(C, S, half).item(), kjem_loss(Cp, Sp, half).item());
  same(kmi_loss(C, S, half).item(), kmi_loss(Cp, Sp, half).item());
  same(mmd_loss(C, V, half).item(), mmd_loss(Cp, Vp, half).item());
  const auto col = t.leaf(Matrix(n, 1, std::vector<double>(s.values().begin(), s.values().begin() + n)));
  Matrix colp_m(n, 1);
  for (std::size_t i = 0; i < n; ++i) colp_m(i, 0) = s.values()[p[i]];
  const auto colp = t.leaf(colp_m);
  same(sup_infomax_loss(col, a, 0.2, half).item(), sup_infomax_loss(colp, ap, 0.2, half).item());
}

TEST_CASE("Euclidean estimators are invariant under translation") {
  const Matrix c = random_matrix(26, 6, 3), s = random_matrix(27, 6, 2), y = random_matrix(28, 4, 3);
  diff::Tape t;
  const auto same = [](double x, double z) { CHECK(std::abs(x - z) < 1e-12); };
  same(entropy_hat(t.leaf(c), half).item(), entropy_hat(t.leaf(shifted(c, 3.0)), half).item());
  same(kjem_loss(t.leaf(c), t.leaf(s), half).item(),
       kjem_loss(t.leaf(shifted(c, -2.0)), t.leaf(shifted(s, 5.0)), half).item());
  same(mmd_loss(t.leaf(c), t.leaf(y), half).item(), mmd_loss(t.leaf(shifted(c, 1.5)), t.leaf(shifted(y, 1.5)), half).item());
}

TEST_CASE("Jensen bounds hold on random batches") {
  for (std::uint64_t k = 0; k < 100; ++k) {
    Rng rng({k, 77});
    const std::size_t n = 2 + rng.below(11);
    const double tau = rng.uniform(0.05, 3.0);
    const Matrix z = random_matrix(k, n, 1 + rng.below(5), -3.0, 3.0);
    diff::Tape t;
    const auto zl = t.leaf(z);
    CHECK(-uniformity_loss(zl, Bandwidth(tau)).item() <= entropy_hat(zl, Bandwidth(tau)).item() + 1e-12);
    std::vector<double> a(n);
    for (auto& v : a) v = rng.uniform();
    const auto col = t.leaf(random_matrix(k + 1000, n, 1, -2.0, 2.0));
    const double sigma = rng.uniform(0.02, 1.0);
    CHECK(sup_alignment_out(col, a, sigma, Bandwidth(tau)).item() >=
          sup_alignment_in(col, a, sigma, Bandwidth(tau)).item() - 1e-12);
    const auto y = t.leaf(random_matrix(k + 2000, 1 + rng.below(9), z.cols()));
    CHECK(mmd_loss(zl, y, Bandwidth(tau)).item() >= -1e-12);
  }
  diff::Tape t;
  const auto flat = t.leaf(constant_rows(5, {1.0, 1.0}));
  CHECK(-uniformity_loss(flat, half).item() == doctest::Approx(entropy_hat(flat, half).item()).epsilon(1e-14));
}

TEST_CASE("common-space batches are validated") {
  diff::Tape t;
  EmbeddingBatch ok{t.leaf(random_unit(29, 4, 3)), Space::common_sphere,
                    {Origin::background, Origin::target, Origin::target, Origin::background}};
  CHECK_NOTHROW(ok.validate());
  EmbeddingBatch off{t.leaf(random_matrix(30, 4, 3, 2.0, 3.0)), Space::common_sphere, ok.origin};
  CHECK_THROWS_AS(off.validate(), InvalidArgument);
  EmbeddingBatch short_origin{t.leaf(random_unit(31, 4, 3)), Space::common_sphere, {Origin::target}};
  CHECK_THROWS(short_origin.validate());
  CHECK(entropy_hat(ok, half).item() == doctest::Approx(entropy_hat(ok.z, half).item()));
}
