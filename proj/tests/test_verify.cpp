#include <doctest.h>

#include "sepclr/diff/ops.hpp"
#include "sepclr/error.hpp"
#include "sepclr/verify/suites.hpp"

using namespace sepclr;
using namespace sepclr::verify;
namespace d = sepclr::diff;

namespace {

SuiteOptions quick() {
  SuiteOptions o;
  o.seeds = 3;
  o.jensen_batches = 10;
  return o;
}

}  // namespace

TEST_CASE("every suite passes on the library estimators") {
  for (const auto& name : suite_names()) {
    CAPTURE(name);
    const auto r = run_suite(name, EstimatorSet::library(), quick());
    CHECK(r.suite == name);
    CHECK_FALSE(r.checks.empty());
    for (const auto& c : r.checks) {
      CAPTURE(c.name);
      CAPTURE(c.detail);
      CHECK(c.passed);
    }
    CHECK(r.passed());
    const auto text = format(r);
    CHECK(text.find("FAIL") == std::string::npos);
    CHECK(text.find(name + ": ") != std::string::npos);
  }
  CHECK_THROWS_AS(run_suite("nope"), InvalidArgument);
}

TEST_CASE("a sign-flipped joint entropy fails the oracle suite") {
  auto broken = EstimatorSet::library();
  const auto kjem = broken.kjem;
  broken.kjem = [kjem](const d::DiffArray& c, const d::DiffArray& s, kernels::Bandwidth b) {
    return d::scale(kjem(c, s, b), -1.0);
  };
  const auto r = run_oracles(broken, quick());
  CHECK_FALSE(r.passed());
  CHECK_FALSE(r.find("kjem_loss").passed);
  CHECK(r.find("kmi_loss").passed);
  CHECK(format(r).find("FAIL oracles/kjem_loss") != std::string::npos);
}

TEST_CASE("a small bias in uniformity is caught at the oracle tolerance") {
  auto broken = EstimatorSet::library();
  const auto u = broken.uniformity;
  broken.uniformity = [u](const d::DiffArray& z, kernels::Bandwidth b) { return d::add_scalar(u(z, b), 1e-9); };
  const auto r = run_oracles(broken, quick());
  CHECK_FALSE(r.find("uniformity_loss").passed);
  CHECK(r.find("uniformity_loss").max_error > 1e-12);
}

TEST_CASE("an offset MMD fails the kernel identities") {
  auto broken = EstimatorSet::library();
  const auto m = broken.mmd;
  broken.mmd = [m](const d::DiffArray& x, const d::DiffArray& y, kernels::Bandwidth b) {
    return d::add_scalar(m(x, y, b), 1e-6);
  };
  const auto r = run_kernels(broken, quick());
  CHECK_FALSE(r.find("mmd_zero_on_identical_samples").passed);
  CHECK(r.find("kjem_factorization").passed);
}

TEST_CASE("suite reports look up checks by name") {
  const auto r = run_kernels(EstimatorSet::library(), quick());
  CHECK(r.find("kjem_factorization").name == "kjem_factorization");
  CHECK_THROWS_AS(r.find("missing"), InvalidArgument);
  CHECK(r.seconds >= 0.0);
}
