#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sepclr/estimators.hpp"

// Property suites behind `sepclr verify`: finite-difference gradient
// checks, agreement with the naive estimators, and kernel identities.
namespace sepclr::verify {

using diff::DiffArray;
using estimators::NullVector;
using kernels::Bandwidth;

/// The estimator implementations under test. Swapping one entry lets the
/// suites be pointed at a deliberately broken variant.
struct EstimatorSet {
  std::function<DiffArray(const DiffArray&, Bandwidth)> entropy_hat;
  std::function<DiffArray(const DiffArray&, Bandwidth)> uniformity;
  std::function<DiffArray(const DiffArray&, std::span<const DiffArray>, Bandwidth)> alignment;
  std::function<DiffArray(const DiffArray&, const NullVector&, Bandwidth)> sprime_uniformity;
  std::function<DiffArray(const DiffArray&, const NullVector&, Bandwidth)> infoless;
  std::function<DiffArray(const DiffArray&, const DiffArray&, Bandwidth)> kjem;
  std::function<DiffArray(const DiffArray&, const DiffArray&, Bandwidth)> kmi;
  std::function<DiffArray(const DiffArray&, const DiffArray&, Bandwidth)> mmd;
  std::function<DiffArray(const DiffArray&, std::span<const double>, double, Bandwidth)> sup_infomax;
  std::function<DiffArray(const DiffArray&, std::span<const double>, double, Bandwidth)> sup_alignment_out;
  std::function<DiffArray(const DiffArray&, std::span<const double>, double, Bandwidth)> sup_alignment_in;

  static EstimatorSet library();
};

struct CheckResult {
  std::string name;
  bool passed = false;
  /// Largest error seen, in the check's own unit.
  double max_error = 0.0;
  std::string detail;
};

struct SuiteReport {
  std::string suite;
  std::vector<CheckResult> checks;
  double seconds = 0.0;

  bool passed() const;
  const CheckResult& find(std::string_view name) const;
};

struct SuiteOptions {
  std::size_t seeds = 10;
  std::size_t jensen_batches = 100;
  double oracle_tol = 1e-12;
  double grad_rtol = 1e-4;
  double grad_h = 1e-5;
};

SuiteReport run_oracles(const EstimatorSet& impl = EstimatorSet::library(), const SuiteOptions& opts = {});
SuiteReport run_grads(const EstimatorSet& impl = EstimatorSet::library(), const SuiteOptions& opts = {});
SuiteReport run_kernels(const EstimatorSet& impl = EstimatorSet::library(), const SuiteOptions& opts = {});

std::vector<std::string> suite_names();
/// Throws InvalidArgument for an unknown suite name.
SuiteReport run_suite(std::string_view name, const EstimatorSet& impl = EstimatorSet::library(),
                      const SuiteOptions& opts = {});

/// One line per check plus a summary line.
std::string format(const SuiteReport& report);

}  // namespace sepclr::verify
