#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sepclr/datagen.hpp"
#include "sepclr/encoders.hpp"
#include "sepclr/matrix.hpp"

namespace sepclr::probes {

/// Held-out split. Every stratification cell contributes the same number
/// of test rows, so a test set is exactly balanced over cells.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};
Split stratified_split(std::span<const std::size_t> cells, std::uint64_t seed, double test_fraction = 0.25);

/// Per-column centering and scaling fit on training rows. Constant columns
/// map to zero.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Matrix& z);
  static Standardizer identity(std::size_t dim);
  Matrix apply(const Matrix& z) const;
};

struct LogisticOptions {
  double l2 = 1e-3;
  std::size_t max_iter = 500;
  double grad_tol = 1e-6;
  /// Fit on standardized features instead of the raw representation.
  bool standardize = true;
};

/// Multinomial logistic regression on standardized features.
struct LogisticProbe {
  Standardizer standardizer;
  Matrix weight;  // (D + 1, K), last row is the intercept
  std::size_t iterations = 0;
  double grad_norm = 0.0;

  std::vector<std::size_t> predict(const Matrix& z) const;
};
/// Accelerated full-batch gradient descent on mean cross-entropy plus
/// (l2 / 2) |W|^2 (intercept unpenalized).
LogisticProbe fit_logistic(const Matrix& z, std::span<const std::size_t> labels, std::size_t num_classes,
                           const LogisticOptions& opts = {});

struct RidgeProbe {
  Standardizer standardizer;
  std::vector<double> weight;
  double intercept = 0.0;

  std::vector<double> predict(const Matrix& z) const;
};
/// Closed form (Z^T Z + alpha I)^{-1} Z^T y on standardized, centered
/// features; the intercept is the training mean of y.
RidgeProbe fit_ridge(const Matrix& z, std::span<const double> y, double alpha = 1e-3);

/// Unweighted mean of per-class recall over classes present in truth.
double balanced_accuracy(std::span<const std::size_t> truth, std::span<const std::size_t> pred);
double mean_absolute_error(std::span<const double> truth, std::span<const double> pred);
double r_squared(std::span<const double> truth, std::span<const double> pred);

struct MigResult {
  std::vector<double> per_dim;
  double average = 0.0;
};
/// Mutual information gap of latents s (N, D) against attributes (N, D),
/// both discretized into equal-frequency bins (ties share a bin).
MigResult mig_score(const Matrix& s, const Matrix& attributes, std::size_t bins = 20);
/// Equal-frequency bin index of every value; tied values share a bin.
std::vector<std::size_t> equal_frequency_bins(std::span<const double> values, std::size_t bins);
/// Plug-in mutual information (nats) of two discrete label vectors.
double discrete_mutual_information(std::span<const std::size_t> a, std::span<const std::size_t> b);
double discrete_entropy(std::span<const std::size_t> a);

enum class Space { common, salient };
enum class Tap { representation, projection };
std::string_view to_string(Space s);
std::string_view to_string(Tap t);
Tap parse_tap(std::string_view s);

struct ProbeRow {
  std::string factor;
  Space space = Space::common;
  std::string metric;  // "b_acc", "r2" or "mae"
  double value = 0.0;
  /// 1 (or 0 for MAE) when the factor belongs to the space, chance
  /// otherwise; NaN when no best value is defined.
  double expected_best = 0.0;
  /// Counted in delta_tot.
  bool designated = false;
};

struct ProbeReport {
  std::vector<ProbeRow> rows;
  double delta_tot = 0.0;
  std::optional<MigResult> mig;

  /// Throws InvalidArgument when the row does not exist.
  const ProbeRow& find(std::string_view factor, Space space, std::string_view metric) const;
  nlohmann::json to_json() const;
  void write_csv(const std::filesystem::path& path) const;
  void write_json(const std::filesystem::path& path) const;
};

struct EvalOptions {
  std::uint64_t seed = 0;
  Tap tap = Tap::representation;
  /// Factors to probe; empty means every factor of the dataset.
  std::vector<std::string> factors;
  double test_fraction = 0.25;
  LogisticOptions logistic;
  double ridge_alpha = 1e-3;
  std::size_t mig_bins = 20;
};

/// Probes over target rows. common and salient are row-aligned with
/// ds.rows_with(Origin::target). MIG is computed when mig_latents is given.
ProbeReport evaluate_representations(const Matrix& common, const Matrix& salient, const data::Dataset& ds,
                                     const EvalOptions& opts, const Matrix* mig_latents = nullptr);

/// Encodes the dataset and probes the chosen tap of both encoders. MIG uses
/// the salient projection on attribute datasets.
ProbeReport evaluate(const encoders::EncoderPair& enc, const data::Dataset& ds, const EvalOptions& opts = {});

/// Ground-truth one-hot encodings of the designated common (first) and
/// salient (second) factors for the target rows: the oracle encoder.
std::pair<Matrix, Matrix> oracle_representations(const data::Dataset& ds);

/// The four designated cells and delta_tot in percent, followed by the
/// best-expected row.
std::string format_table(const ProbeReport& report);

}  // namespace sepclr::probes
