#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "sepclr/datagen.hpp"
#include "sepclr/encoders.hpp"
#include "sepclr/error.hpp"
#include "sepclr/losses.hpp"

namespace sepclr::train {

using encoders::EncoderPair;
using losses::LossBundle;
using losses::LossWeights;
using losses::ObjectiveMode;

struct TrainConfig {
  std::size_t epochs = 50;
  /// Samples per step, half background and half target.
  std::size_t batch_size = 256;
  double learning_rate = 5e-4;
  LossWeights weights;
  ObjectiveMode mode = ObjectiveMode::unsupervised;
  std::uint64_t seed = 0;
  /// Epoch interval for TrainCallbacks::on_eval; 0 disables it.
  std::size_t eval_every = 0;
  /// Defaults to AugmentationSpec::defaults_for(dataset kind).
  std::optional<data::AugmentationSpec> augmentation;

  void validate() const;
};

struct HistoryRow {
  std::size_t step = 0;
  std::size_t epoch = 0;
  LossBundle loss;
};

struct TrainCallbacks {
  std::function<void(std::size_t epoch, const EncoderPair&)> on_eval;
  std::function<void(const HistoryRow&)> on_step;
};

struct TrainResult {
  EncoderPair encoders;
  std::vector<HistoryRow> history;
};

/// Raised when the objective stops being finite.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(std::size_t step, LossBundle loss);
  std::size_t step() const { return step_; }
  const LossBundle& loss() const { return loss_; }

 private:
  std::size_t step_;
  LossBundle loss_;
};

/// Attribute columns of the target rows scaled to [0, 1] by their range
/// over the dataset. Rows follow ds.rows_with(Origin::target).
Matrix scaled_target_attributes(const data::Dataset& ds);

/// Adam with bias correction over a flat list of parameter buffers.
class Adam {
 public:
  Adam(std::vector<std::size_t> sizes, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  /// Applies one update; grads[i] may be empty (treated as zero).
  void step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads);
  std::size_t steps() const { return t_; }

 private:
  double lr_, b1_, b2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

TrainResult train(const data::Dataset& ds, EncoderPair enc, const TrainConfig& cfg,
                  const TrainCallbacks& callbacks = {});

/// Steps per epoch for a dataset: balanced halves, last partial batch dropped.
std::size_t steps_per_epoch(const data::Dataset& ds, std::size_t batch_size);

/// Columns: step, epoch, align, unif, y_align, sprime_unif, infoless,
/// independence, sup_0..sup_{D-1}, total.
void write_history_csv(std::span<const HistoryRow> history, const std::filesystem::path& path);

/// Exponential moving average of the total loss (first and last value).
std::pair<double, double> ema_endpoints(std::span<const HistoryRow> history, double alpha = 0.05);

}  // namespace sepclr::train
