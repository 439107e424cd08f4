#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sepclr/encoders.hpp"
#include "sepclr/train.hpp"

namespace sepclr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Augmentation fields set in a config; unset ones come from
/// AugmentationSpec::defaults_for(dataset kind).
struct AugmentationOverrides {
  std::optional<std::size_t> max_shift;
  std::optional<double> flip_prob;
  std::optional<double> brightness_lo;
  std::optional<double> brightness_hi;
  std::optional<double> noise_std;

  data::AugmentationSpec apply(data::AugmentationSpec base) const;
  friend bool operator==(const AugmentationOverrides&, const AugmentationOverrides&) = default;
};

/// Everything a training run needs besides the data.
struct RunConfig {
  /// train.augmentation is left unset; see augmentation.
  train::TrainConfig train;
  AugmentationOverrides augmentation;
  /// 0 picks the dataset's attribute count in attribute mode, else 32.
  std::size_t salient_dim = 0;
  std::size_t common_dim = 32;
  std::size_t representation_dim = 32;
  bool seed_set = false;
  /// Whether lambda_ind was set explicitly (otherwise it follows the mode).
  bool lambda_ind_set = false;

  encoders::PairSpecOptions pair_options(const data::Dataset& ds) const;
  /// Fills every dataset-dependent default (salient_dim, augmentation).
  RunConfig resolved(const data::Dataset& ds) const;
  /// TrainConfig with the augmentation for the dataset.
  train::TrainConfig train_config(const data::Dataset& ds) const;
};

/// Config file keys, one `key = value` per line, `#` comments:
///   epochs batch_size learning_rate seed eval_every
///   mode (unsupervised|attribute) independence (kjem|kmi|mmd|none)
///   lambda_c lambda_s beta lambda_ind tau sigma_attr salient_infomax
///   common_dim salient_dim representation_dim
///   aug_max_shift aug_flip_prob aug_brightness_lo aug_brightness_hi aug_noise_std
/// Unknown or repeated keys raise ConfigError naming the line.
RunConfig parse_config(std::string_view text, const std::string& source = "<config>");
RunConfig read_config(const std::filesystem::path& path);
/// Fully resolved key=value text; parse_config(to_text(c)) == c.
std::string to_text(const RunConfig& c);

/// Seed from SEPCLR_SEED, or fallback when unset.
std::uint64_t env_seed(std::uint64_t fallback = 0);

/// FNV-1a 64 over the bytes of the files, in the given order.
std::uint64_t checksum_files(const std::vector<std::filesystem::path>& files);
std::string hex64(std::uint64_t v);

/// Record of one training run.
struct RunManifest {
  std::string config;  // to_text(RunConfig)
  std::uint64_t seed = 0;
  std::string version;
  double wall_clock_seconds = 0.0;
  std::string data_dir;
  std::string checkpoint;
  std::string history;
  std::vector<std::string> reports;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

std::string version_string();

/// Entry point; args excludes the program name. Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sepclr::cli
