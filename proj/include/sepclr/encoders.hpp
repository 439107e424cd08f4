#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "sepclr/diff/ops.hpp"
#include "sepclr/diff/tape.hpp"
#include "sepclr/matrix.hpp"

namespace sepclr::encoders {

using diff::DiffArray;

enum class Activation : std::uint8_t { rectifier = 0, tanh = 1 };
enum class OutputNorm : std::uint8_t { none = 0, unit_sphere = 1 };
enum class Phase { train, eval };

/// Shape of one encoder: a trunk MLP ending in a linear representation
/// layer, then an optional projection head
///   linear -> feature standardization -> rectifier -> linear,
/// then the output normalization.
struct MlpSpec {
  /// Input width, hidden widths, representation width.
  std::vector<std::size_t> layer_widths;
  /// Empty for no head, else {hidden width, output width}.
  std::vector<std::size_t> head_widths;
  Activation activation = Activation::rectifier;
  OutputNorm output_norm = OutputNorm::none;
  std::uint64_t init_seed = 0;

  void validate() const;
  std::size_t input_dim() const { return layer_widths.front(); }
  std::size_t representation_dim() const { return layer_widths.back(); }
  std::size_t output_dim() const { return head_widths.empty() ? layer_widths.back() : head_widths.back(); }

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

struct Linear {
  Matrix weight;  // (fan_in, fan_out)
  std::vector<double> bias;
};

/// Per-feature running statistics used by the head at eval time.
struct RunningStats {
  std::vector<double> mean;
  std::vector<double> var;
};

inline constexpr double kStandardizeEps = 1e-5;
inline constexpr double kRunningMomentum = 0.9;

struct EncoderOutput {
  DiffArray representation;  // pre-head, used by probes
  DiffArray projection;      // post-head (and normalization), used by losses
  /// Leaves for every parameter, in Mlp::parameters() order.
  std::vector<DiffArray> params;
  /// Batch statistics of the head standardization (train phase only).
  diff::ColumnStats head_stats;
};

class Mlp {
 public:
  /// Builds the network with Glorot-uniform weights drawn from init_seed
  /// and zero biases.
  explicit Mlp(MlpSpec spec);

  const MlpSpec& spec() const { return spec_; }
  bool has_head() const { return !spec_.head_widths.empty(); }

  std::vector<Linear>& trunk() { return trunk_; }
  const std::vector<Linear>& trunk() const { return trunk_; }
  Linear& head_in() { return head_in_; }
  const Linear& head_in() const { return head_in_; }
  Linear& head_out() { return head_out_; }
  const Linear& head_out() const { return head_out_; }
  RunningStats& running() { return running_; }
  const RunningStats& running() const { return running_; }

  /// Views over every trainable buffer: trunk (W, b)..., head_in, head_out.
  std::vector<std::span<double>> parameters();
  std::vector<std::span<const double>> parameters() const;

  /// Records the forward pass on the tape. Parameters become leaves that
  /// require gradients when track_params is set.
  EncoderOutput forward(diff::Tape& tape, const DiffArray& input, Phase phase, bool track_params) const;

  /// Exponential moving average update of the head statistics.
  void update_running_stats(const diff::ColumnStats& batch);

  friend bool operator==(const Mlp&, const Mlp&);

 private:
  MlpSpec spec_;
  std::vector<Linear> trunk_;
  Linear head_in_;
  Linear head_out_;
  RunningStats running_;
};

bool operator==(const Linear& a, const Linear& b);
bool operator==(const RunningStats& a, const RunningStats& b);

/// Common and salient encoders. Their parameters are disjoint.
struct EncoderPair {
  Mlp common;
  Mlp salient;

  friend bool operator==(const EncoderPair&, const EncoderPair&) = default;
};

struct PairSpecOptions {
  std::size_t input_dim = 768;
  std::vector<std::size_t> trunk_hidden = {256, 128};
  std::size_t representation_dim = 32;
  std::size_t head_hidden = 64;
  std::size_t common_dim = 32;
  std::size_t salient_dim = 32;
  Activation activation = Activation::rectifier;
  std::uint64_t seed = 0;
};

/// Default desk-scale pair: input -> 256 -> 128 -> 32, head 32 -> 64 -> out,
/// common output on the unit sphere.
EncoderPair make_encoder_pair(const PairSpecOptions& opts);

struct PairOutput {
  EncoderOutput common;
  EncoderOutput salient;
};
PairOutput forward(const EncoderPair& pair, diff::Tape& tape, const DiffArray& views, Phase phase,
                   bool track_params);

struct Representations {
  Matrix common_repr;
  Matrix common_proj;
  Matrix salient_repr;
  Matrix salient_proj;
};
/// Eval-phase inference over a data matrix, in chunks.
Representations encode(const EncoderPair& pair, const Matrix& inputs, std::size_t chunk = 1024);

// Checkpoint file, little-endian:
//   "SEPCLRCK" | u32 version | u32 encoder count
//   per encoder: u32 n, u64 layer_widths[n] | u32 h, u64 head_widths[h]
//                | u8 activation | u8 output_norm | u64 init_seed
//                | per trunk layer: f64 W[fan_in * fan_out] row-major, f64 b[fan_out]
//                | if head: head_in W, b | f64 running mean[h0], var[h0] | head_out W, b
inline constexpr std::string_view kCheckpointMagic = "SEPCLRCK";
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const EncoderPair& pair, const std::filesystem::path& path);
EncoderPair load_checkpoint(const std::filesystem::path& path);

}  // namespace sepclr::encoders
