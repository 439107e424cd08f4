#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sepclr/matrix.hpp"
#include "sepclr/origin.hpp"

namespace sepclr::data {

enum class DatasetKind { vector_ca, colored_shapes, attr_sprites };
enum class FactorKind { categorical, continuous };
enum class FactorScope { common, salient };

std::string_view to_string(DatasetKind k);
std::string_view to_string(FactorKind k);
std::string_view to_string(FactorScope s);
/// Accepts "vector-ca", "colored-shapes", "attr-sprites" (or underscores).
DatasetKind parse_dataset_kind(std::string_view s);

struct FactorInfo {
  std::string name;
  FactorKind kind = FactorKind::categorical;
  FactorScope scope = FactorScope::common;
  std::size_t num_classes = 0;  // 0 for continuous factors
};

/// Row-major H x W x C image layout of a flattened input.
struct ImageShape {
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t channels = 3;
  std::size_t size() const { return height * width * channels; }
  friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

/// One example, as a view into its dataset.
struct CASample {
  std::span<const double> input;
  Origin origin = Origin::background;
  std::vector<double> common_factors;
  /// Absent for background samples.
  std::optional<std::vector<double>> salient_factors;
  std::optional<std::vector<double>> attributes;
};

/// Generated contrastive-analysis dataset. Factor values and attributes
/// that do not apply to a row (salient factors of a background sample) are
/// NaN.
struct Dataset {
  DatasetKind kind = DatasetKind::vector_ca;
  std::uint64_t seed = 0;
  Matrix inputs;  // (n, input_dim)
  std::optional<ImageShape> image;
  std::vector<Origin> origin;
  std::vector<FactorInfo> factors;
  Matrix factor_values;  // (n, factors.size())
  std::vector<std::string> attribute_names;
  Matrix attributes;  // (n, D_S) or empty

  std::size_t size() const { return inputs.rows(); }
  std::size_t input_dim() const { return inputs.cols(); }
  bool has_attributes() const { return !attribute_names.empty(); }
  std::vector<std::size_t> rows_with(Origin o) const;
  std::size_t count(Origin o) const;
  /// Throws InvalidArgument for an unknown factor.
  std::size_t factor_index(std::string_view name) const;
  CASample sample(std::size_t i) const;
  /// Rows restricted to the given indices (all columns kept).
  Dataset subset(std::span<const std::size_t> rows) const;
};

struct VectorCaOptions {
  std::size_t n_background = 1000;
  std::size_t n_target = 1000;
  std::size_t common_clusters = 4;
  std::size_t salient_clusters = 4;
  double noise_std = 0.05;
  std::uint64_t seed = 0;
  std::size_t latent_dim = 4;
  std::size_t hidden_dim = 64;
  std::size_t input_dim = 32;
};

/// Vector data: clustered latents z_c (all rows) and z_s (targets; zero for
/// background) pushed through a fixed seeded map
///   x = W2 tanh(W1 [z_c, z_s] + b1) + noise.
/// latents, when given, receives the (n, 2 latent_dim) rows [z_c, z_s].
Dataset gen_vector_ca(const VectorCaOptions& opts, Matrix* latents = nullptr);
/// The clean map g applied to a latent [z_c, z_s]; identical for a seed.
std::vector<double> vector_ca_map(const VectorCaOptions& opts, std::span<const double> latent);

inline constexpr std::size_t kShapeClasses = 3;  // square, disc, triangle
inline constexpr std::size_t kHueClasses = 4;

/// RGB of each salient hue class: red, green, blue, yellow.
std::span<const std::array<double, 3>> hue_palette();

struct ColoredShapesOptions {
  std::size_t n_background = 1000;
  std::size_t n_target = 1000;
  std::uint64_t seed = 0;
  std::size_t image_size = 16;
  /// Max center offset from the image middle, pixels at 16x16.
  double position_jitter = 2.0;
  /// Size as the radius of the equal-area disc, pixels at 16x16.
  double size_lo = 3.0;
  double size_hi = 4.2;
  /// Intensity range g; backgrounds are g * (1, 1, 1).
  double gray_lo = 0.6;
  double gray_hi = 1.0;
  /// Blend from gray (0) to the full palette color (1).
  double saturation = 1.0;
};

/// Background: grayscale shape with position/size/intensity jitter.
/// Target: the same family painted g * mix(gray, palette[hue], saturation).
/// Common factor "shape" (3), salient factor "hue" (4).
Dataset gen_colored_shapes(const ColoredShapesOptions& opts);
Dataset gen_colored_shapes(std::size_t n_background, std::size_t n_target, std::uint64_t seed,
                           std::size_t image_size = 16);

inline constexpr std::size_t kTextureClasses = 4;  // h-stripes, v-stripes, checker, dots
inline constexpr std::size_t kSpriteShapes = 3;    // square, ellipse, heart

struct SpriteAttributes {
  double shape = 0;     // 0 square, 1 ellipse, 2 heart
  double zoom = 1.0;    // [0.5, 1]
  double rotation = 0;  // degrees, [-45, 45]
  double x = 0.5;       // [0, 1]
  double y = 0.5;       // [0, 1]
};

/// Pixel-space center of a sprite with attribute x (or y).
double sprite_center_px(double unit, std::size_t image_size);
/// Half extent in pixels of an unrotated sprite at the given zoom.
double sprite_half_extent_px(double zoom, std::size_t image_size);

/// Background: grayscale procedural texture (common factor "texture").
/// Target: texture plus one white sprite; attributes (shape, zoom,
/// rotation, x, y) are the salient factors, D_S = 5.
Dataset gen_attr_sprites(std::size_t n_background, std::size_t n_target, std::uint64_t seed,
                         std::size_t image_size = 16);

/// Draws a sprite over an existing image (alpha = pixel coverage).
void render_sprite(std::span<double> image, const ImageShape& shape, const SpriteAttributes& a);
/// Fills the image with a texture of the given class and phase.
void render_texture(std::span<double> image, const ImageShape& shape, std::size_t texture, std::size_t phase_x,
                    std::size_t phase_y, double intensity);

/// Stochastic view transform t(.). Applied in order: translate-crop,
/// horizontal flip, brightness scale, additive Gaussian noise.
struct AugmentationSpec {
  std::size_t max_shift = 0;  // pixels; zero-filled
  double flip_prob = 0.0;
  double brightness_lo = 1.0;
  double brightness_hi = 1.0;
  double noise_std = 0.0;

  static AugmentationSpec identity() { return {}; }
  /// Transforms that keep both factors of the dataset intact. Flips and
  /// shifts are never used where position is a factor.
  static AugmentationSpec defaults_for(DatasetKind kind);

  /// Throws InvalidArgument when a transform does not fit the input
  /// (e.g. shifts beyond half the image, image ops on vector data).
  void validate(const std::optional<ImageShape>& image) const;
  bool is_identity() const;
};

/// k independent views of one input; view v draws from (seed, sample_id, v).
std::vector<std::vector<double>> make_views(std::span<const double> input, const std::optional<ImageShape>& image,
                                            const AugmentationSpec& spec, std::size_t k, std::uint64_t seed,
                                            std::uint64_t sample_id);
/// Writes a single view into out (same length as input).
void make_view_into(std::span<const double> input, const std::optional<ImageShape>& image,
                    const AugmentationSpec& spec, std::uint64_t seed, std::uint64_t sample_id,
                    std::uint64_t view_index, std::span<double> out);

// On-disk layout of a dataset directory:
//   dataset.json  metadata: kind, seed, n, input_dim, image shape, factor and
//                 attribute names, blob description
//   manifest.csv  id,origin,<factor columns>,<attribute columns>; empty cells
//                 for absent values
//   inputs.f64    n x input_dim float64, little-endian, row-major
inline constexpr std::string_view kDatasetMeta = "dataset.json";
inline constexpr std::string_view kDatasetManifest = "manifest.csv";
inline constexpr std::string_view kDatasetBlob = "inputs.f64";

void write_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace sepclr::data
