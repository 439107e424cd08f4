#include "sepclr/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "sepclr/error.hpp"
#include "sepclr/random.hpp"

namespace sepclr::data {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Balanced class assignment: value i % k, shuffled.
std::vector<std::size_t> balanced_labels(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i % k;
  rng.shuffle(out);
  return out;
}

Dataset empty_dataset(DatasetKind kind, std::uint64_t seed, std::size_t n, std::size_t dim,
                      std::vector<FactorInfo> factors) {
  Dataset ds;
  ds.kind = kind;
  ds.seed = seed;
  ds.inputs = Matrix(n, dim);
  ds.origin.resize(n);
  ds.factor_values = Matrix(n, factors.size(), kNaN);
  ds.factors = std::move(factors);
  return ds;
}

}  // namespace

std::string_view to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::vector_ca:
      return "vector-ca";
    case DatasetKind::colored_shapes:
      return "colored-shapes";
    case DatasetKind::attr_sprites:
      return "attr-sprites";
  }
  return "?";
}

std::string_view to_string(FactorKind k) { return k == FactorKind::categorical ? "categorical" : "continuous"; }
std::string_view to_string(FactorScope s) { return s == FactorScope::common ? "common" : "salient"; }

DatasetKind parse_dataset_kind(std::string_view s) {
  std::string v(s);
  std::replace(v.begin(), v.end(), '_', '-');
  if (v == "vector-ca") return DatasetKind::vector_ca;
  if (v == "colored-shapes") return DatasetKind::colored_shapes;
  if (v == "attr-sprites") return DatasetKind::attr_sprites;
  throw InvalidArgument("unknown dataset kind '" + std::string(s) +
                        "' (expected vector-ca|colored-shapes|attr-sprites)");
}

std::vector<std::size_t> Dataset::rows_with(Origin o) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < origin.size(); ++i)
    if (origin[i] == o) out.push_back(i);
  return out;
}

std::size_t Dataset::count(Origin o) const {
  return static_cast<std::size_t>(std::count(origin.begin(), origin.end(), o));
}

std::size_t Dataset::factor_index(std::string_view name) const {
  for (std::size_t i = 0; i < factors.size(); ++i)
    if (factors[i].name == name) return i;
  throw InvalidArgument("dataset has no factor column '" + std::string(name) + "'");
}

CASample Dataset::sample(std::size_t i) const {
  if (i >= size()) throw InvalidArgument("sample index out of range");
  CASample s;
  s.input = inputs.row(i);
  s.origin = origin[i];
  std::vector<double> salient;
  for (std::size_t f = 0; f < factors.size(); ++f) {
    if (factors[f].scope == FactorScope::common)
      s.common_factors.push_back(factor_values(i, f));
    else
      salient.push_back(factor_values(i, f));
  }
  if (s.origin == Origin::target) {
    s.salient_factors = std::move(salient);
    if (has_attributes()) {
      const auto r = attributes.row(i);
      s.attributes = std::vector<double>(r.begin(), r.end());
    }
  }
  return s;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.kind = kind;
  out.seed = seed;
  out.image = image;
  out.factors = factors;
  out.attribute_names = attribute_names;
  out.inputs = inputs.gather_rows(rows);
  out.factor_values = factor_values.gather_rows(rows);
  if (has_attributes()) out.attributes = attributes.gather_rows(rows);
  for (auto r : rows) out.origin.push_back(origin.at(r));
  return out;
}

// ---------------------------------------------------------------- vector-ca

namespace {

struct VectorMap {
  Matrix w1;  // (2 * latent, hidden)
  std::vector<double> b1;
  Matrix w2;  // (hidden, input)
};

VectorMap make_vector_map(const VectorCaOptions& o) {
  Rng rng({o.seed, 0x4D4150ULL});
  const std::size_t in = 2 * o.latent_dim;
  VectorMap m{Matrix(in, o.hidden_dim), std::vector<double>(o.hidden_dim), Matrix(o.hidden_dim, o.input_dim)};
  // Weights scaled so pre-activations stay mostly in tanh's linear range
  // for latents of magnitude ~3.
  for (auto& w : m.w1.values()) w = rng.normal(0.0, 0.5 / std::sqrt(static_cast<double>(in)));
  for (auto& b : m.b1) b = rng.normal(0.0, 0.1);
  for (auto& w : m.w2.values()) w = rng.normal(0.0, 1.0 / std::sqrt(static_cast<double>(o.hidden_dim)));
  return m;
}

std::vector<double> apply_vector_map(const VectorMap& m, std::span<const double> latent) {
  std::vector<double> h(m.b1);
  for (std::size_t i = 0; i < latent.size(); ++i)
    for (std::size_t j = 0; j < h.size(); ++j) h[j] += latent[i] * m.w1(i, j);
  for (auto& v : h) v = std::tanh(v);
  std::vector<double> x(m.w2.cols(), 0.0);
  for (std::size_t j = 0; j < h.size(); ++j)
    for (std::size_t c = 0; c < x.size(); ++c) x[c] += h[j] * m.w2(j, c);
  return x;
}

}  // namespace

std::vector<double> vector_ca_map(const VectorCaOptions& opts, std::span<const double> latent) {
  if (latent.size() != 2 * opts.latent_dim) throw InvalidArgument("vector_ca_map: latent must be [z_c, z_s]");
  return apply_vector_map(make_vector_map(opts), latent);
}

Dataset gen_vector_ca(const VectorCaOptions& o, Matrix* latents) {
  if (o.n_background == 0 || o.n_target == 0) throw InvalidArgument("gen_vector_ca: counts must be positive");
  if (o.common_clusters == 0 || o.salient_clusters == 0) throw InvalidArgument("gen_vector_ca: need >= 1 cluster");
  const std::size_t n = o.n_background + o.n_target;
  Dataset ds = empty_dataset(DatasetKind::vector_ca, o.seed, n, o.input_dim,
                             {{"common_cluster", FactorKind::categorical, FactorScope::common, o.common_clusters},
                              {"salient_cluster", FactorKind::categorical, FactorScope::salient, o.salient_clusters}});
  const VectorMap map = make_vector_map(o);
  Rng rng({o.seed, 0xC1U});
  // Centers are redrawn until every pair is at least 4 apart (about 13
  // within-cluster standard deviations).
  const auto centers = [&](std::size_t k) {
    Matrix c(k, o.latent_dim);
    for (std::size_t i = 0; i < k; ++i) {
      for (int attempt = 0; attempt < 1000; ++attempt) {
        for (auto& v : c.row(i)) v = rng.normal(0.0, 3.0);
        bool apart = true;
        for (std::size_t j = 0; j < i && apart; ++j) {
          double d2 = 0.0;
          for (std::size_t d = 0; d < o.latent_dim; ++d) d2 += (c(i, d) - c(j, d)) * (c(i, d) - c(j, d));
          apart = d2 >= 16.0;
        }
        if (apart) break;
      }
    }
    return c;
  };
  const Matrix common_centers = centers(o.common_clusters);
  const Matrix salient_centers = centers(o.salient_clusters);
  const auto common_labels = balanced_labels(n, o.common_clusters, rng);
  const auto salient_labels = balanced_labels(o.n_target, o.salient_clusters, rng);
  std::vector<double> latent(2 * o.latent_dim);
  if (latents != nullptr) *latents = Matrix(n, 2 * o.latent_dim);
  for (std::size_t i = 0; i < n; ++i) {
    const bool target = i >= o.n_background;
    ds.origin[i] = target ? Origin::target : Origin::background;
    const std::size_t kc = common_labels[i];
    for (std::size_t d = 0; d < o.latent_dim; ++d) latent[d] = common_centers(kc, d) + rng.normal(0.0, 0.3);
    ds.factor_values(i, 0) = static_cast<double>(kc);
    if (target) {
      const std::size_t ks = salient_labels[i - o.n_background];
      for (std::size_t d = 0; d < o.latent_dim; ++d)
        latent[o.latent_dim + d] = salient_centers(ks, d) + rng.normal(0.0, 0.3);
      ds.factor_values(i, 1) = static_cast<double>(ks);
    } else {
      std::fill(latent.begin() + static_cast<std::ptrdiff_t>(o.latent_dim), latent.end(), 0.0);
    }
    if (latents != nullptr) std::copy(latent.begin(), latent.end(), latents->row(i).begin());
    const auto x = apply_vector_map(map, latent);
    auto row = ds.inputs.row(i);
    for (std::size_t c = 0; c < x.size(); ++c) row[c] = x[c] + (o.noise_std > 0 ? rng.normal(0.0, o.noise_std) : 0.0);
  }
  return ds;
}

// ----------------------------------------------------------- colored shapes

std::span<const std::array<double, 3>> hue_palette() {
  static const std::array<std::array<double, 3>, kHueClasses> palette{{
      {1.0, 0.0, 0.0},
      {0.0, 1.0, 0.0},
      {0.0, 0.0, 1.0},
      {1.0, 1.0, 0.0},
  }};
  return palette;
}

namespace {

constexpr int kSuper = 4;  // supersamples per pixel axis

template <typename Inside>
void paint(std::span<double> image, const ImageShape& shape, const std::array<double, 3>& color, Inside inside) {
  for (std::size_t py = 0; py < shape.height; ++py) {
    for (std::size_t px = 0; px < shape.width; ++px) {
      int hits = 0;
      for (int sy = 0; sy < kSuper; ++sy)
        for (int sx = 0; sx < kSuper; ++sx) {
          const double x = static_cast<double>(px) + (sx + 0.5) / kSuper;
          const double y = static_cast<double>(py) + (sy + 0.5) / kSuper;
          hits += inside(x, y) ? 1 : 0;
        }
      if (hits == 0) continue;
      const double cov = static_cast<double>(hits) / (kSuper * kSuper);
      double* pix = image.data() + (py * shape.width + px) * shape.channels;
      for (std::size_t c = 0; c < shape.channels; ++c) pix[c] = pix[c] * (1.0 - cov) + cov * color[c % 3];
    }
  }
}

// r is the radius of the disc with the same area, so every class covers
// the same number of pixels at a given size.
bool inside_basic_shape(std::size_t cls, double dx, double dy, double r) {
  switch (cls) {
    case 0: {  // square
      const double h = r * std::sqrt(std::numbers::pi) / 2.0;
      return std::abs(dx) <= h && std::abs(dy) <= h;
    }
    case 1:  // disc
      return dx * dx + dy * dy <= r * r;
    default: {  // isosceles triangle, apex up
      const double h = r * std::sqrt(std::numbers::pi / 2.0);
      return dy >= -h && dy <= h && std::abs(dx) <= (dy + h) / 2.0;
    }
  }
}

}  // namespace

Dataset gen_colored_shapes(const ColoredShapesOptions& o) {
  if (o.n_background == 0 || o.n_target == 0) throw InvalidArgument("gen_colored_shapes: counts must be positive");
  if (o.image_size < 8) throw InvalidArgument("gen_colored_shapes: image must be at least 8x8");
  if (!(o.size_lo > 0 && o.size_lo <= o.size_hi && o.position_jitter >= 0 && o.gray_lo >= 0 &&
        o.gray_lo <= o.gray_hi && o.gray_hi <= 1 && o.saturation >= 0 && o.saturation <= 1)) {
    throw InvalidArgument("gen_colored_shapes: bad jitter, size, gray or saturation range");
  }
  const ImageShape shape{o.image_size, o.image_size, 3};
  const std::size_t n = o.n_background + o.n_target;
  Dataset ds = empty_dataset(DatasetKind::colored_shapes, o.seed, n, shape.size(),
                             {{"shape", FactorKind::categorical, FactorScope::common, kShapeClasses},
                              {"hue", FactorKind::categorical, FactorScope::salient, kHueClasses}});
  ds.image = shape;
  Rng rng({o.seed, 0xC5ULL});
  const auto bg_shapes = balanced_labels(o.n_background, kShapeClasses, rng);
  // Targets cycle through every (shape, hue) pair so both marginals and
  // the joint are balanced.
  const auto tg_cells = balanced_labels(o.n_target, kShapeClasses * kHueClasses, rng);
  const double scale = static_cast<double>(o.image_size) / 16.0;
  const double mid = static_cast<double>(o.image_size) / 2.0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool target = i >= o.n_background;
    std::size_t cls;
    std::array<double, 3> color;
    const double gray = rng.uniform(o.gray_lo, o.gray_hi);
    if (target) {
      const std::size_t cell = tg_cells[i - o.n_background];
      cls = cell % kShapeClasses;
      const std::size_t hue = cell / kShapeClasses;
      const auto& h = hue_palette()[hue];
      for (std::size_t c = 0; c < 3; ++c) color[c] = gray * (1.0 - o.saturation + o.saturation * h[c]);
      ds.factor_values(i, 1) = static_cast<double>(hue);
    } else {
      cls = bg_shapes[i];
      color = {gray, gray, gray};
    }
    ds.origin[i] = target ? Origin::target : Origin::background;
    ds.factor_values(i, 0) = static_cast<double>(cls);
    const double cx = mid + rng.uniform(-o.position_jitter, o.position_jitter) * scale;
    const double cy = mid + rng.uniform(-o.position_jitter, o.position_jitter) * scale;
    const double r = rng.uniform(o.size_lo, o.size_hi) * scale;
    paint(ds.inputs.row(i), shape, color,
          [&](double x, double y) { return inside_basic_shape(cls, x - cx, y - cy, r); });
  }
  return ds;
}

Dataset gen_colored_shapes(std::size_t n_background, std::size_t n_target, std::uint64_t seed,
                           std::size_t image_size) {
  ColoredShapesOptions o;
  o.n_background = n_background;
  o.n_target = n_target;
  o.seed = seed;
  o.image_size = image_size;
  return gen_colored_shapes(o);
}

// ------------------------------------------------------------ attr sprites

double sprite_center_px(double unit, std::size_t image_size) {
  // Keeps a fully rotated sprite at maximum zoom inside the frame.
  const double s = static_cast<double>(image_size);
  return (5.0 + 5.5 * unit) * s / 16.0;
}

double sprite_half_extent_px(double zoom, std::size_t image_size) {
  return 3.5 * zoom * static_cast<double>(image_size) / 16.0;
}

void render_texture(std::span<double> image, const ImageShape& shape, std::size_t texture, std::size_t phase_x,
                    std::size_t phase_y, double intensity) {
  constexpr std::size_t period = 4;
  for (std::size_t y = 0; y < shape.height; ++y) {
    for (std::size_t x = 0; x < shape.width; ++x) {
      const std::size_t u = (x + phase_x) % period;
      const std::size_t v = (y + phase_y) % period;
      bool on = false;
      switch (texture) {
        case 0:
          on = v < 2;
          break;
        case 1:
          on = u < 2;
          break;
        case 2:
          on = (u < 2) != (v < 2);
          break;
        default:
          on = u == 1 && v == 1;
          break;
      }
      double* pix = image.data() + (y * shape.width + x) * shape.channels;
      for (std::size_t c = 0; c < shape.channels; ++c) pix[c] = on ? intensity : 0.0;
    }
  }
}

void render_sprite(std::span<double> image, const ImageShape& shape, const SpriteAttributes& a) {
  const double cx = sprite_center_px(a.x, shape.width);
  const double cy = sprite_center_px(a.y, shape.height);
  const double r = sprite_half_extent_px(a.zoom, shape.width);
  const double th = a.rotation * std::numbers::pi / 180.0;
  const double c = std::cos(th), s = std::sin(th);
  const auto cls = static_cast<int>(std::lround(a.shape));
  paint(image, shape, {1.0, 1.0, 1.0}, [&](double x, double y) {
    // Rotate the sample point into the sprite frame.
    const double dx = x - cx, dy = y - cy;
    const double u = (c * dx + s * dy) / r;
    const double v = (-s * dx + c * dy) / r;
    switch (cls) {
      case 0:
        return std::abs(u) <= 1.0 && std::abs(v) <= 1.0;
      case 1:
        return u * u + (v * v) / 0.36 <= 1.0;  // 1 : 0.6 ellipse
      default: {
        // Implicit heart, flipped so the point is at the bottom and scaled
        // to a [-1, 1] box around the center.
        const double hx = u * 0.9 / 0.75;
        const double hy = -v * 1.1 / 0.75 + 0.1;
        const double q = hx * hx + hy * hy - 1.0;
        return q * q * q - hx * hx * hy * hy * hy <= 0.0;
      }
    }
  });
}

Dataset gen_attr_sprites(std::size_t n_background, std::size_t n_target, std::uint64_t seed,
                         std::size_t image_size) {
  if (n_background == 0 || n_target == 0) throw InvalidArgument("gen_attr_sprites: counts must be positive");
  if (image_size < 8) throw InvalidArgument("gen_attr_sprites: image must be at least 8x8");
  const ImageShape shape{image_size, image_size, 3};
  const std::size_t n = n_background + n_target;
  Dataset ds = empty_dataset(DatasetKind::attr_sprites, seed, n, shape.size(),
                             {{"texture", FactorKind::categorical, FactorScope::common, kTextureClasses},
                              {"sprite_shape", FactorKind::categorical, FactorScope::salient, kSpriteShapes},
                              {"zoom", FactorKind::continuous, FactorScope::salient, 0},
                              {"rotation", FactorKind::continuous, FactorScope::salient, 0},
                              {"pos_x", FactorKind::continuous, FactorScope::salient, 0},
                              {"pos_y", FactorKind::continuous, FactorScope::salient, 0}});
  ds.image = shape;
  ds.attribute_names = {"shape", "zoom", "rotation", "x", "y"};
  ds.attributes = Matrix(n, 5, kNaN);
  Rng rng({seed, 0xA5ULL});
  const auto textures = balanced_labels(n, kTextureClasses, rng);
  const auto shapes = balanced_labels(n_target, kSpriteShapes, rng);
  for (std::size_t i = 0; i < n; ++i) {
    const bool target = i >= n_background;
    ds.origin[i] = target ? Origin::target : Origin::background;
    ds.factor_values(i, 0) = static_cast<double>(textures[i]);
    const auto px = static_cast<std::size_t>(rng.below(4));
    const auto py = static_cast<std::size_t>(rng.below(4));
    const double intensity = rng.uniform(0.2, 0.4);
    auto row = ds.inputs.row(i);
    render_texture(row, shape, textures[i], px, py, intensity);
    if (!target) continue;
    SpriteAttributes a;
    a.shape = static_cast<double>(shapes[i - n_background]);
    a.zoom = rng.uniform(0.5, 1.0);
    a.rotation = rng.uniform(-45.0, 45.0);
    a.x = rng.uniform();
    a.y = rng.uniform();
    render_sprite(row, shape, a);
    const double vals[] = {a.shape, a.zoom, a.rotation, a.x, a.y};
    for (std::size_t k = 0; k < 5; ++k) {
      ds.attributes(i, k) = vals[k];
      ds.factor_values(i, k + 1) = vals[k];
    }
  }
  return ds;
}

// ------------------------------------------------------------ augmentation

AugmentationSpec AugmentationSpec::defaults_for(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::vector_ca:
      return {0, 0.0, 1.0, 1.0, 0.05};
    case DatasetKind::colored_shapes:
      // No hue jitter: hue is the salient factor.
      return {2, 0.5, 0.8, 1.2, 0.05};
    case DatasetKind::attr_sprites:
      // Position and orientation are attributes: no shifts, no flips.
      return {0, 0.0, 0.8, 1.2, 0.05};
  }
  return {};
}

bool AugmentationSpec::is_identity() const {
  return max_shift == 0 && flip_prob == 0.0 && brightness_lo == 1.0 && brightness_hi == 1.0 && noise_std == 0.0;
}

void AugmentationSpec::validate(const std::optional<ImageShape>& image) const {
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw InvalidArgument("augmentation: flip_prob must be in [0, 1]");
  if (!(noise_std >= 0.0)) throw InvalidArgument("augmentation: noise_std must be >= 0");
  if (!(brightness_lo > 0.0 && brightness_lo <= brightness_hi)) {
    throw InvalidArgument("augmentation: brightness range must satisfy 0 < lo <= hi");
  }
  if (!image) {
    if (max_shift > 0 || flip_prob > 0.0) {
      throw InvalidArgument("augmentation: translate/flip need image inputs");
    }
    return;
  }
  if (2 * max_shift >= std::min(image->height, image->width)) {
    throw InvalidArgument("augmentation: max_shift " + std::to_string(max_shift) + " exceeds half the image (" +
                          std::to_string(image->height) + "x" + std::to_string(image->width) + ")");
  }
}

void make_view_into(std::span<const double> input, const std::optional<ImageShape>& image,
                    const AugmentationSpec& spec, std::uint64_t seed, std::uint64_t sample_id,
                    std::uint64_t view_index, std::span<double> out) {
  if (out.size() != input.size()) throw ShapeError("make_view", "output size differs from input size");
  Rng rng({seed, sample_id, view_index});
  if (image && (spec.max_shift > 0 || spec.flip_prob > 0.0)) {
    const auto& sh = *image;
    if (sh.size() != input.size()) throw ShapeError("make_view", "image shape does not match input length");
    const auto shift = [&]() {
      return static_cast<long>(rng.below(2 * spec.max_shift + 1)) - static_cast<long>(spec.max_shift);
    };
    const long dx = spec.max_shift > 0 ? shift() : 0;
    const long dy = spec.max_shift > 0 ? shift() : 0;
    const bool flip = spec.flip_prob > 0.0 && rng.bernoulli(spec.flip_prob);
    const long h = static_cast<long>(sh.height), w = static_cast<long>(sh.width);
    for (long y = 0; y < h; ++y) {
      for (long x = 0; x < w; ++x) {
        long sx = x - dx;
        const long sy = y - dy;
        if (flip) sx = w - 1 - sx;
        double* dst = out.data() + (y * w + x) * static_cast<long>(sh.channels);
        if (sx < 0 || sx >= w || sy < 0 || sy >= h) {
          std::fill_n(dst, sh.channels, 0.0);
        } else {
          std::copy_n(input.data() + (sy * w + sx) * static_cast<long>(sh.channels), sh.channels, dst);
        }
      }
    }
  } else {
    std::copy(input.begin(), input.end(), out.begin());
  }
  if (spec.brightness_lo != 1.0 || spec.brightness_hi != 1.0) {
    const double b = rng.uniform(spec.brightness_lo, spec.brightness_hi);
    for (auto& v : out) v *= b;
  }
  if (spec.noise_std > 0.0) {
    for (auto& v : out) v += rng.normal(0.0, spec.noise_std);
  }
}

std::vector<std::vector<double>> make_views(std::span<const double> input, const std::optional<ImageShape>& image,
                                            const AugmentationSpec& spec, std::size_t k, std::uint64_t seed,
                                            std::uint64_t sample_id) {
  if (k == 0) throw InvalidArgument("make_views: k must be >= 1");
  spec.validate(image);
  std::vector<std::vector<double>> views(k, std::vector<double>(input.size()));
  for (std::size_t v = 0; v < k; ++v) make_view_into(input, image, spec, seed, sample_id, v, views[v]);
  return views;
}

}  // namespace sepclr::data
