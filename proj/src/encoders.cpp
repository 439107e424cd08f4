#include "sepclr/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "sepclr/binary_io.hpp"
#include "sepclr/error.hpp"
#include "sepclr/random.hpp"

namespace sepclr::encoders {

namespace d = sepclr::diff;

void MlpSpec::validate() const {
  if (layer_widths.size() < 2) throw InvalidArgument("MlpSpec: needs an input width and at least one layer");
  for (auto w : layer_widths)
    if (w == 0) throw InvalidArgument("MlpSpec: layer widths must be positive");
  if (!head_widths.empty() && head_widths.size() != 2) {
    throw InvalidArgument("MlpSpec: head_widths must be empty or {hidden, output}");
  }
  for (auto w : head_widths)
    if (w == 0) throw InvalidArgument("MlpSpec: head widths must be positive");
}

namespace {

Linear glorot_linear(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  Linear l{Matrix(fan_in, fan_out), std::vector<double>(fan_out, 0.0)};
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& w : l.weight.values()) w = rng.uniform(-bound, bound);
  return l;
}

DiffArray affine(d::Tape& tape, const DiffArray& x, const Linear& l, bool track, std::vector<DiffArray>& params) {
  const auto w = tape.leaf(l.weight, track);
  const auto b = tape.leaf({l.bias.size()}, l.bias, track);
  params.push_back(w);
  params.push_back(b);
  return d::add(d::matmul(x, w), b);
}

DiffArray activate(const DiffArray& x, Activation a) { return a == Activation::tanh ? d::tanh(x) : d::relu(x); }

}  // namespace

Mlp::Mlp(MlpSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  Rng rng(spec_.init_seed);
  for (std::size_t i = 0; i + 1 < spec_.layer_widths.size(); ++i)
    trunk_.push_back(glorot_linear(spec_.layer_widths[i], spec_.layer_widths[i + 1], rng));
  if (has_head()) {
    head_in_ = glorot_linear(spec_.representation_dim(), spec_.head_widths[0], rng);
    head_out_ = glorot_linear(spec_.head_widths[0], spec_.head_widths[1], rng);
    running_.mean.assign(spec_.head_widths[0], 0.0);
    running_.var.assign(spec_.head_widths[0], 1.0);
  }
}

std::vector<std::span<double>> Mlp::parameters() {
  std::vector<std::span<double>> out;
  for (auto& l : trunk_) {
    out.emplace_back(l.weight.values());
    out.emplace_back(l.bias);
  }
  if (has_head()) {
    out.emplace_back(head_in_.weight.values());
    out.emplace_back(head_in_.bias);
    out.emplace_back(head_out_.weight.values());
    out.emplace_back(head_out_.bias);
  }
  return out;
}

std::vector<std::span<const double>> Mlp::parameters() const {
  std::vector<std::span<const double>> out;
  for (auto s : const_cast<Mlp*>(this)->parameters()) out.emplace_back(s);
  return out;
}

EncoderOutput Mlp::forward(d::Tape& tape, const DiffArray& input, Phase phase, bool track_params) const {
  if (input.rank() != 2 || input.cols() != spec_.input_dim()) {
    throw ShapeError("encoder forward", "input shape " + format_shape(input.shape()) + ", expected (N, " +
                                            std::to_string(spec_.input_dim()) + ")");
  }
  EncoderOutput out;
  DiffArray x = input;
  for (std::size_t i = 0; i < trunk_.size(); ++i) {
    x = affine(tape, x, trunk_[i], track_params, out.params);
    if (i + 1 < trunk_.size()) x = activate(x, spec_.activation);
  }
  out.representation = x;
  if (has_head()) {
    x = affine(tape, x, head_in_, track_params, out.params);
    if (phase == Phase::train) {
      x = d::batch_standardize(x, kStandardizeEps, &out.head_stats);
    } else {
      const std::size_t h = running_.mean.size();
      std::vector<double> inv_std(h);
      for (std::size_t j = 0; j < h; ++j) inv_std[j] = 1.0 / std::sqrt(running_.var[j] + kStandardizeEps);
      x = d::mul(d::sub(x, tape.leaf({h}, running_.mean)), tape.leaf({h}, std::move(inv_std)));
    }
    x = d::relu(x);
    x = affine(tape, x, head_out_, track_params, out.params);
  }
  if (spec_.output_norm == OutputNorm::unit_sphere) x = d::normalize_rows(x);
  out.projection = x;
  return out;
}

void Mlp::update_running_stats(const d::ColumnStats& batch) {
  if (!has_head()) return;
  if (batch.mean.size() != running_.mean.size()) throw ShapeError("update_running_stats", "statistics width mismatch");
  for (std::size_t j = 0; j < running_.mean.size(); ++j) {
    running_.mean[j] = kRunningMomentum * running_.mean[j] + (1.0 - kRunningMomentum) * batch.mean[j];
    running_.var[j] = kRunningMomentum * running_.var[j] + (1.0 - kRunningMomentum) * batch.var[j];
  }
}

bool operator==(const Linear& a, const Linear& b) { return a.weight == b.weight && a.bias == b.bias; }
bool operator==(const RunningStats& a, const RunningStats& b) { return a.mean == b.mean && a.var == b.var; }

bool operator==(const Mlp& a, const Mlp& b) {
  return a.spec_ == b.spec_ && a.trunk_ == b.trunk_ && a.head_in_ == b.head_in_ && a.head_out_ == b.head_out_ &&
         a.running_ == b.running_;
}

EncoderPair make_encoder_pair(const PairSpecOptions& opts) {
  std::vector<std::size_t> widths{opts.input_dim};
  widths.insert(widths.end(), opts.trunk_hidden.begin(), opts.trunk_hidden.end());
  widths.push_back(opts.representation_dim);
  MlpSpec common{widths, {opts.head_hidden, opts.common_dim}, opts.activation, OutputNorm::unit_sphere,
                 mix_seed({opts.seed, 0xC0})};
  MlpSpec salient{widths, {opts.head_hidden, opts.salient_dim}, opts.activation, OutputNorm::none,
                  mix_seed({opts.seed, 0x5A})};
  return EncoderPair{Mlp(std::move(common)), Mlp(std::move(salient))};
}

PairOutput forward(const EncoderPair& pair, d::Tape& tape, const DiffArray& views, Phase phase,
                   bool track_params) {
  return {pair.common.forward(tape, views, phase, track_params),
          pair.salient.forward(tape, views, phase, track_params)};
}

Representations encode(const EncoderPair& pair, const Matrix& inputs, std::size_t chunk) {
  const std::size_t n = inputs.rows();
  Representations r{Matrix(n, pair.common.spec().representation_dim()),
                    Matrix(n, pair.common.spec().output_dim()),
                    Matrix(n, pair.salient.spec().representation_dim()),
                    Matrix(n, pair.salient.spec().output_dim())};
  const auto copy_rows = [](const DiffArray& src, Matrix& dst, std::size_t row0) {
    const auto v = src.values();
    std::copy(v.begin(), v.end(), dst.data() + row0 * dst.cols());
  };
  for (std::size_t r0 = 0; r0 < n; r0 += chunk) {
    const std::size_t rows = std::min(chunk, n - r0);
    d::Tape tape;
    std::vector<double> block(inputs.data() + r0 * inputs.cols(), inputs.data() + (r0 + rows) * inputs.cols());
    const auto x = tape.leaf({rows, inputs.cols()}, std::move(block));
    const auto out = forward(pair, tape, x, Phase::eval, false);
    copy_rows(out.common.representation, r.common_repr, r0);
    copy_rows(out.common.projection, r.common_proj, r0);
    copy_rows(out.salient.representation, r.salient_repr, r0);
    copy_rows(out.salient.projection, r.salient_proj, r0);
  }
  return r;
}

namespace {

void write_spec(std::ostream& os, const MlpSpec& s) {
  binio::write<std::uint32_t>(os, static_cast<std::uint32_t>(s.layer_widths.size()));
  for (auto w : s.layer_widths) binio::write<std::uint64_t>(os, w);
  binio::write<std::uint32_t>(os, static_cast<std::uint32_t>(s.head_widths.size()));
  for (auto w : s.head_widths) binio::write<std::uint64_t>(os, w);
  binio::write<std::uint8_t>(os, static_cast<std::uint8_t>(s.activation));
  binio::write<std::uint8_t>(os, static_cast<std::uint8_t>(s.output_norm));
  binio::write<std::uint64_t>(os, s.init_seed);
}

MlpSpec read_spec(std::istream& is) {
  MlpSpec s;
  const auto n = binio::read<std::uint32_t>(is);
  if (n > 64) throw Error("checkpoint: implausible layer count");
  for (std::uint32_t i = 0; i < n; ++i) s.layer_widths.push_back(binio::read<std::uint64_t>(is));
  const auto h = binio::read<std::uint32_t>(is);
  if (h > 2) throw Error("checkpoint: implausible head width count");
  for (std::uint32_t i = 0; i < h; ++i) s.head_widths.push_back(binio::read<std::uint64_t>(is));
  const auto act = binio::read<std::uint8_t>(is);
  const auto norm = binio::read<std::uint8_t>(is);
  if (act > 1 || norm > 1) throw Error("checkpoint: unknown activation or output norm");
  s.activation = static_cast<Activation>(act);
  s.output_norm = static_cast<OutputNorm>(norm);
  s.init_seed = binio::read<std::uint64_t>(is);
  return s;
}

void write_linear(std::ostream& os, const Linear& l) {
  binio::write_f64s(os, l.weight.values());
  binio::write_f64s(os, l.bias);
}

void read_linear(std::istream& is, Linear& l) {
  binio::read_f64s(is, l.weight.values());
  binio::read_f64s(is, l.bias);
}

void write_mlp(std::ostream& os, const Mlp& m) {
  write_spec(os, m.spec());
  for (const auto& l : m.trunk()) write_linear(os, l);
  if (m.has_head()) {
    write_linear(os, m.head_in());
    binio::write_f64s(os, m.running().mean);
    binio::write_f64s(os, m.running().var);
    write_linear(os, m.head_out());
  }
}

Mlp read_mlp(std::istream& is) {
  Mlp m(read_spec(is));
  for (auto& l : m.trunk()) read_linear(is, l);
  if (m.has_head()) {
    read_linear(is, m.head_in());
    binio::read_f64s(is, m.running().mean);
    binio::read_f64s(is, m.running().var);
    read_linear(is, m.head_out());
  }
  return m;
}

}  // namespace

void save_checkpoint(const EncoderPair& pair, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open checkpoint for writing: " + path.string());
  os.write(kCheckpointMagic.data(), static_cast<std::streamsize>(kCheckpointMagic.size()));
  binio::write<std::uint32_t>(os, kCheckpointVersion);
  binio::write<std::uint32_t>(os, 2);
  write_mlp(os, pair.common);
  write_mlp(os, pair.salient);
  if (!os) throw Error("failed writing checkpoint: " + path.string());
}

EncoderPair load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint: " + path.string());
  std::string magic(kCheckpointMagic.size(), '\0');
  is.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (!is || magic != kCheckpointMagic) throw Error("not a checkpoint file: " + path.string());
  const auto version = binio::read<std::uint32_t>(is);
  if (version != kCheckpointVersion) throw Error("unsupported checkpoint version " + std::to_string(version));
  if (binio::read<std::uint32_t>(is) != 2) throw Error("checkpoint must hold exactly two encoders");
  Mlp common = read_mlp(is);
  Mlp salient = read_mlp(is);
  if (is.peek() != std::char_traits<char>::eof()) throw Error("trailing bytes in checkpoint: " + path.string());
  return EncoderPair{std::move(common), std::move(salient)};
}

}  // namespace sepclr::encoders
