#include "sepclr/cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "sepclr/datagen.hpp"
#include "sepclr/error.hpp"
#include "sepclr/probes.hpp"
#include "sepclr/verify/suites.hpp"

#ifndef SEPCLR_GIT_DESCRIBE
#define SEPCLR_GIT_DESCRIBE "unknown"
#endif

namespace sepclr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

data::AugmentationSpec AugmentationOverrides::apply(data::AugmentationSpec base) const {
  if (max_shift) base.max_shift = *max_shift;
  if (flip_prob) base.flip_prob = *flip_prob;
  if (brightness_lo) base.brightness_lo = *brightness_lo;
  if (brightness_hi) base.brightness_hi = *brightness_hi;
  if (noise_std) base.noise_std = *noise_std;
  return base;
}

encoders::PairSpecOptions RunConfig::pair_options(const data::Dataset& ds) const {
  encoders::PairSpecOptions o;
  o.input_dim = ds.input_dim();
  o.representation_dim = representation_dim;
  o.common_dim = common_dim;
  o.salient_dim = resolved(ds).salient_dim;
  o.seed = train.seed;
  return o;
}

RunConfig RunConfig::resolved(const data::Dataset& ds) const {
  RunConfig r = *this;
  if (r.salient_dim == 0) {
    r.salient_dim = train.mode == losses::ObjectiveMode::attribute_supervised ? ds.attribute_names.size() : 32;
  }
  const auto aug = augmentation.apply(data::AugmentationSpec::defaults_for(ds.kind));
  r.augmentation = {aug.max_shift, aug.flip_prob, aug.brightness_lo, aug.brightness_hi, aug.noise_std};
  return r;
}

train::TrainConfig RunConfig::train_config(const data::Dataset& ds) const {
  train::TrainConfig t = train;
  t.augmentation = augmentation.apply(data::AugmentationSpec::defaults_for(ds.kind));
  t.augmentation->validate(ds.image);
  return t;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& v, const std::string& where) {
  std::istringstream is(v);
  T out{};
  if constexpr (std::is_unsigned_v<T>) {
    if (!v.empty() && v[0] == '-') throw ConfigError(where + ": expected a non-negative integer, got '" + v + "'");
  }
  is >> out;
  if (is.fail() || !is.eof()) throw ConfigError(where + ": cannot parse '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(where + ": expected true|false, got '" + v + "'");
}

std::string fmt_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

RunConfig parse_config(std::string_view text, const std::string& source) {
  RunConfig c;
  auto& w = c.train.weights;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string val = trim(std::string_view(body).substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError(where + ": duplicate key '" + key + "'");
    const auto num = [&] { return parse_number<double>(val, where); };
    const auto count = [&] { return parse_number<std::size_t>(val, where); };
    if (key == "epochs") c.train.epochs = count();
    else if (key == "batch_size") c.train.batch_size = count();
    else if (key == "learning_rate") c.train.learning_rate = num();
    else if (key == "seed") { c.train.seed = parse_number<std::uint64_t>(val, where); c.seed_set = true; }
    else if (key == "eval_every") c.train.eval_every = count();
    else if (key == "mode") c.train.mode = losses::parse_objective_mode(val);
    else if (key == "independence") w.independence_mode = losses::parse_independence_mode(val);
    else if (key == "lambda_c") w.lambda_c = num();
    else if (key == "lambda_s") w.lambda_s = num();
    else if (key == "beta") w.beta = num();
    else if (key == "lambda_ind") { w.lambda_ind = num(); c.lambda_ind_set = true; }
    else if (key == "tau") w.tau = num();
    else if (key == "sigma_attr") w.sigma_attr = num();
    else if (key == "salient_infomax") w.salient_infomax_in_attribute_mode = parse_bool(val, where);
    else if (key == "common_dim") c.common_dim = count();
    else if (key == "salient_dim") c.salient_dim = count();
    else if (key == "representation_dim") c.representation_dim = count();
    else if (key == "aug_max_shift") c.augmentation.max_shift = count();
    else if (key == "aug_flip_prob") c.augmentation.flip_prob = num();
    else if (key == "aug_brightness_lo") c.augmentation.brightness_lo = num();
    else if (key == "aug_brightness_hi") c.augmentation.brightness_hi = num();
    else if (key == "aug_noise_std") c.augmentation.noise_std = num();
    else throw ConfigError(where + ": unknown key '" + key + "'");
  }
  if (!c.lambda_ind_set) w.lambda_ind = losses::LossWeights::default_lambda_ind(w.independence_mode);
  if (c.common_dim == 0 || c.representation_dim == 0) throw ConfigError(source + ": dimensions must be >= 1");
  c.train.validate();
  return c;
}

RunConfig read_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string to_text(const RunConfig& c) {
  const auto& w = c.train.weights;
  std::ostringstream os;
  os << "epochs = " << c.train.epochs << "\n"
     << "batch_size = " << c.train.batch_size << "\n"
     << "learning_rate = " << fmt_double(c.train.learning_rate) << "\n"
     << "seed = " << c.train.seed << "\n"
     << "eval_every = " << c.train.eval_every << "\n"
     << "mode = " << losses::to_string(c.train.mode) << "\n"
     << "independence = " << losses::to_string(w.independence_mode) << "\n"
     << "lambda_c = " << fmt_double(w.lambda_c) << "\n"
     << "lambda_s = " << fmt_double(w.lambda_s) << "\n"
     << "beta = " << fmt_double(w.beta) << "\n"
     << "lambda_ind = " << fmt_double(w.lambda_ind) << "\n"
     << "tau = " << fmt_double(w.tau) << "\n"
     << "sigma_attr = " << fmt_double(w.sigma_attr) << "\n"
     << "salient_infomax = " << (w.salient_infomax_in_attribute_mode ? "true" : "false") << "\n"
     << "common_dim = " << c.common_dim << "\n"
     << "salient_dim = " << c.salient_dim << "\n"
     << "representation_dim = " << c.representation_dim << "\n";
  const auto& a = c.augmentation;
  if (a.max_shift) os << "aug_max_shift = " << *a.max_shift << "\n";
  if (a.flip_prob) os << "aug_flip_prob = " << fmt_double(*a.flip_prob) << "\n";
  if (a.brightness_lo) os << "aug_brightness_lo = " << fmt_double(*a.brightness_lo) << "\n";
  if (a.brightness_hi) os << "aug_brightness_hi = " << fmt_double(*a.brightness_hi) << "\n";
  if (a.noise_std) os << "aug_noise_std = " << fmt_double(*a.noise_std) << "\n";
  return os.str();
}

std::uint64_t env_seed(std::uint64_t fallback) {
  const char* v = std::getenv("SEPCLR_SEED");
  if (v == nullptr || *v == '\0') return fallback;
  return parse_number<std::uint64_t>(v, "SEPCLR_SEED");
}

std::uint64_t checksum_files(const std::vector<fs::path>& files) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::vector<char> buf(1 << 16);
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    if (!in) throw Error("cannot read " + f.string());
    while (in) {
      in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
      for (std::streamsize i = 0; i < in.gcount(); ++i) {
        h ^= static_cast<unsigned char>(buf[static_cast<std::size_t>(i)]);
        h *= 0x100000001b3ULL;
      }
    }
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::string version_string() {
  if (const char* v = std::getenv("SEPCLR_GIT_DESCRIBE"); v != nullptr && *v != '\0') return v;
  return SEPCLR_GIT_DESCRIBE;
}

json RunManifest::to_json() const {
  return {{"config", config},         {"seed", seed},
          {"version", version},       {"wall_clock_seconds", wall_clock_seconds},
          {"data_dir", data_dir},     {"checkpoint", checkpoint},
          {"history", history},       {"reports", reports}};
}

RunManifest RunManifest::from_json(const json& j) {
  try {
    RunManifest m;
    m.config = j.at("config").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.version = j.value("version", "");
    m.wall_clock_seconds = j.value("wall_clock_seconds", 0.0);
    m.data_dir = j.at("data_dir").get<std::string>();
    m.checkpoint = j.value("checkpoint", "");
    m.history = j.value("history", "");
    m.reports = j.value("reports", std::vector<std::string>{});
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed run manifest: ") + e.what());
  }
}

namespace {

/// Thrown for problems the user must fix in the invocation (exit 2).
struct UsageError : Error {
  using Error::Error;
};

void prepare_out_dir(const fs::path& dir, const std::vector<std::string>& files, bool force) {
  if (fs::exists(dir) && !fs::is_directory(dir)) throw UsageError(dir.string() + " exists and is not a directory");
  for (const auto& f : files) {
    if (fs::exists(dir / f) && !force) {
      throw UsageError((dir / f).string() + " already exists (use --force to overwrite)");
    }
  }
  fs::create_directories(dir);
}

struct GenArgs {
  std::string kind;
  std::size_t n_bg = 1000, n_tg = 1000, image_size = 16;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool force = false;
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
  data::DatasetKind kind;
  try {
    kind = data::parse_dataset_kind(a.kind);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const std::uint64_t seed = a.seed ? *a.seed : env_seed();
  data::Dataset ds;
  switch (kind) {
    case data::DatasetKind::vector_ca: {
      data::VectorCaOptions o;
      o.n_background = a.n_bg;
      o.n_target = a.n_tg;
      o.seed = seed;
      ds = data::gen_vector_ca(o);
      break;
    }
    case data::DatasetKind::colored_shapes:
      ds = data::gen_colored_shapes(a.n_bg, a.n_tg, seed, a.image_size);
      break;
    case data::DatasetKind::attr_sprites:
      ds = data::gen_attr_sprites(a.n_bg, a.n_tg, seed, a.image_size);
      break;
  }
  const fs::path dir(a.out);
  const std::vector<std::string> files{std::string(data::kDatasetMeta), std::string(data::kDatasetManifest),
                                       std::string(data::kDatasetBlob)};
  prepare_out_dir(dir, files, a.force);
  data::write_dataset(ds, dir);
  std::vector<fs::path> paths;
  for (const auto& f : files) paths.push_back(dir / f);
  out << "wrote " << data::to_string(kind) << " dataset (" << ds.count(Origin::background) << " background, "
      << ds.count(Origin::target) << " target, seed " << seed << ") to " << dir.string() << "\n"
      << "checksum " << hex64(checksum_files(paths)) << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string data, config, out, from_manifest, eval_data, independence;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  bool force = false;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  std::string data_dir = a.data;
  if (!a.from_manifest.empty()) {
    std::ifstream in(a.from_manifest);
    if (!in) throw UsageError("cannot read manifest " + a.from_manifest);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError(a.from_manifest + ": " + e.what());
    }
    const auto m = RunManifest::from_json(j);
    cfg = parse_config(m.config, a.from_manifest);
    if (data_dir.empty()) data_dir = m.data_dir;
  } else if (!a.config.empty()) {
    cfg = read_config(a.config);
  } else {
    cfg = parse_config("", "<defaults>");
  }
  if (data_dir.empty()) throw UsageError("--data is required");
  if (!a.independence.empty()) {
    auto& w = cfg.train.weights;
    w.independence_mode = losses::parse_independence_mode(a.independence);
    if (!cfg.lambda_ind_set || w.independence_mode == losses::IndependenceMode::none) {
      w.lambda_ind = losses::LossWeights::default_lambda_ind(w.independence_mode);
    }
  }
  if (a.seed) cfg.train.seed = *a.seed;
  else if (!cfg.seed_set) cfg.train.seed = env_seed();
  if (a.epochs) cfg.train.epochs = *a.epochs;
  cfg.train.validate();

  if (!fs::exists(fs::path(data_dir) / data::kDatasetMeta)) throw UsageError("no dataset in " + data_dir);
  const auto ds = data::read_dataset(data_dir);
  std::optional<data::Dataset> eval_ds;
  if (!a.eval_data.empty()) eval_ds = data::read_dataset(a.eval_data);
  cfg = cfg.resolved(ds);

  const fs::path dir(a.out);
  std::vector<std::string> files{"checkpoint.bin", "history.csv", "config.txt", "run.json"};
  if (eval_ds) files.insert(files.end(), {"report.csv", "report.json"});
  prepare_out_dir(dir, files, a.force);

  const auto t0 = std::chrono::steady_clock::now();
  auto pair = encoders::make_encoder_pair(cfg.pair_options(ds));
  train::TrainCallbacks cb;
  const std::size_t per_epoch = train::steps_per_epoch(ds, cfg.train.batch_size);
  if (!a.quiet) {
    cb.on_step = [&](const train::HistoryRow& row) {
      if ((row.step + 1) % per_epoch == 0) {
        err << "epoch " << row.epoch + 1 << "/" << cfg.train.epochs << "  loss " << row.loss.total << "\n";
      }
    };
  }
  probes::EvalOptions eo;
  eo.seed = cfg.train.seed;
  if (eval_ds) {
    cb.on_eval = [&](std::size_t epoch, const encoders::EncoderPair& enc) {
      out << "epoch " << epoch << "\n" << probes::format_table(probes::evaluate(enc, *eval_ds, eo)) << std::flush;
    };
  }
  const auto result = train::train(ds, std::move(pair), cfg.train_config(ds), cb);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  encoders::save_checkpoint(result.encoders, dir / "checkpoint.bin");
  train::write_history_csv(result.history, dir / "history.csv");
  {
    std::ofstream c(dir / "config.txt");
    c << to_text(cfg);
  }
  RunManifest m;
  m.config = to_text(cfg);
  m.seed = cfg.train.seed;
  m.version = version_string();
  m.wall_clock_seconds = seconds;
  m.data_dir = fs::absolute(data_dir).string();
  m.checkpoint = (dir / "checkpoint.bin").string();
  m.history = (dir / "history.csv").string();
  if (eval_ds) {
    const auto report = probes::evaluate(result.encoders, *eval_ds, eo);
    report.write_csv(dir / "report.csv");
    report.write_json(dir / "report.json");
    m.reports = {(dir / "report.csv").string(), (dir / "report.json").string()};
    out << probes::format_table(report);
  }
  {
    std::ofstream f(dir / "run.json");
    f << m.to_json().dump(2) << "\n";
  }
  out << "trained " << result.history.size() << " steps in " << std::fixed << std::setprecision(1) << seconds
      << " s; checkpoint " << m.checkpoint << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint, data, out, tap = "representation";
  std::optional<std::uint64_t> seed;
  bool oracle = false;
  bool raw = false;
  bool force = false;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  if (!a.oracle) {
    if (a.checkpoint.empty()) throw UsageError("--checkpoint is required (or --oracle)");
    if (!fs::is_regular_file(a.checkpoint)) throw UsageError("checkpoint not found: " + a.checkpoint);
  }
  if (!fs::exists(fs::path(a.data) / data::kDatasetMeta)) throw UsageError("no dataset in " + a.data);
  probes::EvalOptions eo;
  eo.seed = a.seed ? *a.seed : env_seed();
  eo.logistic.standardize = !a.raw;
  try {
    eo.tap = probes::parse_tap(a.tap);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  if (!a.out.empty()) prepare_out_dir(a.out, {"report.csv", "report.json"}, a.force);
  const auto ds = data::read_dataset(a.data);
  probes::ProbeReport report;
  if (a.oracle) {
    const auto [c, s] = probes::oracle_representations(ds);
    report = probes::evaluate_representations(c, s, ds, eo);
  } else {
    report = probes::evaluate(encoders::load_checkpoint(a.checkpoint), ds, eo);
  }
  out << probes::format_table(report);
  if (!a.out.empty()) {
    report.write_csv(fs::path(a.out) / "report.csv");
    report.write_json(fs::path(a.out) / "report.json");
  }
  return kExitOk;
}

struct VerifyArgs {
  std::vector<std::string> suites;
  std::size_t seeds = 10;
};

int cmd_verify(const VerifyArgs& a, std::ostream& out) {
  auto names = a.suites.empty() ? verify::suite_names() : a.suites;
  const auto known = verify::suite_names();
  for (const auto& n : names) {
    if (std::find(known.begin(), known.end(), n) == known.end()) {
      throw UsageError("unknown suite '" + n + "' (expected grads|oracles|kernels)");
    }
  }
  verify::SuiteOptions opts;
  opts.seeds = a.seeds;
  const auto impl = verify::EstimatorSet::library();
  bool ok = true;
  for (const auto& n : names) {
    const auto report = verify::run_suite(n, impl, opts);
    out << verify::format(report);
    ok = ok && report.passed();
  }
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Contrastive analysis with kernel InfoMax objectives", "sepclr"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_string());

  GenArgs ga;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  gen->add_option("kind", ga.kind, "vector-ca | colored-shapes | attr-sprites")->required();
  gen->add_option("--n-bg", ga.n_bg, "Background samples")->capture_default_str();
  gen->add_option("--n-tg", ga.n_tg, "Target samples")->capture_default_str();
  gen->add_option("--seed", ga.seed, "Seed (default $SEPCLR_SEED, else 0)");
  gen->add_option("--image-size", ga.image_size, "Image side in pixels")->capture_default_str();
  gen->add_option("--out", ga.out, "Output directory")->required();
  gen->add_flag("--force", ga.force, "Overwrite existing files");

  TrainArgs ta;
  auto* trn = app.add_subcommand("train", "Train the encoder pair");
  trn->add_option("--data", ta.data, "Dataset directory");
  trn->add_option("--config", ta.config, "key=value config file");
  trn->add_option("--out", ta.out, "Output directory")->required();
  trn->add_option("--from-manifest", ta.from_manifest, "Re-launch the run recorded in a run.json")
      ->excludes(trn->get_option("--config"));
  trn->add_option("--independence", ta.independence, "kjem | kmi | mmd | none");
  trn->add_option("--seed", ta.seed, "Override the config seed");
  trn->add_option("--epochs", ta.epochs, "Override the config epochs");
  trn->add_option("--eval-data", ta.eval_data, "Probe the trained encoders on this dataset");
  trn->add_flag("--force", ta.force, "Overwrite existing files");
  trn->add_flag("--quiet", ta.quiet, "No per-epoch progress");

  EvalArgs ea;
  auto* evl = app.add_subcommand("eval", "Linear probes and the separation table");
  evl->add_option("--checkpoint", ea.checkpoint, "checkpoint.bin from train");
  evl->add_option("--data", ea.data, "Dataset directory")->required();
  evl->add_option("--out", ea.out, "Write report.csv and report.json here");
  evl->add_option("--tap", ea.tap, "representation | projection")->capture_default_str();
  evl->add_option("--seed", ea.seed, "Split seed");
  evl->add_flag("--oracle", ea.oracle, "Probe ground-truth one-hot factors instead of a checkpoint");
  evl->add_flag("--raw", ea.raw, "Fit probes on unstandardized features");
  evl->add_flag("--force", ea.force, "Overwrite existing reports");

  VerifyArgs va;
  auto* ver = app.add_subcommand("verify", "Run the property suites");
  ver->add_option("--suite", va.suites, "grads | oracles | kernels (repeatable; default all)");
  ver->add_option("--seeds", va.seeds, "Random batches per check")->capture_default_str();

  std::vector<std::string> argv_store{"sepclr"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : argv_store) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen(ga, out);
    if (*trn) return cmd_train(ta, out, err);
    if (*evl) return cmd_eval(ea, out);
    if (*ver) return cmd_verify(va, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const train::TrainingDiverged& e) {
    err << "training diverged: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace sepclr::cli
