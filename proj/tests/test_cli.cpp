#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "sepclr/cli.hpp"
#include "sepclr/datagen.hpp"
#include "sepclr/encoders.hpp"
#include "sepclr/error.hpp"

using namespace sepclr;
using namespace sepclr::cli;

namespace {

struct Invocation {
  int code = 0;
  std::string out;
  std::string err;
};

Invocation invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Invocation r;
  r.code = run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p);
  os << text;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kTinyConfig =
    "epochs = 1\n"
    "batch_size = 16\n"
    "common_dim = 4\n"
    "salient_dim = 3\n"
    "representation_dim = 8\n";

}  // namespace

TEST_CASE("config parsing: defaults, comments and mode defaults") {
  const auto c = parse_config("# nothing\n\n");
  CHECK(c.train.epochs == 50);
  CHECK(c.train.batch_size == 256);
  CHECK(c.train.learning_rate == 5e-4);
  CHECK(c.train.weights.lambda_ind == 10.0);
  CHECK_FALSE(c.seed_set);
  const auto m = parse_config("independence = mmd\n");
  CHECK(m.train.weights.lambda_ind == 50.0);
  const auto n = parse_config("independence = none  # off\n");
  CHECK(n.train.weights.lambda_ind == 0.0);
  const auto e = parse_config("lambda_ind = 3\nindependence = mmd\nseed = 9\naug_noise_std = 0.2\n");
  CHECK(e.train.weights.lambda_ind == 3.0);
  CHECK(e.train.seed == 9);
  CHECK(e.seed_set);
  CHECK(e.augmentation.noise_std == 0.2);
  CHECK(parse_config("mode = attribute\n").train.mode == losses::ObjectiveMode::attribute_supervised);
}

TEST_CASE("config parsing: errors name the offending line") {
  try {
    parse_config("epochs = 3\nlamda_c = 1\n", "run.cfg");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("run.cfg:2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("epochs = 3\nepochs = 4\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("epochs = many\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("epochs\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("epochs = 0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("independence = hsic\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("tau = -1\n"), ConfigError);
  CHECK_THROWS_AS(read_config("/nonexistent/run.cfg"), ConfigError);
}

TEST_CASE("config text round-trips") {
  const auto c = parse_config("epochs = 7\ntau = 0.25\nindependence = kmi\naug_max_shift = 1\nsalient_dim = 5\n");
  const auto text = to_text(c);
  CHECK(to_text(parse_config(text)) == text);
  const auto ds = data::gen_colored_shapes(4, 4, 0);
  const auto r = c.resolved(ds);
  CHECK(r.salient_dim == 5);
  CHECK(r.train_config(ds).augmentation->max_shift == 1);
  CHECK(r.train_config(ds).augmentation->flip_prob == 0.5);
  CHECK(parse_config("mode = attribute\n").resolved(data::gen_attr_sprites(4, 4, 0)).salient_dim == 5);
  CHECK(parse_config("").resolved(ds).salient_dim == 32);
}

TEST_CASE("checksums and manifests") {
  testing::TempDir dir("cks");
  write_text(dir / "a", "hello");
  CHECK(checksum_files({dir / "a"}) == 0xa430d84680aabd0bULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
  RunManifest m;
  m.config = "epochs = 1\n";
  m.seed = 42;
  m.version = "v";
  m.reports = {"r.csv"};
  const auto back = RunManifest::from_json(m.to_json());
  CHECK(back.config == m.config);
  CHECK(back.seed == 42);
  CHECK(back.reports == m.reports);
  CHECK_FALSE(version_string().empty());
}

TEST_CASE("env seed") {
  ::unsetenv("SEPCLR_SEED");
  CHECK(env_seed(5) == 5);
  ::setenv("SEPCLR_SEED", "17", 1);
  CHECK(env_seed(5) == 17);
  ::setenv("SEPCLR_SEED", "x", 1);
  CHECK_THROWS(env_seed(5));
  ::unsetenv("SEPCLR_SEED");
}

TEST_CASE("usage errors exit 2") {
  CHECK(invoke({}).code == kExitUsage);
  CHECK(invoke({"frobnicate"}).code == kExitUsage);
  CHECK(invoke({"gen", "mnist", "--out", "/tmp/x"}).code == kExitUsage);
  CHECK(invoke({"verify", "--suite", "nope"}).code == kExitUsage);
  CHECK(invoke({"eval", "--checkpoint", "/nonexistent.bin", "--data", "/nonexistent"}).code == kExitUsage);
}

TEST_CASE("gen writes reproducible data and refuses to overwrite") {
  testing::TempDir dir("gen");
  const auto a = invoke({"gen", "colored-shapes", "--n-bg", "6", "--n-tg", "6", "--seed", "3", "--out",
                         (dir / "a").string()});
  REQUIRE(a.code == kExitOk);
  CHECK(a.out.find("checksum") != std::string::npos);
  const auto b = invoke({"gen", "colored-shapes", "--n-bg", "6", "--n-tg", "6", "--seed", "3", "--out",
                         (dir / "b").string()});
  CHECK(b.out.substr(b.out.find("checksum")) == a.out.substr(a.out.find("checksum")));
  CHECK(slurp(dir / "a" / "inputs.f64") == slurp(dir / "b" / "inputs.f64"));
  const auto again = invoke({"gen", "colored-shapes", "--n-bg", "6", "--n-tg", "6", "--out", (dir / "a").string()});
  CHECK(again.code == kExitUsage);
  CHECK(invoke({"gen", "colored-shapes", "--n-bg", "6", "--n-tg", "6", "--out", (dir / "a").string(), "--force"})
            .code == kExitOk);
  CHECK(data::read_dataset(dir / "a").size() == 12);
}

TEST_CASE("train, eval and relaunch from a manifest") {
  testing::TempDir dir("train");
  REQUIRE(invoke({"gen", "vector-ca", "--n-bg", "64", "--n-tg", "256", "--out", (dir / "data").string()}).code == 0);
  write_text(dir / "run.cfg", kTinyConfig);
  const auto t = invoke({"train", "--data", (dir / "data").string(), "--config", (dir / "run.cfg").string(), "--out",
                         (dir / "run").string(), "--seed", "4", "--eval-data", (dir / "data").string(), "--quiet"});
  CAPTURE(t.err);
  REQUIRE(t.code == kExitOk);
  for (const char* f : {"checkpoint.bin", "history.csv", "config.txt", "run.json", "report.csv", "report.json"})
    CHECK(std::filesystem::exists(dir / "run" / f));
  CHECK(t.out.find("delta_tot") != std::string::npos);
  const auto manifest = RunManifest::from_json(nlohmann::json::parse(slurp(dir / "run" / "run.json")));
  CHECK(manifest.seed == 4);
  CHECK(parse_config(manifest.config).train.seed == 4);

  const auto pair = encoders::load_checkpoint(dir / "run" / "checkpoint.bin");
  CHECK(pair.salient.spec().output_dim() == 3);

  const auto re = invoke({"train", "--from-manifest", (dir / "run" / "run.json").string(), "--data",
                          (dir / "data").string(), "--out", (dir / "again").string(), "--quiet"});
  REQUIRE(re.code == kExitOk);
  CHECK(slurp(dir / "run" / "checkpoint.bin") == slurp(dir / "again" / "checkpoint.bin"));

  const auto ev = invoke({"eval", "--checkpoint", (dir / "run" / "checkpoint.bin").string(), "--data",
                          (dir / "data").string(), "--out", (dir / "eval").string()});
  REQUIRE(ev.code == kExitOk);
  CHECK(std::filesystem::exists(dir / "eval" / "report.json"));
  CHECK(ev.out.find("delta_tot") != std::string::npos);

  const auto oracle = invoke({"eval", "--oracle", "--data", (dir / "data").string(), "--out", (dir / "oracle").string()});
  REQUIRE(oracle.code == kExitOk);
  const auto j = nlohmann::json::parse(slurp(dir / "oracle" / "report.json"));
  CHECK(j["delta_tot"].get<double>() == doctest::Approx(0.0).epsilon(1e-12));

  CHECK(invoke({"train", "--data", (dir / "data").string(), "--config", (dir / "run.cfg").string(), "--out",
                (dir / "run").string(), "--quiet"})
            .code == kExitUsage);
  write_text(dir / "bad.cfg", "epochs = 0\n");
  CHECK(invoke({"train", "--data", (dir / "data").string(), "--config", (dir / "bad.cfg").string(), "--out",
                (dir / "bad").string(), "--quiet"})
            .code == kExitUsage);
}

TEST_CASE("verify runs a suite") {
  const auto r = invoke({"verify", "--suite", "kernels", "--seeds", "2"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("PASS kernels/") != std::string::npos);
}
