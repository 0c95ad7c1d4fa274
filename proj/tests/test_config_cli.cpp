#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nilmix/cli_runner.hpp"
#include "nilmix/config.hpp"
#include "nilmix/errors.hpp"

using namespace nilmix;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// unique scratch dir per test binary run
fs::path scratch() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() /
             ("nilmix_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

fs::path write_file(const std::string& name, const std::string& content) {
  const fs::path p = scratch() / name;
  fs::create_directories(p.parent_path());
  std::ofstream out(p);
  out << content;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"nilmix"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

const char* kTorusAlg = "dim 2\n";
const char* kHeisAlg =
    "# three-dimensional, one bracket\n"
    "dim 3\n"
    "step 2\n"
    "bracket 1 2 3 1 1\n";

std::string cat_config(const std::string& alg_name, std::uint64_t seed,
                       const std::string& extra_commands = "") {
  std::ostringstream os;
  os << "{\n"
     << "  \"algebra\": \"" << alg_name << "\",\n"
     << "  \"automorphism\": [[[2,1],[1,1]], [[1,1],[1,1]]],\n"
     << "  \"horizon\": 512,\n"
     << "  \"seed\": " << seed << ",\n"
     << "  \"commands\": {\n"
     << "    \"mixing\": {\"f0\": {\"kind\": \"character\", \"freq\": [1,0],"
     << " \"phase\": \"cos\"}, \"f1\": {\"kind\": \"character\","
     << " \"freq\": [1,0], \"phase\": \"cos\"},"
     << " \"n_schedule\": [1,2,3], \"budget\": 4000}"
     << (extra_commands.empty() ? "" : ",\n    " + extra_commands) << "\n"
     << "  }\n"
     << "}\n";
  return os.str();
}

}  // namespace

TEST_CASE("load_algebra parses declarations and comments") {
  const fs::path p = write_file("alg/heis.alg", kHeisAlg);
  const NilpotentAlgebra a = load_algebra(p.string());
  CHECK(a.dim() == 3);
  CHECK(a.step() == 2);
  CHECK(a.c(0, 1, 2) == Rat(1));
  CHECK(a.c(1, 0, 2) == Rat(-1));  // antisymmetry autofilled
}

TEST_CASE("load_algebra rejects malformed files") {
  CHECK_THROWS_AS(load_algebra((scratch() / "missing.alg").string()),
                  ConfigError);

  const auto bad = [&](const std::string& name, const std::string& body) {
    const fs::path p = write_file(name, body);
    CHECK_THROWS_AS(load_algebra(p.string()), Error);
  };
  bad("alg/nodim.alg", "bracket 1 2 3 1 1\n");
  bad("alg/short.alg", "dim 3\nbracket 1 2 3 1\n");
  bad("alg/range.alg", "dim 3\nbracket 1 2 5 1 1\n");
  bad("alg/zeroden.alg", "dim 3\nbracket 1 2 3 1 0\n");
  bad("alg/trailing.alg", "dim 3\nbracket 1 2 3 1 1 7\n");
  bad("alg/keyword.alg", "dim 3\nbrackets 1 2 3 1 1\n");
  bad("alg/selfbracket.alg", "dim 3\nbracket 1 1 3 1 1\n");
  bad("alg/badstep.alg", "dim 3\nstep 3\nbracket 1 2 3 1 1\n");

  // conflicting restatement of the mirrored component
  bad("alg/conflict.alg", "dim 3\nbracket 1 2 3 1 1\nbracket 2 1 3 1 1\n");
  // restating the same value is allowed
  const fs::path ok =
      write_file("alg/restate.alg", "dim 3\nbracket 1 2 3 1 1\nbracket 2 1 3 -1 1\n");
  CHECK_NOTHROW(load_algebra(ok.string()));
}

TEST_CASE("experiment config resolves paths and applies defaults") {
  write_file("cfg/torus2.alg", kTorusAlg);
  const fs::path cfg = write_file(
      "cfg/min.json",
      "{\"algebra\": \"torus2.alg\","
      " \"automorphism\": [[[2,1],[1,1]], [[1,1],[1,1]]]}");

  const ExperimentConfig c = ExperimentConfig::load(cfg.string());
  CHECK(c.horizon == (1 << 13));
  CHECK(c.seed == 1);
  CHECK(c.workers == 1);
  CHECK(c.out_dir == "out");
  CHECK(c.metric_scale == 1.0);
  CHECK(c.commands.empty());
  // algebra path resolved relative to the config file
  CHECK(fs::path(c.algebra_path).parent_path() == cfg.parent_path());

  const Nilmanifold m = c.make_manifold();
  CHECK(m.dim() == 2);
  const Automorphism a = c.make_automorphism(m);
  CHECK(a.matrix().at(0, 0) == Rat(2));
  CHECK(a.matrix().at(1, 0) == Rat(1));  // columns are basis images
}

TEST_CASE("experiment config rejects malformed fields") {
  write_file("cfg/torus2.alg", kTorusAlg);
  const auto bad = [&](const std::string& name, const std::string& body) {
    const fs::path p = write_file(name, body);
    CHECK_THROWS_AS(ExperimentConfig::load(p.string()), ConfigError);
  };
  bad("cfg/nojson.json", "{ nonsense");
  bad("cfg/noalg.json", "{\"automorphism\": [[[1,1],[0,1]],[[0,1],[1,1]]]}");
  bad("cfg/nomat.json", "{\"algebra\": \"torus2.alg\"}");
  bad("cfg/shortcol.json",
      "{\"algebra\": \"torus2.alg\", \"automorphism\": [[[2,1]], [[1,1]]]}");
  bad("cfg/zeroden.json",
      "{\"algebra\": \"torus2.alg\","
      " \"automorphism\": [[[2,0],[1,1]], [[1,1],[1,1]]]}");
  bad("cfg/badscale.json",
      "{\"algebra\": \"torus2.alg\", \"metric_scale\": -2,"
      " \"automorphism\": [[[2,1],[1,1]], [[1,1],[1,1]]]}");
  bad("cfg/badworkers.json",
      "{\"algebra\": \"torus2.alg\", \"workers\": 0,"
      " \"automorphism\": [[[2,1],[1,1]], [[1,1],[1,1]]]}");
  bad("cfg/badcommands.json",
      "{\"algebra\": \"torus2.alg\", \"commands\": [1,2],"
      " \"automorphism\": [[[2,1],[1,1]], [[1,1],[1,1]]]}");
}

TEST_CASE("observables parse from json specs") {
  write_file("cfg/heis.alg", kHeisAlg);
  const fs::path cfg = write_file(
      "cfg/heis.json",
      "{\"algebra\": \"heis.alg\","
      " \"automorphism\": [[[2,1],[1,1],[0,1]],"
      "  [[1,1],[1,1],[1,2]], [[0,1],[0,1],[1,1]]]}");
  const ExperimentConfig c = ExperimentConfig::load(cfg.string());
  const Nilmanifold m = c.make_manifold();

  const auto ch = observable_from_json(
      m, json::parse(R"({"kind":"character","freq":[1,-2],"phase":"sin"})"));
  CHECK(ch.character_phase() == Phase::Sin);
  REQUIRE(ch.character_freq().has_value());
  CHECK(*ch.character_freq() == std::vector<long long>{1, -2});

  const auto bump = observable_from_json(
      m, json::parse(
             R"({"kind":"bump","center":[0.5,0.5,0.5],"radius":0.3,"degree":3})"));
  CHECK(bump.eval(Point{{0.5, 0.5, 0.5}}) == doctest::Approx(1.0));

  const auto c2 = observable_from_json(m, json::parse(R"({"kind":"constant","value":2})"));
  CHECK(*c2.exact_integral() == 2.0);

  CHECK_THROWS_AS(
      observable_from_json(m, json::parse(R"({"kind":"wavelet"})")),
      ConfigError);
  CHECK_THROWS_AS(
      observable_from_json(
          m, json::parse(R"({"kind":"character","freq":[1,0],"phase":"tan"})")),
      ConfigError);
  CHECK_THROWS_AS(
      observable_from_json(
          m, json::parse(R"({"kind":"character","freq":[1,0,0],"phase":"cos"})")),
      DimensionMismatch);
  CHECK_THROWS_AS(
      observable_from_json(
          m, json::parse(R"({"kind":"bump","center":[0.5],"radius":0.3})")),
      ConfigError);
}

TEST_CASE("cli parses, reports usage errors, and writes summaries") {
  CHECK(cli({"--help"}) == 0);
  CHECK(cli({}) == 1);                       // missing subcommand
  CHECK(cli({"mixing"}) == 1);               // missing --config
  CHECK(cli({"mixing", "--config", (scratch() / "nope.json").string()}) == 1);

  write_file("run/torus2.alg", kTorusAlg);
  const fs::path cfg = write_file("run/cat.json", cat_config("torus2.alg", 5));
  const fs::path out = scratch() / "run" / "out_a";

  CHECK(cli({"check", "--config", cfg.string(), "--out", out.string()}) == 0);
  CHECK(fs::exists(out / "check_5.csv"));
  REQUIRE(fs::exists(out / "summary.json"));
  const json summary = json::parse(slurp(out / "summary.json"));
  CHECK(summary["command"] == "check");
  CHECK(summary["seed"] == 5);
  CHECK(summary["workers"] == 1);
  CHECK(summary["ergodic"] == true);
  CHECK(summary["csv"] == "check_5.csv");
  CHECK(summary["runtime_seconds"].is_number());
}

TEST_CASE("cli maps failure classes to exit codes") {
  // identity automorphism: validation passes, ergodicity gate fails
  write_file("run/torus2.alg", kTorusAlg);
  const fs::path id_cfg = write_file(
      "run/id.json",
      "{\"algebra\": \"torus2.alg\","
      " \"automorphism\": [[[1,1],[0,1]], [[0,1],[1,1]]],"
      " \"commands\": {\"mixing\": {"
      "   \"f0\": {\"kind\": \"character\", \"freq\": [1,0], \"phase\": \"cos\"},"
      "   \"f1\": {\"kind\": \"character\", \"freq\": [1,0], \"phase\": \"cos\"},"
      "   \"n_schedule\": [1,2], \"budget\": 2000}}}");
  const fs::path out = scratch() / "run" / "out_id";

  // check reports the failed certificate through its exit code
  CHECK(cli({"check", "--config", id_cfg.string(), "--out", out.string()}) == 1);
  // experiments refuse to run on a non-ergodic system
  CHECK(cli({"mixing", "--config", id_cfg.string(), "--out", out.string()}) == 1);

  // config-level validation error
  const fs::path bad_cfg = write_file(
      "run/bad.json",
      "{\"algebra\": \"torus2.alg\","
      " \"automorphism\": [[[2,1],[1,1]], [[1,2],[1,1]]]}");
  CHECK(cli({"check", "--config", bad_cfg.string(),
             "--out", (scratch() / "run" / "out_bad").string()}) == 1);

  // command missing its parameters
  const fs::path nocmd_cfg =
      write_file("run/nocmd.json", cat_config("torus2.alg", 1));
  CHECK(cli({"clt", "--config", nocmd_cfg.string(),
             "--out", (scratch() / "run" / "out_nocmd").string()}) == 1);
}

TEST_CASE("cli reruns are byte-identical") {
  write_file("run/torus2.alg", kTorusAlg);
  const fs::path cfg = write_file("run/det.json", cat_config("torus2.alg", 11));
  const fs::path out1 = scratch() / "run" / "det_a";
  const fs::path out2 = scratch() / "run" / "det_b";

  REQUIRE(cli({"mixing", "--config", cfg.string(), "--out", out1.string()}) == 0);
  REQUIRE(cli({"mixing", "--config", cfg.string(), "--out", out2.string()}) == 0);

  const std::string csv1 = slurp(out1 / "mixing_11.csv");
  const std::string csv2 = slurp(out2 / "mixing_11.csv");
  CHECK(csv1 == csv2);
  CHECK_FALSE(csv1.empty());

  // changing the seed actually changes the file
  const fs::path out3 = scratch() / "run" / "det_c";
  REQUIRE(cli({"mixing", "--config", cfg.string(), "--seed", "12",
               "--out", out3.string()}) == 0);
  CHECK(slurp(out3 / "mixing_12.csv") != csv1);
}

TEST_CASE("seed comes from flag, environment, then config") {
  write_file("run/torus2.alg", kTorusAlg);
  const fs::path cfg = write_file("run/env.json", cat_config("torus2.alg", 5));
  const fs::path out = scratch() / "run" / "env_out";

  ::setenv("NILMIX_SEED", "9", 1);
  CHECK(cli({"check", "--config", cfg.string(), "--out", out.string()}) == 0);
  json summary = json::parse(slurp(out / "summary.json"));
  CHECK(summary["seed"] == 9);

  // explicit flag beats the environment
  CHECK(cli({"check", "--config", cfg.string(), "--seed", "3",
             "--out", out.string()}) == 0);
  summary = json::parse(slurp(out / "summary.json"));
  CHECK(summary["seed"] == 3);
  ::unsetenv("NILMIX_SEED");

  // config value is the fallback
  CHECK(cli({"check", "--config", cfg.string(), "--out", out.string()}) == 0);
  summary = json::parse(slurp(out / "summary.json"));
  CHECK(summary["seed"] == 5);
}
