#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kf/config.hpp"
#include "kf/error.hpp"

using namespace kf;
namespace fs = std::filesystem;

namespace {

int run_kf(const std::string& args) {
  const std::string cmd = std::string(KF_BINARY) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("kf_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("defaults parse and validate") {
    const RunConfig rc = parse_run_config(default_config_json());
    CHECK(rc.output_dir == "out");
    CHECK(rc.meanfield.cfg.M == 400);
    CHECK(rc.oracle.tol == doctest::Approx(1e-3));
    CHECK(rc.kinetic.dt <= rc.kinetic.epsilon);
  }

  TEST_CASE("unknown keys and bad values are configuration errors") {
    Json j = default_config_json();
    CHECK_THROWS_AS(merge_checked(j, Json{{"kinetic", {{"no_such_key", 1}}}}), ConfigError);
    CHECK_THROWS_AS(apply_override(j, "model.nonsense=3"), ConfigError);
    CHECK_THROWS_AS(apply_override(j, "missing_equals"), ConfigError);
    apply_override(j, "kinetic.dt=0.5");
    CHECK_THROWS_AS(parse_run_config(j), ConfigError);
    Json k = default_config_json();
    apply_override(k, "model.kind=not_a_model");
    CHECK_THROWS_AS(parse_run_config(k), ConfigError);
    CHECK_THROWS_AS(preset_overlay("test9"), ConfigError);
  }

  TEST_CASE("overrides and presets") {
    Json j = default_config_json();
    apply_override(j, "kinetic.n_particles=123");
    apply_override(j, "kinetic.controller=zero");
    const RunConfig rc = parse_run_config(j);
    CHECK(rc.kinetic.n_particles == 123);
    CHECK(rc.kinetic.controller == ControllerKind::Zero);

    const RunConfig t1 = load_run_config(std::nullopt, "test1", {});
    CHECK(t1.model.kind == ModelKind::Sznajd);
    CHECK(t1.model.gamma == doctest::Approx(0.05));
    const RunConfig t2 = load_run_config(std::nullopt, "test2", {"model.gamma=0.2"});
    CHECK(t2.model.kind == ModelKind::CuckerSmale);
    CHECK(t2.model.d == 15);
    CHECK(t2.model.gamma == doctest::Approx(0.2));
    const RunConfig t3 = load_run_config(std::nullopt, "test3", {});
    CHECK(t3.model.kind == ModelKind::QuasiMorse);
    CHECK(t3.model.d == 3);
  }

  TEST_CASE("file layering and output directory from the environment") {
    const fs::path d = fresh_dir("layer");
    {
      std::ofstream os(d / "cfg.json");
      os << R"({"preset": "test2", "kinetic": {"n_particles": 77}, "output_dir": "from_file"})";
    }
    const RunConfig a = load_run_config(d / "cfg.json", "", {"kinetic.n_steps=3"});
    CHECK(a.model.d == 15);
    CHECK(a.kinetic.n_particles == 77);
    CHECK(a.kinetic.n_steps == 3);
    CHECK(a.output_dir == "from_file");
    setenv("KF_OUTPUT_DIR", (d / "env").c_str(), 1);
    const RunConfig b = load_run_config(d / "cfg.json", "", {});
    unsetenv("KF_OUTPUT_DIR");
    CHECK(b.output_dir == (d / "env").string());
    CHECK_THROWS_AS(load_run_config(d / "missing.json", "", {}), ConfigError);
  }

  TEST_CASE("help lists every key") {
    const std::string help = config_help();
    for (const ConfigKey& k : config_keys()) CHECK_MESSAGE(help.find(k.path) != std::string::npos, k.path);
  }

  TEST_CASE("command line exit codes") {
    const fs::path d = fresh_dir("codes");
    const std::string out = " output_dir=" + d.string();
    CHECK(run_kf("--help") == 0);
    CHECK(run_kf("") == 2);
    CHECK(run_kf("simulate bogus.key=1" + out) == 2);
    CHECK(run_kf("simulate -c " + (d / "absent.json").string() + out) == 2);
    CHECK(run_kf("simulate kinetic.controller=nn_control kinetic.model_file=" + (d / "absent.kfnn").string() + out) ==
          2);
    CHECK(run_kf("simulate model.d=2 kinetic.n_particles=20 kinetic.n_steps=2 dare.method=fixed_point dare.max_iter=1" +
                 out) == 3);
    CHECK(run_kf("mf1d -p test1 meanfield.n_steps=2 meanfield.M=21" + out) == 0);
    CHECK(fs::exists(d / "meanfield_density.csv"));
    CHECK(fs::exists(d / "mf1d.manifest.json"));
  }

  TEST_CASE("gen-data is byte-identical across runs and trains end to end") {
    const fs::path a = fresh_dir("gen_a"), b = fresh_dir("gen_b");
    const std::string common = "gen-data -p test1 dataset.n_samples=200 dataset.seed=11";
    REQUIRE(run_kf(common + " output_dir=" + a.string()) == 0);
    REQUIRE(run_kf(common + " -t 1 output_dir=" + b.string()) == 0);
    CHECK(slurp(a / "dataset.csv") == slurp(b / "dataset.csv"));
    CHECK(slurp(a / "dataset.meta.json") == slurp(b / "dataset.meta.json"));

    REQUIRE(run_kf("train -p test1 training.epochs=3 training.preset=null training.hidden=[8] output_dir=" +
                   a.string()) == 0);
    REQUIRE(fs::exists(a / "model.kfnn"));
    REQUIRE(run_kf("simulate -p test1 kinetic.controller=nn_control kinetic.n_particles=50 kinetic.n_steps=3 "
                   "kinetic.model_file=" +
                   (a / "model.kfnn").string() + " output_dir=" + a.string()) == 0);
    CHECK(fs::exists(a / "costs.csv"));
  }

  TEST_CASE("simulation output is deterministic") {
    const fs::path a = fresh_dir("sim_a"), b = fresh_dir("sim_b");
    const std::string common = "simulate -p test2 model.d=2 kinetic.n_particles=60 kinetic.n_steps=4 "
                               "kinetic.snapshot_every=2";
    REQUIRE(run_kf(common + " output_dir=" + a.string()) == 0);
    REQUIRE(run_kf(common + " -t 1 output_dir=" + b.string()) == 0);
    CHECK(slurp(a / "costs.csv") == slurp(b / "costs.csv"));
    CHECK(slurp(a / "snapshots" / "snapshot_000004.csv") == slurp(b / "snapshots" / "snapshot_000004.csv"));
    CHECK_FALSE(slurp(a / "snapshots" / "snapshot_000004.csv").empty());
  }

  TEST_CASE("oracle passes and an impossible tolerance fails") {
    const fs::path d = fresh_dir("oracle");
    const std::string grid = " oracle.p=[1.0] oracle.gamma=[1.0] oracle.dt=[0.01,0.001] oracle.bf_steps=50 output_dir=";
    CHECK(run_kf("oracle" + grid + d.string()) == 0);
    CHECK(fs::exists(d / "oracle.csv"));
    CHECK(run_kf("oracle oracle.tol=1e-12" + grid + d.string()) != 0);
  }
}
