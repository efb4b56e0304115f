#include "nudgenet/io_util.hpp"
#include "nudgenet/model.hpp"
#include "nudgenet/pipeline.hpp"

#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

namespace fs = std::filesystem;
using namespace nudgenet;

namespace {

const fs::path kSource = NUDGENET_SOURCE_DIR;

struct Result {
  int code = -1;
  std::string out;  ///< stdout, trimmed
};

fs::path scratch() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / ("nudgenet_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Result run(const std::string& args) {
  const fs::path out = scratch() / "stdout.txt";
  const std::string cmd = std::string(NUDGENET_CLI) + " " + args + " > " + out.string() + " 2> " +
                          (scratch() / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = std::string(io::trim(io::read_file(out)));
  return r;
}

std::string smoke() { return (kSource / "configs" / "smoke.ini").string(); }

std::string out_flag(const std::string& sub) { return " --out " + (scratch() / sub).string(); }

}  // namespace

TEST_CASE("missing config exits 2 without artifacts") {
  const Result r = run("build-dataset --config /nonexistent.ini" + out_flag("missing"));
  CHECK(r.code == 2);
  CHECK_FALSE(fs::exists(scratch() / "missing"));
}

TEST_CASE("invalid config and arguments exit 2") {
  const fs::path bad = scratch() / "bad.ini";
  io::write_file(bad, "[nudging]\nmu = 30\nspeed = 3\n");
  CHECK(run("generate --config " + bad.string() + out_flag("bad")).code == 2);
  CHECK(run("reproduce lorenz96 --obs 7" + out_flag("bad")).code == 2);
  CHECK(run("no-such-command").code == 2);
  CHECK_FALSE(fs::exists(scratch() / "bad"));
}

TEST_CASE("build-dataset with the Lorenz 63 recipe yields 15000 samples") {
  const Result r = run("build-dataset --config " + (kSource / "configs" / "lorenz63_x.ini").string() + out_flag("l63"));
  REQUIRE(r.code == 0);
  const fs::path dir = r.out;
  const auto meta = nlohmann::json::parse(io::read_file(dir / "dataset.json"));
  CHECK(meta["n_samples"] == 15000);
  CHECK(meta["input_dim"] == 4);
  CHECK(fs::exists(dir / "config.ini"));
  CHECK(load_dataset(dir / "dataset.bin").samples.size() == 15000);
}

TEST_CASE("pipeline through the CLI") {
  const Result d1 = run("build-dataset --config " + smoke() + out_flag("a"));
  const Result d2 = run("build-dataset --config " + smoke() + " --jobs 3" + out_flag("b"));
  REQUIRE(d1.code == 0);
  REQUIRE(d2.code == 0);
  // run directories carry the config hash and a resolved snapshot
  CHECK(fs::path(d1.out).filename().string().find(PipelineConfig::load(smoke()).hash().substr(0, 12)) !=
        std::string::npos);
  CHECK(PipelineConfig::load(fs::path(d1.out) / "config.ini").hash() == PipelineConfig::load(smoke()).hash());
  CHECK(io::read_file(fs::path(d1.out) / "dataset.bin") == io::read_file(fs::path(d2.out) / "dataset.bin"));

  const std::string ds = (fs::path(d1.out) / "dataset.bin").string();
  const Result t1 = run("train --config " + smoke() + " --dataset " + ds + out_flag("a"));
  const Result t2 = run("train --config " + smoke() + " --dataset " + ds + out_flag("b"));
  REQUIRE(t1.code == 0);
  REQUIRE(t2.code == 0);
  const fs::path m1 = fs::path(t1.out) / "models" / "model.bin";
  CHECK(parameter_block(load_model(m1)) == parameter_block(load_model(fs::path(t2.out) / "models" / "model.bin")));
  CHECK(load_model(m1).dataset_hash == dataset_hash(load_dataset(ds)));
  CHECK(fs::exists(fs::path(t1.out) / "loss_history.csv"));

  const Result g = run("generate --config " + smoke() + " --set test" + out_flag("a"));
  REQUIRE(g.code == 0);
  const std::string refs = (fs::path(g.out) / "refs.bin").string();
  const Result a = run("assimilate --config " + smoke() + " --models " + (fs::path(t1.out) / "models").string() +
                       " --refs " + refs + out_flag("a"));
  REQUIRE(a.code == 0);
  const Result n = run("nudge --config " + smoke() + " --refs " + refs + out_flag("a"));
  REQUIRE(n.code == 0);

  const Result e = run("evaluate --config " + smoke() + " --runs " + (fs::path(a.out) / "runs").string() +
                       " --refs " + refs + " --models " + (fs::path(t1.out) / "models").string() + out_flag("a"));
  CHECK(e.code == 0);
  const auto rm = nlohmann::json::parse(io::read_file(fs::path(e.out) / "rmse.json"));
  CHECK(rm["dnn_full"]["n_runs"] == 4);
  const Result en = run("evaluate --config " + smoke() + " --runs " + (fs::path(n.out) / "runs").string() +
                        " --refs " + refs + out_flag("a"));
  CHECK(en.code == 0);

  SUBCASE("evaluate refuses runs from another ensemble") {
    const Result g2 = run("generate --config " + smoke() + " --set test --seed 99" + out_flag("c"));
    REQUIRE(g2.code == 0);
    const Result bad = run("evaluate --config " + smoke() + " --runs " + (fs::path(a.out) / "runs").string() +
                           " --refs " + (fs::path(g2.out) / "refs.bin").string() + out_flag("c"));
    CHECK(bad.code == 2);
  }
  SUBCASE("evaluate refuses runs from another model") {
    const Result t3 = run("train --config " + smoke() + " --seed 5 --dataset " + ds + out_flag("c"));
    REQUIRE(t3.code == 0);
    const Result bad = run("evaluate --config " + smoke() + " --runs " + (fs::path(a.out) / "runs").string() +
                           " --refs " + refs + " --models " + (fs::path(t3.out) / "models").string() + out_flag("c"));
    CHECK(bad.code == 2);
  }
}

TEST_CASE("verify-theory passes for the continuous case") {
  const Result r = run("verify-theory --case continuous-x --refs 2");
  CHECK(r.code == 0);
  CHECK(r.out.rfind("PASS", 0) == 0);
}

TEST_CASE("reproduce writes a table and reports the check") {
  const Result r = run("reproduce lorenz63 --config " + smoke() + " --obs x --check" + out_flag("rep"));
  CHECK((r.code == 0 || r.code == 4));
  CHECK(fs::exists(fs::path(r.out) / "table.txt"));
  CHECK(fs::exists(fs::path(r.out) / "x-obs" / "result.json"));
}
