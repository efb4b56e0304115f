#include "nudgenet/config.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace nudgenet;

namespace {

std::filesystem::path source_dir() { return std::filesystem::path(NUDGENET_SOURCE_DIR); }

}  // namespace

TEST_SUITE("config") {

TEST_CASE("ini parsing") {
  const IniDocument d = IniDocument::parse("seed = 4 # top\n\n[a]\n; note\nx = 1\n  y =  two words  \n[b]\nx=3\n");
  REQUIRE(d.find("", "seed"));
  CHECK(*d.find("", "seed") == "4");
  CHECK(*d.find("a", "y") == "two words");
  CHECK(*d.find("b", "x") == "3");
  CHECK_FALSE(d.has("a", "z"));
  CHECK_THROWS_AS(IniDocument::parse("[open\n"), ConfigError);
  CHECK_THROWS_AS(IniDocument::parse("[a]\nnovalue\n"), ConfigError);
  CHECK_THROWS_AS(IniDocument::parse("[a]\nx = 1\nx = 2\n"), ConfigError);
}

TEST_CASE("lorenz63 recipes") {
  const PipelineConfig x = PipelineConfig::lorenz63(1);
  CHECK(x.mu == 30.0);
  CHECK(x.delta == 0.1);
  CHECK(x.windows == 15);
  CHECK(x.ensemble.n_refs == 1000);
  CHECK(x.ensemble.init_std == 10.0);
  CHECK(x.evaluation.n_test == 100);
  CHECK(x.evaluation.test_init_std == 50.0);
  CHECK(x.arch.make(4, 3).widths == std::vector<int>{4, 50, 50, 50, 3});
  CHECK(x.training.patience == 400);
  CHECK(x.op.indices() == std::vector<int>{1});
  CHECK(PipelineConfig::lorenz63(2).mu == 10.0);
  CHECK(PipelineConfig::lorenz63(2).op.indices() == std::vector<int>{2});
}

TEST_CASE("lorenz96 recipes") {
  CHECK(PipelineConfig::lorenz96(20).op.size() == 20);
  CHECK(PipelineConfig::lorenz96(13).op.size() == 13);
  const PipelineConfig four = PipelineConfig::lorenz96(4);
  CHECK(four.op.indices() == std::vector<int>{10, 20, 30, 40});
  CHECK(four.arch.hidden_layers == 15);
  CHECK(four.arch.width == 10);
  CHECK(four.arch.reduced);
  CHECK(four.evaluation.horizon == 20.0);
  CHECK_THROWS_AS(PipelineConfig::lorenz96(7), ConfigError);
}

TEST_CASE("resolved ini round trips") {
  for (const PipelineConfig& c : {PipelineConfig::lorenz63(1), PipelineConfig::lorenz96(13)}) {
    const std::string ini = c.to_ini();
    const PipelineConfig back = PipelineConfig::from_text(ini);
    CHECK(back.to_ini() == ini);
    CHECK(back.hash() == c.hash());
  }
}

TEST_CASE("overrides and seed") {
  const PipelineConfig c = PipelineConfig::from_text("seed = 9\n[system]\nname = lorenz63\n[nudging]\nmu = 12.5\n");
  CHECK(c.seed == 9);
  CHECK(c.ensemble.seed == 9);
  CHECK(c.training.seed == 9);
  CHECK(c.mu == 12.5);
  PipelineConfig d = c;
  d.set_seed(10);
  CHECK(d.hash() != c.hash());
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(PipelineConfig::from_text("[system]\nname = lorenz84\n"), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_text("[nudging]\nmu = fast\n"), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_text("[nudging]\nmuu = 3\n"), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_text("[nudging]\nmu = -3\n"), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_text("[observations]\nindices = 1, 4\n"), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_text("[nudging]\ninnovation = lagged\n"), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::load("/nonexistent/config.ini"), ConfigError);
}

TEST_CASE("shipped config files match the built-in recipes") {
  const auto dir = source_dir() / "configs";
  CHECK(PipelineConfig::load(dir / "lorenz63_x.ini").hash() == PipelineConfig::lorenz63(1).hash());
  CHECK(PipelineConfig::load(dir / "lorenz63_y.ini").hash() == PipelineConfig::lorenz63(2).hash());
  CHECK(PipelineConfig::load(dir / "lorenz96_20.ini").hash() == PipelineConfig::lorenz96(20).hash());
  CHECK(PipelineConfig::load(dir / "lorenz96_13.ini").hash() == PipelineConfig::lorenz96(13).hash());
  CHECK(PipelineConfig::load(dir / "lorenz96_4.ini").hash() == PipelineConfig::lorenz96(4).hash());
  CHECK_NOTHROW(PipelineConfig::load(dir / "smoke.ini"));
}

}  // TEST_SUITE
