#include "doctest.h"
#include "support.hpp"

#include "plrdiff/config.hpp"
#include "plrdiff/error.hpp"

#include <filesystem>
#include <fstream>

using namespace plrdiff;
namespace fs = std::filesystem;

namespace {

// Expects validate() to fail on exactly `field`.
void expect_field(const RunConfig &cfg, Command cmd, const std::string &field) {
  try {
    cfg.validate(cmd);
    FAIL("no error for " << field);
  } catch (const ConfigError &e) {
    CHECK(e.field() == field);
  }
}

} // namespace

TEST_SUITE("config") {

TEST_CASE("default settings") {
  const RunConfig c;
  CHECK(c.eta1 == 1.0);
  CHECK(c.eta2 == 2.0);
  CHECK(c.scale == 4);
  CHECK(c.kernel_size == 9);
  CHECK(c.sigma == default_blur_sigma());
  CHECK(c.rank == 3);
  CHECK(c.steps == 1000);
  CHECK(c.guidance().vjp_mode == VjpMode::StopGradient);
  CHECK_NOTHROW(c.validate(Command::Synthesize));
  CHECK(c.schedule().steps() == 1000);
  const DegradationModel m = c.degradation(8);
  CHECK(m.response.size() == 8);
  CHECK(m.response.sum() == doctest::Approx(1.0));
}

TEST_CASE("every out-of-range field is named") {
  auto with = [](auto edit) {
    RunConfig c;
    edit(c);
    return c;
  };
  const Command s = Command::Synthesize;
  expect_field(with([](RunConfig &c) { c.scale = 0; }), s, "scale");
  expect_field(with([](RunConfig &c) { c.kernel_size = 4; }), s, "kernel_size");
  expect_field(with([](RunConfig &c) { c.sigma = -1; }), s, "sigma");
  expect_field(with([](RunConfig &c) { c.response = {0.5, -0.1}; }), s, "response");
  expect_field(with([](RunConfig &c) { c.response_range = std::pair<Index, Index>{3, 2}; }), s,
               "response_range");
  expect_field(with([](RunConfig &c) { c.rank = 0; }), s, "rank");
  expect_field(with([](RunConfig &c) { c.bands = {3, 2}; }), s, "bands");
  expect_field(with([](RunConfig &c) { c.steps = 10; }), s, "steps");
  expect_field(with([](RunConfig &c) { c.beta_start = 0.1; }), s, "beta_end");
  expect_field(with([](RunConfig &c) { c.eta1 = -1; }), s, "eta1");
  expect_field(with([](RunConfig &c) { c.eta2 = std::nan(""); }), s, "eta2");
  expect_field(with([](RunConfig &c) { c.vjp_mode = "exact"; }), s, "vjp_mode");
  expect_field(with([](RunConfig &c) { c.norm_floor = 0; }), s, "norm_floor");
  expect_field(with([](RunConfig &c) { c.predictor = "unet"; }), s, "predictor");
  expect_field(with([](RunConfig &c) { c.prior_variance = 0; }), s, "prior_variance");
  expect_field(with([](RunConfig &c) { c.eta_grid = {{1, -2}}; }), s, "eta_grid");
  expect_field(with([](RunConfig &c) { c.band_lists = {{}}; }), s, "band_lists");
  expect_field(with([](RunConfig &c) { c.steps_list = {300, 0}; }), s, "steps_list");
  expect_field(with([](RunConfig &c) { c.repeats = 0; }), s, "repeats");
  expect_field(with([](RunConfig &c) { c.workers = 0; }), s, "workers");
  expect_field(with([](RunConfig &c) { c.momentum = 1.0; }), s, "momentum");
  expect_field(with([](RunConfig &c) { c.embedding = 5; }), s, "embedding");
  expect_field(with([](RunConfig &c) { c.holdout_fraction = 1.0; }), s, "holdout_fraction");
  expect_field(with([](RunConfig &c) { c.q2n_block = 1; }), s, "q2n_block");
  expect_field(with([](RunConfig &c) { c.dtype = "f16"; }), s, "dtype");
  expect_field(with([](RunConfig &c) { c.height = 30; }), s, "scale");
}

TEST_CASE("missing inputs are config errors") {
  RunConfig c;
  c.predictor = "gaussian";
  expect_field(c, Command::Pansharpen, "lrms");
  c.lrms = "/nonexistent/lrms.arr";
  expect_field(c, Command::Pansharpen, "lrms");
  expect_field(c, Command::Degrade, "hrms");
  expect_field(c, Command::Metrics, "reference");
  RunConfig t;
  t.weights = "";
  expect_field(t, Command::TrainDenoiser, "weights");
}

TEST_CASE("explicit betas allow short chains") {
  RunConfig c;
  c.steps = 10;
  c.beta_start = 0.05;
  c.beta_end = 0.9;
  CHECK_NOTHROW(c.validate(Command::Synthesize));
  CHECK(c.schedule().steps() == 10);
  c.beta_end = 0.1;
  try {
    c.schedule();
    FAIL("terminal alpha_bar should be too large");
  } catch (const ConfigError &e) {
    CHECK(e.field() == "beta_end");
  }
}

TEST_CASE("json overlay and round trip") {
  RunConfig c;
  apply_config_json(c, R"({"eta1": 3.5, "vjp_mode": "full", "bands": [1, 4, 7],
                           "response_range": [2, 5], "eta_grid": [[0, 0], [1, 2]],
                           "beta_start": 0.001, "beta_end": 0.05, "seed": 99})");
  CHECK(c.eta1 == 3.5);
  CHECK(c.guidance().vjp_mode == VjpMode::Full);
  CHECK(c.bands == std::vector<Index>{1, 4, 7});
  CHECK(c.response_range->second == 5);
  CHECK(c.eta_grid.size() == 2);
  CHECK(c.seed == 99);

  RunConfig back;
  apply_config_json(back, config_to_json(c));
  CHECK(config_to_json(back) == config_to_json(c));

  // Provenance documents carry the config under "config".
  RunConfig prov;
  apply_config_json(prov, R"({"command": "pansharpen", "config": {"steps": 300}})");
  CHECK(prov.steps == 300);

  auto field_of = [](const std::string &text) {
    RunConfig x;
    try {
      apply_config_json(x, text);
    } catch (const ConfigError &e) {
      return e.field();
    }
    return std::string();
  };
  CHECK(field_of(R"({"etaa1": 1})") == "etaa1");
  CHECK(field_of(R"({"steps": "many"})") == "steps");
  CHECK(field_of(R"({"steps": 1.5})") == "steps");
  CHECK(field_of("not json") == "config");
  CHECK(field_of("[1, 2]") == "config");
}

TEST_CASE("config file") {
  const fs::path dir = fs::path(PLRDIFF_TEST_TMP) / "config";
  fs::create_directories(dir);
  std::ofstream(dir / "c.json") << R"({"scale": 8, "kernel_size": 17, "sigma": 3.0})";
  RunConfig c;
  apply_config_file(c, dir / "c.json");
  CHECK(c.scale == 8);
  CHECK(c.degradation(4).kernel.rows() == 17);
  CHECK_THROWS_AS(apply_config_file(c, dir / "missing.json"), ConfigError);
}

TEST_CASE("list parsers") {
  CHECK(parse_index_list("bands", "2, 4,6") == std::vector<Index>{2, 4, 6});
  CHECK(parse_index_lists("band_lists", "1,2,3;2,4,6").size() == 2);
  const auto grid = parse_eta_grid("eta_grid", "0:0,1:2,4.5:0");
  REQUIRE(grid.size() == 3);
  CHECK(grid[1] == std::pair{1.0, 2.0});
  CHECK(grid[2].first == 4.5);
  CHECK(parse_int_list("steps_list", "300,600") == std::vector<int>{300, 600});
  CHECK(parse_double_list("response", "0.2,0.8") == std::vector<double>{0.2, 0.8});
  CHECK(parse_range("response_range", "1:4") == std::pair<Index, Index>{1, 4});
  CHECK_THROWS_AS(parse_index_list("bands", "1,x"), ConfigError);
  CHECK_THROWS_AS(parse_eta_grid("eta_grid", "1-2"), ConfigError);
  CHECK_THROWS_AS(parse_range("response_range", "4"), ConfigError);
  try {
    parse_int_list("steps_list", "3a");
  } catch (const ConfigError &e) {
    CHECK(e.field() == "steps_list");
  }
}

TEST_CASE("degradation from config") {
  RunConfig c;
  c.response = {1, 1, 2};
  CHECK(c.degradation(3).response(2) == doctest::Approx(0.5));
  CHECK_THROWS_AS(c.degradation(4), ConfigError);
  c.response.clear();
  c.response_range = std::pair<Index, Index>{2, 5};
  CHECK_THROWS_AS(c.degradation(4), ConfigError);
  CHECK(c.degradation(6).response(0) == 0.0);
  CHECK(command_name(Command::SweepEta) == "sweep-eta");
}

}
