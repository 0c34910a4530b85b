#include "doctest.h"
#include "support.hpp"

#include "plrdiff/io.hpp"
#include "plrdiff/sampler.hpp"
#include "plrdiff/synthetic.hpp"

#include "json.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>

using namespace plrdiff;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::path(PLRDIFF_TEST_TMP) / "cli";

int run_cli(const std::string &args) {
  fs::create_directories(kRoot);
  const std::string cmd = std::string(PLRDIFF_CLI_PATH) + " " + args + " >>" +
                          (kRoot / "log.txt").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path &p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

std::string at(const std::string &name) { return (kRoot / name).string(); }

// 32x32x6 scene with its scale-2 observations, created once.
void ensure_scene() {
  if (fs::exists(kRoot / "obs" / "pan.arr")) return;
  REQUIRE(run_cli("synthesize --height 32 --width 32 --total-bands 6 --scale 2 --seed 3 --output " +
                  at("scene")) == 0);
  REQUIRE(run_cli("degrade --hrms " + at("scene/hrms.arr") +
                  " --scale 2 --kernel-size 3 --sigma 1 --output " + at("obs")) == 0);
}

std::string sharpen_args() {
  return "--lrms " + at("obs/lrms.arr") + " --pan " + at("obs/pan.arr") +
         " --scale 2 --kernel-size 3 --sigma 1 --predictor gaussian --prior-variance 0.05 --steps 50";
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("degrade writes the reduced-resolution pair") {
  REQUIRE(run_cli("synthesize --height 256 --width 256 --total-bands 8 --output " + at("big")) == 0);
  REQUIRE(run_cli("degrade --hrms " + at("big/hrms.arr") + " --output " + at("big_obs")) == 0);
  const Tensor3 lrms = load_array(kRoot / "big_obs/lrms.arr");
  const Tensor3 pan = load_array(kRoot / "big_obs/pan.arr");
  CHECK(lrms.height() == 64);
  CHECK(lrms.width() == 64);
  CHECK(lrms.bands() == 8);
  CHECK(pan.height() == 256);
  CHECK(pan.bands() == 1);
  const auto prov = nlohmann::json::parse(slurp(kRoot / "big_obs/provenance.json"));
  CHECK(prov["command"] == "degrade");
  CHECK(prov["config"]["scale"] == 4);

  REQUIRE(run_cli("degrade --hrms " + at("big/hrms.arr") + " --scale 8 --output " + at("big_obs8")) == 0);
  CHECK(load_array(kRoot / "big_obs8/lrms.arr").height() == 32);
  REQUIRE(run_cli("degrade --hrms " + at("big/hrms.arr") +
                  " --kernel-size 17 --sigma 3 --output " + at("big_obs17")) == 0);
  CHECK(load_array(kRoot / "big_obs17/lrms.arr").height() == 64);
}

TEST_CASE("provenance reruns reproduce outputs byte for byte") {
  ensure_scene();
  REQUIRE(run_cli("pansharpen " + sharpen_args() + " --eta1 5 --eta2 10 --vjp-mode full --reference " +
                  at("scene/hrms.arr") + " --export-bands 1,6 --output " + at("run1")) == 0);
  for (const char *f : {"hrms.arr", "a0.arr", "E.csv", "trace.csv", "metrics.json", "metrics.csv",
                        "band_1.pgm", "band_6.pgm", "provenance.json"}) {
    CHECK(fs::exists(kRoot / "run1" / f));
  }
  REQUIRE(run_cli("pansharpen --config " + at("run1/provenance.json") + " --output " + at("run2")) == 0);
  CHECK(slurp(kRoot / "run1/hrms.arr") == slurp(kRoot / "run2/hrms.arr"));
  CHECK(slurp(kRoot / "run1/E.csv") == slurp(kRoot / "run2/E.csv"));

  REQUIRE(run_cli("degrade --config " + at("obs/provenance.json") + " --output " + at("obs_again")) == 0);
  CHECK(slurp(kRoot / "obs/lrms.arr") == slurp(kRoot / "obs_again/lrms.arr"));
}

TEST_CASE("guidance-off output equals the unconditional sample") {
  ensure_scene();
  REQUIRE(run_cli("pansharpen " + sharpen_args() + " --eta1 0 --eta2 0 --seed 11 --output " +
                  at("off")) == 0);
  const Tensor3 lrms = load_array(kRoot / "obs/lrms.arr");
  const BandList bands{6, select_band_indices(6, 3).indices()};
  const GaussianPredictor prior({zero_order_hold(extract_base(lrms, bands), 2), 0.05});
  const Tensor3 a0 = ancestral_sample(32, 32, 3, prior, linear_schedule(50), 11);
  CHECK(load_array(kRoot / "off/a0.arr") == a0);
}

TEST_CASE("flags override the config file") {
  ensure_scene();
  std::ofstream(kRoot / "cfg.json") << R"({"steps": 40, "eta1": 0.5, "predictor": "gaussian"})";
  REQUIRE(run_cli("pansharpen " + sharpen_args() + " --config " + at("cfg.json") +
                  " --eta1 3 --output " + at("over")) == 0);
  const auto prov = nlohmann::json::parse(slurp(kRoot / "over/provenance.json"));
  CHECK(prov["config"]["eta1"] == 3.0);
  CHECK(prov["config"]["steps"] == 50);  // given as a flag in sharpen_args
}

TEST_CASE("exit codes") {
  ensure_scene();
  CHECK(run_cli("pansharpen --lrms " + at("obs/lrms.arr") + " --pan " + at("nope.arr") +
                " --predictor gaussian --output " + at("x")) == 2);
  CHECK(run_cli("pansharpen " + sharpen_args() + " --eta1 -1 --output " + at("x")) == 2);
  CHECK(run_cli("pansharpen " + sharpen_args() + " --vjp-mode sideways --output " + at("x")) == 2);
  CHECK(run_cli("pansharpen " + sharpen_args() + " --no-such-flag 1 --output " + at("x")) == 2);
  CHECK(run_cli("sweep-steps " + sharpen_args() + " --steps-list 300,10 --reference " +
                at("scene/hrms.arr") + " --output " + at("x")) == 2);
  CHECK(run_cli("pansharpen " + sharpen_args() + " --eta1 1e308 --eta2 1e308 --output " + at("x")) == 3);

  fs::create_directories(kRoot / "trunc");
  fs::copy_file(kRoot / "obs/lrms.arr", kRoot / "trunc/lrms.arr", fs::copy_options::overwrite_existing);
  fs::copy_file(kRoot / "obs/lrms.arr.json", kRoot / "trunc/lrms.arr.json",
                fs::copy_options::overwrite_existing);
  fs::resize_file(kRoot / "trunc/lrms.arr", 100);
  CHECK(run_cli("pansharpen --lrms " + at("trunc/lrms.arr") + " --pan " + at("obs/pan.arr") +
                " --scale 2 --kernel-size 3 --predictor gaussian --steps 50 --output " + at("x")) == 4);
  CHECK(run_cli("--version") == 0);
}

TEST_CASE("sweeps write their tables") {
  ensure_scene();
  const std::string common = sharpen_args() + " --reference " + at("scene/hrms.arr") + " --vjp-mode full";
  REQUIRE(run_cli("sweep-eta " + common + " --eta-grid 1:2,10:20 --output " + at("se")) == 0);
  const std::string eta = slurp(kRoot / "se/sweep_eta.csv");
  CHECK(eta.rfind("eta1,eta2,mse,seed\n0,0,", 0) == 0);
  CHECK(std::count(eta.begin(), eta.end(), '\n') == 4);

  REQUIRE(run_cli("sweep-bands " + common + " --band-lists \"1,2,3;3,3,5\" --output " + at("sb")) == 0);
  const std::string bands = slurp(kRoot / "sb/sweep_bands.csv");
  CHECK(bands.find("\"(2,4,6)\",\"(1,3,5)\"") != std::string::npos);
  CHECK(bands.find("\"(3,3,5)\"") != std::string::npos);

  REQUIRE(run_cli("sweep-steps " + common + " --steps-list 30,60 --output " + at("ss")) == 0);
  CHECK(slurp(kRoot / "ss/sweep_steps.csv").rfind("T,mse,seconds\n30,", 0) == 0);
}

TEST_CASE("train and sample with the tiny denoiser, then score") {
  REQUIRE(run_cli("train-denoiser --train-steps 30 --train-count 4 --train-size 16 --channels 4 "
                  "--embedding 4 --steps 100 --weights " + at("tiny.bin") + " --output " + at("train")) == 0);
  CHECK(fs::exists(kRoot / "tiny.bin"));
  CHECK(slurp(kRoot / "train/train_loss.csv").rfind("epoch,loss\n", 0) == 0);
  ensure_scene();
  REQUIRE(run_cli("pansharpen --lrms " + at("obs/lrms.arr") + " --pan " + at("obs/pan.arr") +
                  " --scale 2 --kernel-size 3 --sigma 1 --steps 30 --weights " + at("tiny.bin") +
                  " --output " + at("tiny_run")) == 0);
  REQUIRE(run_cli("metrics --reference " + at("scene/hrms.arr") + " --input " + at("tiny_run/hrms.arr") +
                  " --output " + at("m")) == 0);
  const auto m = nlohmann::json::parse(slurp(kRoot / "m/metrics.json"));
  CHECK(m["mse"].get<double>() > 0.0);
  CHECK(run_cli("metrics --reference " + at("scene/hrms.arr") + " --input " + at("obs/lrms.arr") +
                " --output " + at("m")) == 2);
}

}
