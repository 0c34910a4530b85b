#include "doctest.h"
#include "support.hpp"

#include "plrdiff/error.hpp"
#include "plrdiff/experiments.hpp"
#include "plrdiff/metrics.hpp"
#include "plrdiff/synthetic.hpp"

#include <atomic>
#include <sstream>

using namespace plrdiff;
using namespace plrdiff::testing;

namespace {

// Gaussian prior centred on the upsampled selected LRMS bands.
PredictorFactory zoh_prior(const Tensor3 &lrms, int scale, double variance) {
  return [lrms, scale, variance](const BandList &bands) {
    return std::make_shared<GaussianPredictor>(
        GaussianPrior{zero_order_hold(extract_base(lrms, bands), scale), variance});
  };
}

SweepContext context(const SyntheticScene &scene, double variance, int steps) {
  SweepContext ctx;
  ctx.lrms = scene.lrms;
  ctx.pan = scene.pan;
  ctx.reference = scene.hrms;
  ctx.model = scene.model;
  ctx.bands = BandList{scene.lrms.bands(), select_band_indices(scene.lrms.bands(), 3).indices()};
  ctx.predictor = zoh_prior(scene.lrms, scene.model.scale, variance);
  ctx.guidance = {10.0, 20.0, VjpMode::Full, 1e-12};
  ctx.steps = steps;
  ctx.base_seed = 5;
  return ctx;
}

SyntheticScene smooth_scene(std::uint64_t seed, Index size = 16) {
  std::mt19937_64 rng(seed);
  Tensor3 base = smooth_texture(size, size, 3, rng);
  Mat e = smooth_spectra(8, 3, rng);
  return make_scene(std::move(base), std::move(e),
                    make_degradation(2, 3, 1.0, uniform_response(8, 1, 8)));
}

} // namespace

TEST_SUITE("experiments") {

TEST_CASE("parallel_for runs every index once and rethrows in index order") {
  for (int workers : {1, 3}) {
    std::vector<std::atomic<int>> hits(50);
    parallel_for(50, workers, [&](std::size_t i) { ++hits[i]; });
    for (auto &h : hits) CHECK(h == 1);
  }
  try {
    parallel_for(10, 2, [](std::size_t i) {
      if (i == 7) throw std::runtime_error("seven");
      if (i == 3) throw std::runtime_error("three");
    });
    FAIL("expected an exception");
  } catch (const std::runtime_error &e) {
    CHECK(std::string(e.what()) == "three");
  }
  CHECK_THROWS_AS(parallel_for(1, 0, [](std::size_t) {}), ParameterError);
  CHECK_NOTHROW(parallel_for(0, 2, [](std::size_t) { throw 1; }));
}

TEST_CASE("median") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK_THROWS_AS(median({}), ParameterError);
}

TEST_CASE("derived seeds are reproducible and distinct") {
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
  CHECK(derive_seed(1, 2) != derive_seed(2, 2));
}

TEST_CASE("eta sweep") {
  const SyntheticScene scene = smooth_scene(1);
  SweepContext ctx = context(scene, 0.05, 40);
  const std::vector<std::pair<double, double>> grid{{4, 8}, {1, 2}, {20, 40}};
  const auto rows = sweep_eta(ctx, grid);
  REQUIRE(rows.size() == 4);  // unguided baseline added
  CHECK(rows[0].eta1 == 0.0);
  CHECK(rows[0].eta2 == 0.0);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i - 1].eta1 < rows[i].eta1);
  double best = rows[0].mse;
  for (const auto &r : rows) best = std::min(best, r.mse);
  CHECK(best <= rows[0].mse);

  const std::string csv = eta_csv(rows);
  CHECK(csv.rfind("eta1,eta2,mse,seed\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);

  // Worker count does not change results.
  ctx.workers = 3;
  const auto again = sweep_eta(ctx, grid);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(again[i].mse == rows[i].mse);
    CHECK(again[i].seed == rows[i].seed);
  }
}

TEST_CASE("band sweep") {
  const SyntheticScene scene = smooth_scene(2);
  const SweepContext ctx = context(scene, 0.05, 30);
  const auto rows = sweep_bands(ctx, {{1, 2, 3}, {3, 3, 5}});
  REQUIRE(rows.size() == 3);  // default (2,4,6) added
  bool has_default = false;
  for (const auto &r : rows) {
    has_default |= r.indices == std::vector<Index>{2, 4, 6};
    CHECK(std::isfinite(r.mse));
  }
  CHECK(has_default);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i - 1].mse <= rows[i].mse);
  const std::string csv = bands_csv(rows);
  CHECK(csv.rfind("indices,zero_based,mse,seed\n", 0) == 0);
  CHECK(csv.find("\"(2,4,6)\",\"(1,3,5)\"") != std::string::npos);
}

TEST_CASE("dispersed bands beat clustered bands") {
  std::vector<double> dispersed, clustered;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SyntheticScene scene = smooth_scene(100 + seed);
    SweepContext ctx = context(scene, 0.05, 100);
    ctx.base_seed = seed;
    const auto rows = sweep_bands(ctx, {{1, 2, 3}, {6, 7, 8}});
    for (const auto &r : rows) {
      if (r.indices == std::vector<Index>{2, 4, 6}) dispersed.push_back(r.mse);
      else clustered.push_back(r.mse);
    }
  }
  CHECK(median(dispersed) < median(clustered));
}

TEST_CASE("step sweep") {
  const SyntheticScene scene = smooth_scene(3);
  const SweepContext ctx = context(scene, 0.05, 0);
  const auto rows = sweep_steps(ctx, {100, 30, 60});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].steps == 30);
  CHECK(rows[2].steps == 100);
  for (const auto &r : rows) CHECK(r.seconds > 0.0);
  const std::string csv = steps_csv(rows);
  CHECK(csv.rfind("T,mse,seconds\n", 0) == 0);
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) CHECK(std::count(line.begin(), line.end(), ',') == 2);
}

TEST_CASE("sweep context checks") {
  const SyntheticScene scene = smooth_scene(4);
  SweepContext ctx = context(scene, 0.05, 30);
  ctx.repeats = 0;
  CHECK_THROWS_AS(sweep_steps(ctx, {30}), ParameterError);
  ctx.repeats = 1;
  ctx.reference = Tensor3(4, 4, 8);
  CHECK_THROWS_AS(sweep_steps(ctx, {30}), ShapeError);
}

}
