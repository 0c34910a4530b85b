#pragma once

#include "plrdiff/degrade.hpp"
#include "plrdiff/denoiser.hpp"
#include "plrdiff/sampler.hpp"
#include "plrdiff/subspace.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace plrdiff {

/// Runs tasks 0..count-1 on `workers` threads. Each task index runs exactly
/// once; the first exception (by task index) is rethrown after all finish.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)> &task);

/// Builds the predictor used for a given band selection (the Gaussian prior
/// mean depends on which bands form the base tensor).
using PredictorFactory = std::function<std::shared_ptr<const NoisePredictor>(const BandList &)>;

/// Shared inputs for every sweep. Each point is run `repeats` times with
/// seeds derive_seed(derive_seed(base_seed, point), r) and summarised by the
/// median.
struct SweepContext {
  Tensor3 lrms;
  Tensor3 pan;
  Tensor3 reference;  ///< HRMS the MSE is measured against
  DegradationModel model;
  BandList bands;     ///< default selection
  PredictorFactory predictor;
  GuidanceConfig guidance;
  std::function<NoiseSchedule(int)> schedule = [](int t) { return linear_schedule(t); };
  int steps = 1000;
  std::uint64_t base_seed = 0;
  int repeats = 1;
  int workers = 1;
};

struct EtaRow {
  double eta1 = 0.0;
  double eta2 = 0.0;
  double mse = 0.0;
  std::uint64_t seed = 0;  ///< seed of the first repeat
};

struct BandRow {
  std::vector<Index> indices;  ///< 1-based
  double mse = 0.0;
  std::uint64_t seed = 0;
};

struct StepRow {
  int steps = 0;
  double mse = 0.0;
  double seconds = 0.0;  ///< fastest wall-clock run (least disturbed by other load)
  std::uint64_t seed = 0;
};

/// One guided run with an explicit band list; returns the restored HRMS.
Tensor3 run_with_bands(const SweepContext &ctx, const BandList &bands, const GuidanceConfig &cfg,
                       int steps, std::uint64_t seed);

/// Adds the unguided (0, 0) point when absent. Rows in ascending (eta1, eta2) order.
std::vector<EtaRow> sweep_eta(const SweepContext &ctx, std::vector<std::pair<double, double>> grid);

/// Adds the context's default selection when absent. Rows sorted by MSE.
std::vector<BandRow> sweep_bands(const SweepContext &ctx, std::vector<std::vector<Index>> lists);

/// Rows in ascending T order.
std::vector<StepRow> sweep_steps(const SweepContext &ctx, const std::vector<int> &step_counts);

std::string eta_csv(const std::vector<EtaRow> &rows);
/// Columns: indices (1-based), zero_based, mse, seed.
std::string bands_csv(const std::vector<BandRow> &rows);
std::string steps_csv(const std::vector<StepRow> &rows);

/// Median of a nonempty sample (mean of the middle pair for even sizes).
double median(std::vector<double> values);

} // namespace plrdiff
