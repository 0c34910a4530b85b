#include "plrdiff/experiments.hpp"

#include "plrdiff/error.hpp"
#include "plrdiff/metrics.hpp"
#include "plrdiff/synthetic.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <sstream>
#include <thread>

namespace plrdiff {

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)> &task) {
  if (workers < 1) throw ParameterError("parallel_for: workers must be >= 1");
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(workers), count);
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n; ++w) pool.emplace_back(worker);
    for (auto &t : pool) t.join();
  }
  for (auto &e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

double median(std::vector<double> values) {
  if (values.empty()) throw ParameterError("median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

Tensor3 run_with_bands(const SweepContext &ctx, const BandList &bands, const GuidanceConfig &cfg,
                       int steps, std::uint64_t seed) {
  if (!ctx.predictor) throw ParameterError("sweep: no predictor factory");
  const Mat e = estimate_coefficients(ctx.lrms, bands);
  const auto predictor = ctx.predictor(bands);
  const NoiseSchedule sched = ctx.schedule(steps);
  return plrdiff_sample_with_coefficients(ctx.lrms, ctx.pan, e, ctx.model, *predictor, sched, cfg,
                                          seed)
      .hrms;
}

namespace {

struct Summary {
  double mse;
  double seconds;
  std::uint64_t first_seed;
};

// Runs `repeats` seeds for one point: median MSE, fastest wall-clock.
Summary run_point(const SweepContext &ctx, std::uint64_t point, const BandList &bands,
                  const GuidanceConfig &cfg, int steps) {
  std::vector<double> errs, secs;
  const std::uint64_t point_seed = derive_seed(ctx.base_seed, point);
  for (int r = 0; r < ctx.repeats; ++r) {
    const std::uint64_t seed = derive_seed(point_seed, static_cast<std::uint64_t>(r));
    const auto t0 = std::chrono::steady_clock::now();
    const Tensor3 out = run_with_bands(ctx, bands, cfg, steps, seed);
    secs.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    errs.push_back(mse(ctx.reference, out));
  }
  return {median(errs), *std::min_element(secs.begin(), secs.end()), derive_seed(point_seed, 0)};
}

void check_context(const SweepContext &ctx) {
  if (ctx.repeats < 1) throw ParameterError("sweep: repeats must be >= 1");
  if (!ctx.reference.same_shape(Tensor3(ctx.pan.height(), ctx.pan.width(), ctx.lrms.bands()))) {
    throw ShapeError("sweep: reference must be H x W x S matching PAN and LRMS");
  }
}

std::string join(const std::vector<Index> &v, Index offset) {
  std::string s = "(";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i] + offset);
  return s + ")";
}

} // namespace

std::vector<EtaRow> sweep_eta(const SweepContext &ctx, std::vector<std::pair<double, double>> grid) {
  check_context(ctx);
  if (std::find(grid.begin(), grid.end(), std::pair{0.0, 0.0}) == grid.end()) {
    grid.insert(grid.begin(), {0.0, 0.0});
  }
  std::vector<EtaRow> rows(grid.size());
  parallel_for(grid.size(), ctx.workers, [&](std::size_t i) {
    GuidanceConfig cfg = ctx.guidance;
    cfg.eta1 = grid[i].first;
    cfg.eta2 = grid[i].second;
    const Summary s = run_point(ctx, i, ctx.bands, cfg, ctx.steps);
    rows[i] = {cfg.eta1, cfg.eta2, s.mse, s.first_seed};
  });
  std::sort(rows.begin(), rows.end(), [](const EtaRow &a, const EtaRow &b) {
    return std::tie(a.eta1, a.eta2) < std::tie(b.eta1, b.eta2);
  });
  return rows;
}

std::vector<BandRow> sweep_bands(const SweepContext &ctx, std::vector<std::vector<Index>> lists) {
  check_context(ctx);
  if (std::find(lists.begin(), lists.end(), ctx.bands.indices) == lists.end()) {
    lists.insert(lists.begin(), ctx.bands.indices);
  }
  std::vector<BandRow> rows(lists.size());
  parallel_for(lists.size(), ctx.workers, [&](std::size_t i) {
    const BandList bands{ctx.lrms.bands(), lists[i]};
    const Summary s = run_point(ctx, i, bands, ctx.guidance, ctx.steps);
    rows[i] = {lists[i], s.mse, s.first_seed};
  });
  std::sort(rows.begin(), rows.end(), [](const BandRow &a, const BandRow &b) {
    return std::tie(a.mse, a.indices) < std::tie(b.mse, b.indices);
  });
  return rows;
}

std::vector<StepRow> sweep_steps(const SweepContext &ctx, const std::vector<int> &step_counts) {
  check_context(ctx);
  std::vector<StepRow> rows(step_counts.size());
  parallel_for(step_counts.size(), ctx.workers, [&](std::size_t i) {
    const int t = step_counts[i];
    const Summary s = run_point(ctx, static_cast<std::uint64_t>(t), ctx.bands, ctx.guidance, t);
    rows[i] = {t, s.mse, s.seconds, s.first_seed};
  });
  std::sort(rows.begin(), rows.end(),
            [](const StepRow &a, const StepRow &b) { return a.steps < b.steps; });
  return rows;
}

std::string eta_csv(const std::vector<EtaRow> &rows) {
  std::ostringstream os;
  os.precision(17);
  os << "eta1,eta2,mse,seed\n";
  for (const auto &r : rows) os << r.eta1 << ',' << r.eta2 << ',' << r.mse << ',' << r.seed << '\n';
  return os.str();
}

std::string bands_csv(const std::vector<BandRow> &rows) {
  std::ostringstream os;
  os.precision(17);
  os << "indices,zero_based,mse,seed\n";
  for (const auto &r : rows) {
    os << '"' << join(r.indices, 0) << "\",\"" << join(r.indices, -1) << "\"," << r.mse << ','
       << r.seed << '\n';
  }
  return os.str();
}

std::string steps_csv(const std::vector<StepRow> &rows) {
  std::ostringstream os;
  os.precision(17);
  os << "T,mse,seconds\n";
  for (const auto &r : rows) os << r.steps << ',' << r.mse << ',' << r.seconds << '\n';
  return os.str();
}

} // namespace plrdiff
