#include "plrdiff/synthetic.hpp"

#include "plrdiff/error.hpp"
#include "plrdiff/subspace.hpp"

#include <cmath>
#include <numbers>

namespace plrdiff {

Tensor3 smooth_texture(Index height, Index width, Index bands, std::mt19937_64 &rng) {
  constexpr int kWaves = 12;
  constexpr int kMaxFreq = 6;
  std::uniform_int_distribution<int> freq(-kMaxFreq, kMaxFreq);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> gauss;

  Tensor3 x(height, width, bands);
  for (int k = 0; k < kWaves; ++k) {
    int fy = 0, fx = 0;
    while (fy == 0 && fx == 0) {
      fy = freq(rng);
      fx = freq(rng);
    }
    const double amp = 1.0 / std::hypot(double(fy), double(fx));
    const double ph = phase(rng);
    // Shared spatial pattern with per-band weights keeps bands correlated.
    Vec weight(bands);
    const double common = gauss(rng);
    for (Index b = 0; b < bands; ++b) weight(b) = amp * (common + 0.5 * gauss(rng));
    for (Index i = 0; i < height; ++i) {
      for (Index j = 0; j < width; ++j) {
        const double v = std::sin(2.0 * std::numbers::pi * (fy * double(i) / double(height) +
                                                            fx * double(j) / double(width)) + ph);
        for (Index b = 0; b < bands; ++b) x(i, j, b) += weight(b) * v;
      }
    }
  }
  auto v = x.vector();
  const double mean = v.mean();
  const double sd = std::sqrt((v.array() - mean).square().mean());
  v.array() = 0.5 + 0.2 * (v.array() - mean) / (sd > 0.0 ? sd : 1.0);
  return x;
}

std::vector<Tensor3> texture_dataset(std::size_t count, Index height, Index width, Index bands,
                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Tensor3> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(smooth_texture(height, width, bands, rng));
  return out;
}

Mat smooth_spectra(Index total_bands, Index rank, std::mt19937_64 &rng) {
  if (rank < 1 || total_bands < 1) throw ParameterError("smooth_spectra: sizes must be positive");
  std::uniform_real_distribution<double> jitter(0.8, 1.2);
  const double width = double(total_bands) / double(rank + 1);
  Mat e(total_bands, rank);
  for (Index j = 0; j < rank; ++j) {
    const double centre = double(j + 1) * double(total_bands) / double(rank + 1);
    const double w = width * jitter(rng);
    for (Index b = 0; b < total_bands; ++b) {
      const double d = (double(b + 1) - centre) / w;
      e(b, j) = std::exp(-0.5 * d * d);
    }
  }
  return e;
}

Mat anchored_spectra(Index total_bands, const std::vector<Index> &selected, std::mt19937_64 &rng) {
  const Index rank = static_cast<Index>(selected.size());
  Mat e = smooth_spectra(total_bands, rank, rng);
  for (Index j = 0; j < rank; ++j) {
    const Index row = selected[static_cast<std::size_t>(j)];
    if (row < 0 || row >= total_bands) throw ParameterError("anchored_spectra: band out of range");
    e.row(row) = Vec::Unit(rank, j);
  }
  return e;
}

Tensor3 zero_order_hold(const Tensor3 &lrms, int scale) {
  if (scale < 1) throw ParameterError("zero_order_hold: scale must be >= 1");
  const Index q = scale;
  Tensor3 out(lrms.height() * q, lrms.width() * q, lrms.bands());
  for (Index i = 0; i < out.height(); ++i) {
    for (Index j = 0; j < out.width(); ++j) {
      for (Index b = 0; b < out.bands(); ++b) out(i, j, b) = lrms(i / q, j / q, b);
    }
  }
  return out;
}

SyntheticScene make_scene(Tensor3 base, Mat spectra, DegradationModel model) {
  SyntheticScene scene;
  scene.hrms = reconstruct(base, spectra);
  model.validate_for(scene.hrms.height(), scene.hrms.width(), scene.hrms.bands());
  auto obs = wald_generate(scene.hrms, model);
  scene.base = std::move(base);
  scene.spectra = std::move(spectra);
  scene.model = std::move(model);
  scene.lrms = std::move(obs.lrms);
  scene.pan = std::move(obs.pan);
  return scene;
}

GaussianBenchmark make_gaussian_benchmark(const GaussianBenchmarkOptions &opts) {
  if (!(opts.variance > 0.0)) throw ParameterError("gaussian benchmark: variance must be > 0");
  std::mt19937_64 rng(opts.seed);
  GaussianBenchmark bench;
  bench.prior.mean = smooth_texture(opts.height, opts.width, opts.rank, rng);
  bench.prior.variance = opts.variance;
  bench.truth = bench.prior.mean;
  bench.truth.axpy(std::sqrt(opts.variance), random_normal(opts.height, opts.width, opts.rank, rng));

  const BandSelection sel = select_band_indices(opts.total_bands, opts.rank);
  bench.e = anchored_spectra(opts.total_bands, sel.zero_based(), rng);

  auto model = make_degradation(opts.scale, static_cast<int>(opts.kernel_size), opts.sigma,
                                uniform_response(opts.total_bands, 1, opts.total_bands));
  bench.scene = make_scene(bench.truth, bench.e, std::move(model));
  return bench;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t point) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (point + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

} // namespace plrdiff
