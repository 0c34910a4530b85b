#pragma once

#include "plrdiff/degrade.hpp"
#include "plrdiff/denoiser.hpp"
#include "plrdiff/tensor3.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace plrdiff {

/// Periodic band-correlated texture: a random sum of integer-frequency
/// sinusoids with 1/f amplitudes, shifted and scaled to mean 0.5, std 0.2.
Tensor3 smooth_texture(Index height, Index width, Index bands, std::mt19937_64 &rng);

std::vector<Tensor3> texture_dataset(std::size_t count, Index height, Index width, Index bands,
                                     std::uint64_t seed);

/// S x s nonnegative matrix of smooth spectral profiles: column j is a
/// Gaussian bump over the band axis centred at band (j + 1) S / (s + 1).
Mat smooth_spectra(Index total_bands, Index rank, std::mt19937_64 &rng);

/// smooth_spectra with the rows at `selected` (0-based) replaced by unit
/// vectors, so those bands of base x_3 E reproduce the base exactly.
Mat anchored_spectra(Index total_bands, const std::vector<Index> &selected, std::mt19937_64 &rng);

/// Nearest-neighbour upsampling by `scale` (pixel (i, j) copies (i/q, j/q)).
Tensor3 zero_order_hold(const Tensor3 &lrms, int scale);

/// Exactly rank-s HRMS with Wald-protocol observations.
struct SyntheticScene {
  Tensor3 base;   ///< H x W x s
  Mat spectra;    ///< S x s
  Tensor3 hrms;   ///< base x_3 spectra
  DegradationModel model;
  Tensor3 lrms;
  Tensor3 pan;
};

SyntheticScene make_scene(Tensor3 base, Mat spectra, DegradationModel model);

/**
 * Linear-Gaussian test problem: a* ~ N(mu, var I) on H x W x s, known E whose
 * rows at `selected` are unit vectors, and noiseless observations of a*.
 */
struct GaussianBenchmark {
  GaussianPrior prior;
  Tensor3 truth;  ///< a*
  Mat e;
  SyntheticScene scene;
};

struct GaussianBenchmarkOptions {
  Index height = 16;
  Index width = 16;
  Index rank = 3;
  Index total_bands = 6;
  int scale = 2;
  Index kernel_size = 3;
  double sigma = 1.0;
  double variance = 0.5;
  std::uint64_t seed = 7;
};

GaussianBenchmark make_gaussian_benchmark(const GaussianBenchmarkOptions &opts);

/// splitmix64 finalizer over (base, point): independent reproducible seeds.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t point);

} // namespace plrdiff
