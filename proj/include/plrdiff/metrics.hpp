#pragma once

#include "plrdiff/tensor3.hpp"

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace plrdiff {

/// Full-reference quality indices between a reference and a restored image.
struct MetricReport {
  double psnr = 0.0;  ///< dB, +inf when identical
  double ssim = 0.0;
  double q2n = 0.0;
  double sam = 0.0;   ///< degrees
  double ergas = 0.0;
  double scc = 0.0;
  double mse = 0.0;
  /// Degenerate bands/pixels that were skipped, one line each.
  std::vector<std::string> warnings;
};

struct MetricOptions {
  double peak = 1.0;       ///< PSNR/SSIM dynamic range
  int scale = 4;           ///< ERGAS resolution ratio
  Index q2n_block = 32;
  double floor = 1e-12;    ///< |mean| / variance below this counts as degenerate
};

double mse(const Tensor3 &ref, const Tensor3 &out);

/// Per-band PSNR averaged over bands. +inf when the images are identical.
double psnr(const Tensor3 &ref, const Tensor3 &out, double peak = 1.0);

/// Mean spectral angle in degrees; pixels where either spectrum is zero are skipped.
double sam(const Tensor3 &ref, const Tensor3 &out, std::vector<std::string> *warnings = nullptr);

/// 100/scale * sqrt(mean_b (rmse_b / mean_b(ref))^2); bands with |mean| < floor are skipped.
double ergas(const Tensor3 &ref, const Tensor3 &out, int scale,
             std::vector<std::string> *warnings = nullptr, double floor = 1e-12);

/// Band-averaged Pearson correlation of 3x3-Laplacian high-pass images.
double scc(const Tensor3 &ref, const Tensor3 &out, std::vector<std::string> *warnings = nullptr,
           double floor = 1e-12);

/// Single-scale SSIM, 11x11 Gaussian window (sigma 1.5), circular boundary.
double ssim(const Tensor3 &ref, const Tensor3 &out, double peak = 1.0);

/// Q2^n: hypercomplex universal quality index averaged over block x block tiles.
double q2n(const Tensor3 &ref, const Tensor3 &out, Index block = 32);

/// Cayley-Dickson product of two hypercomplex numbers of equal power-of-two length.
Vec hypercomplex_mul(const Vec &a, const Vec &b);
Vec hypercomplex_conj(const Vec &a);

MetricReport evaluate(const Tensor3 &ref, const Tensor3 &out, const MetricOptions &opts = {});

/// Fixed column order: psnr,ssim,q2n,sam,ergas,scc,mse
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricReport &m);
std::string metrics_json(const MetricReport &m);

} // namespace plrdiff
