#pragma once

#include "plrdiff/tensor3.hpp"

namespace plrdiff {

/// sqrt(4^2 / 8 / ln 2): Gaussian width matched to a scale-4 sensor MTF.
double default_blur_sigma();

/**
 * Spatial blur B, decimation D (factor `scale`) and spectral response r.
 *
 * Blur is circular convolution; decimation keeps pixels (i*scale, j*scale).
 */
struct DegradationModel {
  int scale = 4;
  Mat kernel;    ///< k x k, k odd, entries sum to 1
  Vec response;  ///< length S, nonnegative, sums to 1

  /// Throws ParameterError if any invariant is violated.
  void validate() const;
  /// validate() plus compatibility with an H x W x S image.
  void validate_for(Index height, Index width, Index bands) const;

  /// Response row as a 1 x S matrix, ready for mode3_mul.
  Mat response_row() const { return response.transpose(); }
};

/// Centered isotropic Gaussian, normalized to unit sum. `size` must be odd.
Mat gaussian_kernel(int size, double sigma);

/// Uniform average over bands [first, last] (1-based, inclusive) of an S-band image.
Vec uniform_response(Index bands, Index first, Index last);

/// Normalizes a nonnegative weight vector to unit sum.
Vec normalized_response(const Vec &weights);

DegradationModel make_degradation(int scale, int kernel_size, double sigma, Vec response);

/// Band-wise 2-D circular convolution.
Tensor3 blur(const Tensor3 &x, const Mat &kernel);
/// Circular convolution with the 180-degree rotated kernel; exact adjoint of blur.
Tensor3 blur_adjoint(const Tensor3 &x, const Mat &kernel);

Tensor3 downsample(const Tensor3 &x, int scale);
/// Zero-filled upsampling, exact adjoint of downsample.
Tensor3 downsample_adjoint(const Tensor3 &y, int scale);

/// H x W x 1 tensor x x_3 r.
Tensor3 pan_project(const Tensor3 &x, const Vec &response);
/// Adjoint of pan_project: spreads a single-band image over the response.
Tensor3 pan_project_adjoint(const Tensor3 &p, const Vec &response);

/// D(B(x)).
Tensor3 spatial_degrade(const Tensor3 &x, const DegradationModel &model);
/// B^T(D^T(y)).
Tensor3 spatial_degrade_adjoint(const Tensor3 &y, const DegradationModel &model);

struct Observation {
  Tensor3 lrms;
  Tensor3 pan;
};

/// Reduced-resolution pair: lrms = D(B(x)), pan = x x_3 r.
Observation wald_generate(const Tensor3 &x, const DegradationModel &model);

} // namespace plrdiff
