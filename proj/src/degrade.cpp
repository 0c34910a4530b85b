#include "plrdiff/degrade.hpp"

#include "plrdiff/error.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace plrdiff {

namespace {

constexpr double kSumTolerance = 1e-12;

Index wrap(Index i, Index n) {
  Index r = i % n;
  return r < 0 ? r + n : r;
}

void check_kernel(const Mat &kernel, const Tensor3 &x) {
  if (kernel.rows() != kernel.cols() || kernel.rows() % 2 == 0) {
    throw ParameterError("blur: kernel must be square with odd side, got " +
                         std::to_string(kernel.rows()) + "x" + std::to_string(kernel.cols()));
  }
  if (kernel.rows() > std::min(x.height(), x.width())) {
    throw ParameterError("blur: kernel side " + std::to_string(kernel.rows()) +
                         " exceeds image size " + std::to_string(x.height()) + "x" +
                         std::to_string(x.width()));
  }
}

// out(i,j,:) = sum_{u,v} k(u,v) x(i + sign*(c-u), j + sign*(c-v), :)
// sign = +1 is convolution, sign = -1 correlation (the adjoint).
Tensor3 circular_filter(const Tensor3 &x, const Mat &kernel, int sign) {
  check_kernel(kernel, x);
  const Index k = kernel.rows();
  const Index c = k / 2;
  const Index h = x.height(), w = x.width(), s = x.bands();
  Tensor3 out(h, w, s);
  const double *src = x.data().data();
  double *dst = out.data().data();
  for (Index u = 0; u < k; ++u) {
    for (Index v = 0; v < k; ++v) {
      const double tap = kernel(u, v);
      if (tap == 0.0) continue;
      for (Index i = 0; i < h; ++i) {
        const Index si = wrap(i + sign * (c - u), h);
        for (Index j = 0; j < w; ++j) {
          const Index sj = wrap(j + sign * (c - v), w);
          const double *in = src + (si * w + sj) * s;
          double *o = dst + (i * w + j) * s;
          for (Index b = 0; b < s; ++b) o[b] += tap * in[b];
        }
      }
    }
  }
  return out;
}

void check_scale(int scale) {
  if (scale < 1) throw ParameterError("scale must be >= 1, got " + std::to_string(scale));
}

} // namespace

double default_blur_sigma() { return std::sqrt(4.0 * 4.0 / 8.0 / std::numbers::ln2); }

void DegradationModel::validate() const {
  check_scale(scale);
  if (kernel.rows() == 0 || kernel.rows() != kernel.cols() || kernel.rows() % 2 == 0) {
    throw ParameterError("kernel must be square with odd side");
  }
  if (!kernel.allFinite() || std::abs(kernel.sum() - 1.0) > kSumTolerance) {
    throw ParameterError("kernel entries must sum to 1");
  }
  if (response.size() == 0) throw ParameterError("response is empty");
  if (!response.allFinite() || (response.array() < 0.0).any()) {
    throw ParameterError("response entries must be finite and nonnegative");
  }
  if (std::abs(response.sum() - 1.0) > kSumTolerance) {
    throw ParameterError("response entries must sum to 1, got " + std::to_string(response.sum()));
  }
}

void DegradationModel::validate_for(Index height, Index width, Index bands) const {
  validate();
  if (height % scale != 0 || width % scale != 0) {
    throw ShapeError("image " + std::to_string(height) + "x" + std::to_string(width) +
                     " is not divisible by scale " + std::to_string(scale));
  }
  if (kernel.rows() > std::min(height, width)) {
    throw ParameterError("kernel side exceeds image size");
  }
  if (response.size() != bands) {
    throw ShapeError("response has " + std::to_string(response.size()) + " entries but image has " +
                     std::to_string(bands) + " bands");
  }
}

Mat gaussian_kernel(int size, double sigma) {
  if (size < 1 || size % 2 == 0) {
    throw ParameterError("gaussian_kernel: size must be odd and positive, got " +
                         std::to_string(size));
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ParameterError("gaussian_kernel: sigma must be positive");
  }
  const int c = size / 2;
  Mat k(size, size);
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const double r2 = double((i - c) * (i - c) + (j - c) * (j - c));
      k(i, j) = std::exp(-r2 / (2.0 * sigma * sigma));
    }
  }
  return k / k.sum();
}

Vec uniform_response(Index bands, Index first, Index last) {
  if (first < 1 || last > bands || first > last) {
    throw ParameterError("response range [" + std::to_string(first) + ", " +
                         std::to_string(last) + "] invalid for " + std::to_string(bands) +
                         " bands");
  }
  Vec r = Vec::Zero(bands);
  r.segment(first - 1, last - first + 1).setConstant(1.0 / double(last - first + 1));
  return r;
}

Vec normalized_response(const Vec &weights) {
  if (weights.size() == 0 || (weights.array() < 0.0).any() || !(weights.sum() > 0.0)) {
    throw ParameterError("response weights must be nonnegative with a positive sum");
  }
  return weights / weights.sum();
}

DegradationModel make_degradation(int scale, int kernel_size, double sigma, Vec response) {
  DegradationModel m;
  m.scale = scale;
  m.kernel = gaussian_kernel(kernel_size, sigma);
  m.response = std::move(response);
  m.validate();
  return m;
}

Tensor3 blur(const Tensor3 &x, const Mat &kernel) { return circular_filter(x, kernel, +1); }

Tensor3 blur_adjoint(const Tensor3 &x, const Mat &kernel) { return circular_filter(x, kernel, -1); }

Tensor3 downsample(const Tensor3 &x, int scale) {
  check_scale(scale);
  if (x.height() % scale != 0 || x.width() % scale != 0) {
    throw ShapeError("downsample: " + std::to_string(x.height()) + "x" +
                     std::to_string(x.width()) + " not divisible by " + std::to_string(scale));
  }
  const Index h = x.height() / scale, w = x.width() / scale;
  Tensor3 out(h, w, x.bands());
  for (Index i = 0; i < h; ++i) {
    for (Index j = 0; j < w; ++j) {
      for (Index b = 0; b < x.bands(); ++b) out(i, j, b) = x(i * scale, j * scale, b);
    }
  }
  return out;
}

Tensor3 downsample_adjoint(const Tensor3 &y, int scale) {
  check_scale(scale);
  Tensor3 out(y.height() * scale, y.width() * scale, y.bands());
  for (Index i = 0; i < y.height(); ++i) {
    for (Index j = 0; j < y.width(); ++j) {
      for (Index b = 0; b < y.bands(); ++b) out(i * scale, j * scale, b) = y(i, j, b);
    }
  }
  return out;
}

Tensor3 pan_project(const Tensor3 &x, const Vec &response) {
  if (response.size() != x.bands()) {
    throw ShapeError("pan_project: response has " + std::to_string(response.size()) +
                     " entries but image has " + std::to_string(x.bands()) + " bands");
  }
  return mode3_mul(x, response.transpose());
}

Tensor3 pan_project_adjoint(const Tensor3 &p, const Vec &response) {
  return mode3_mul_adjoint(p, response.transpose());
}

// Both fused routines only touch the pixels that survive decimation, so they
// cost h*w*k^2 per band instead of H*W*k^2.
Tensor3 spatial_degrade(const Tensor3 &x, const DegradationModel &model) {
  check_kernel(model.kernel, x);
  const int q = model.scale;
  check_scale(q);
  if (x.height() % q != 0 || x.width() % q != 0) {
    throw ShapeError("spatial_degrade: image not divisible by scale " + std::to_string(q));
  }
  const Index k = model.kernel.rows(), c = k / 2;
  const Index H = x.height(), W = x.width(), s = x.bands();
  Tensor3 out(H / q, W / q, s);
  for (Index i = 0; i < out.height(); ++i) {
    for (Index j = 0; j < out.width(); ++j) {
      double *o = &out(i, j, 0);
      for (Index u = 0; u < k; ++u) {
        const Index si = wrap(i * q + c - u, H);
        for (Index v = 0; v < k; ++v) {
          const double tap = model.kernel(u, v);
          const double *in = x.data().data() + (si * W + wrap(j * q + c - v, W)) * s;
          for (Index b = 0; b < s; ++b) o[b] += tap * in[b];
        }
      }
    }
  }
  return out;
}

Tensor3 spatial_degrade_adjoint(const Tensor3 &y, const DegradationModel &model) {
  const int q = model.scale;
  check_scale(q);
  const Index H = y.height() * q, W = y.width() * q, s = y.bands();
  const Index k = model.kernel.rows(), c = k / 2;
  if (k % 2 == 0 || k != model.kernel.cols() || k > std::min(H, W)) {
    throw ParameterError("spatial_degrade_adjoint: invalid kernel for image size");
  }
  Tensor3 out(H, W, s);
  for (Index i = 0; i < y.height(); ++i) {
    for (Index j = 0; j < y.width(); ++j) {
      const double *in = y.data().data() + (i * y.width() + j) * s;
      for (Index u = 0; u < k; ++u) {
        const Index di = wrap(i * q + c - u, H);
        for (Index v = 0; v < k; ++v) {
          const double tap = model.kernel(u, v);
          double *o = &out(di, wrap(j * q + c - v, W), 0);
          for (Index b = 0; b < s; ++b) o[b] += tap * in[b];
        }
      }
    }
  }
  return out;
}

Observation wald_generate(const Tensor3 &x, const DegradationModel &model) {
  model.validate_for(x.height(), x.width(), x.bands());
  return {spatial_degrade(x, model), pan_project(x, model.response)};
}

} // namespace plrdiff
