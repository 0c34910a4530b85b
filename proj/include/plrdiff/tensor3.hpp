#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace plrdiff {

using Index = Eigen::Index;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/**
 * Dense height x width x bands array of doubles.
 *
 * Storage is pixel-major with the band index fastest:
 *   offset(row, col, band) = (row * width + col) * bands + band
 * which is also the on-disk order of array files. The mode-3 unfolding
 * is therefore a zero-copy bands x (height*width) column-major view.
 */
class Tensor3 {
public:
  Tensor3() = default;
  Tensor3(Index height, Index width, Index bands, double fill = 0.0);

  static Tensor3 constant(Index height, Index width, Index bands, double value) {
    return Tensor3(height, width, bands, value);
  }

  Index height() const noexcept { return h_; }
  Index width() const noexcept { return w_; }
  Index bands() const noexcept { return s_; }
  Index pixels() const noexcept { return h_ * w_; }
  Index size() const noexcept { return static_cast<Index>(data_.size()); }
  bool empty() const noexcept { return data_.empty(); }

  double &operator()(Index row, Index col, Index band) noexcept {
    return data_[static_cast<std::size_t>((row * w_ + col) * s_ + band)];
  }
  double operator()(Index row, Index col, Index band) const noexcept {
    return data_[static_cast<std::size_t>((row * w_ + col) * s_ + band)];
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  /// bands x pixels view; column p holds the spectrum of pixel p = row*W + col.
  Eigen::Map<Mat> matrix() noexcept { return {data_.data(), s_, h_ * w_}; }
  Eigen::Map<const Mat> matrix() const noexcept { return {data_.data(), s_, h_ * w_}; }
  Eigen::Map<Vec> vector() noexcept { return {data_.data(), size()}; }
  Eigen::Map<const Vec> vector() const noexcept { return {data_.data(), size()}; }

  bool same_shape(const Tensor3 &other) const noexcept {
    return h_ == other.h_ && w_ == other.w_ && s_ == other.s_;
  }
  bool all_finite() const noexcept;

  /// Single band as a height x width tensor with one band.
  Tensor3 band(Index b) const;

  Tensor3 &operator+=(const Tensor3 &rhs);
  Tensor3 &operator-=(const Tensor3 &rhs);
  Tensor3 &operator*=(double k) noexcept;
  /// this += k * x
  Tensor3 &axpy(double k, const Tensor3 &x);

  friend Tensor3 operator+(Tensor3 lhs, const Tensor3 &rhs) { return lhs += rhs; }
  friend Tensor3 operator-(Tensor3 lhs, const Tensor3 &rhs) { return lhs -= rhs; }
  friend Tensor3 operator*(Tensor3 lhs, double k) { return lhs *= k; }
  friend Tensor3 operator*(double k, Tensor3 rhs) { return rhs *= k; }

  friend bool operator==(const Tensor3 &, const Tensor3 &) = default;

private:
  Index h_ = 0;
  Index w_ = 0;
  Index s_ = 0;
  std::vector<double> data_;
};

double dot(const Tensor3 &a, const Tensor3 &b);
double frobenius_norm(const Tensor3 &a);
/// Largest absolute entrywise difference.
double max_abs_diff(const Tensor3 &a, const Tensor3 &b);

/// Fills a tensor with i.i.d. standard normal draws from `rng`.
Tensor3 random_normal(Index height, Index width, Index bands, std::mt19937_64 &rng);

/// S x (H*W) unfolding; pixel (i, j) maps to column i*W + j.
Mat unfold3(const Tensor3 &x);
/// Inverse of unfold3. Throws ShapeError if m.cols() != H*W.
Tensor3 fold3(const Mat &m, Index height, Index width);

/// a x_3 e: every spectrum a(i,j,:) is replaced by e * a(i,j,:). Needs e.cols() == a.bands().
Tensor3 mode3_mul(const Tensor3 &a, const Mat &e);
/// r x_3 e^T, the adjoint of mode3_mul with respect to its tensor argument.
Tensor3 mode3_mul_adjoint(const Tensor3 &r, const Mat &e);

/**
 * E = argmin ||y3 - E a3||_F over S x s matrices E.
 *
 * Solved through a complete orthogonal decomposition of a3^T, so a
 * rank-deficient a3 (duplicated or collinear bands) yields the
 * minimum-norm minimizer instead of failing.
 */
Mat lstsq_rows(const Mat &y3, const Mat &a3);

} // namespace plrdiff
