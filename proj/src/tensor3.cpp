#include "plrdiff/tensor3.hpp"

#include "plrdiff/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace plrdiff {

namespace {

std::string shape_str(const Tensor3 &x) {
  return std::to_string(x.height()) + "x" + std::to_string(x.width()) + "x" +
         std::to_string(x.bands());
}

void require_same_shape(const Tensor3 &a, const Tensor3 &b, const char *op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape " + shape_str(a) + " vs " + shape_str(b));
  }
}

} // namespace

Tensor3::Tensor3(Index height, Index width, Index bands, double fill)
  : h_(height), w_(width), s_(bands) {
  if (height <= 0 || width <= 0 || bands <= 0) {
    throw ShapeError("Tensor3: dimensions must be positive, got " + std::to_string(height) + "x" +
                     std::to_string(width) + "x" + std::to_string(bands));
  }
  data_.assign(static_cast<std::size_t>(height * width * bands), fill);
}

bool Tensor3::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor3 Tensor3::band(Index b) const {
  if (b < 0 || b >= s_) {
    throw ParameterError("band index " + std::to_string(b) + " out of range for " +
                         std::to_string(s_) + " bands");
  }
  Tensor3 out(h_, w_, 1);
  for (Index p = 0; p < pixels(); ++p) {
    out.data_[static_cast<std::size_t>(p)] = data_[static_cast<std::size_t>(p * s_ + b)];
  }
  return out;
}

Tensor3 &Tensor3::operator+=(const Tensor3 &rhs) {
  require_same_shape(*this, rhs, "operator+=");
  vector() += rhs.vector();
  return *this;
}

Tensor3 &Tensor3::operator-=(const Tensor3 &rhs) {
  require_same_shape(*this, rhs, "operator-=");
  vector() -= rhs.vector();
  return *this;
}

Tensor3 &Tensor3::operator*=(double k) noexcept {
  vector() *= k;
  return *this;
}

Tensor3 &Tensor3::axpy(double k, const Tensor3 &x) {
  require_same_shape(*this, x, "axpy");
  vector() += k * x.vector();
  return *this;
}

double dot(const Tensor3 &a, const Tensor3 &b) {
  require_same_shape(a, b, "dot");
  return a.vector().dot(b.vector());
}

double frobenius_norm(const Tensor3 &a) { return a.vector().norm(); }

double max_abs_diff(const Tensor3 &a, const Tensor3 &b) {
  require_same_shape(a, b, "max_abs_diff");
  if (a.empty()) return 0.0;
  return (a.vector() - b.vector()).cwiseAbs().maxCoeff();
}

Tensor3 random_normal(Index height, Index width, Index bands, std::mt19937_64 &rng) {
  Tensor3 out(height, width, bands);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double &v : out.data()) v = normal(rng);
  return out;
}

Mat unfold3(const Tensor3 &x) { return x.matrix(); }

Tensor3 fold3(const Mat &m, Index height, Index width) {
  if (height <= 0 || width <= 0 || m.cols() != height * width) {
    throw ShapeError("fold3: matrix has " + std::to_string(m.cols()) + " columns, expected " +
                     std::to_string(height) + "*" + std::to_string(width));
  }
  Tensor3 out(height, width, m.rows());
  out.matrix() = m;
  return out;
}

Tensor3 mode3_mul(const Tensor3 &a, const Mat &e) {
  if (e.cols() != a.bands()) {
    throw ShapeError("mode3_mul: matrix has " + std::to_string(e.cols()) +
                     " columns but tensor has " + std::to_string(a.bands()) + " bands");
  }
  Tensor3 out(a.height(), a.width(), e.rows());
  out.matrix().noalias() = e * a.matrix();
  return out;
}

Tensor3 mode3_mul_adjoint(const Tensor3 &r, const Mat &e) {
  if (e.rows() != r.bands()) {
    throw ShapeError("mode3_mul_adjoint: matrix has " + std::to_string(e.rows()) +
                     " rows but tensor has " + std::to_string(r.bands()) + " bands");
  }
  Tensor3 out(r.height(), r.width(), e.cols());
  out.matrix().noalias() = e.transpose() * r.matrix();
  return out;
}

Mat lstsq_rows(const Mat &y3, const Mat &a3) {
  if (y3.cols() != a3.cols()) {
    throw ShapeError("lstsq_rows: column mismatch " + std::to_string(y3.cols()) + " vs " +
                     std::to_string(a3.cols()));
  }
  // E a3 = y3  <=>  a3^T E^T = y3^T, an overdetermined system in E^T.
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(a3.transpose());
  return cod.solve(y3.transpose()).transpose();
}

} // namespace plrdiff
