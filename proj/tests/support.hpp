#pragma once

// Independent reference implementations used as test oracles. These are
// deliberately naive (loops, dense matrices) and share no code with the
// library beyond the Tensor3 container.

#include "plrdiff/tensor3.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>

namespace plrdiff::testing {

inline Tensor3 randn(Index h, Index w, Index s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Tensor3 x(h, w, s);
  for (double &v : x.data()) v = n(rng);
  return x;
}

inline Mat randn_mat(Index r, Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Mat m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = n(rng);
  return m;
}

inline double inner(const Tensor3 &a, const Tensor3 &b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

inline double rel_err(const Tensor3 &got, const Tensor3 &want) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < got.data().size(); ++i) {
    num += (got.data()[i] - want.data()[i]) * (got.data()[i] - want.data()[i]);
    den += want.data()[i] * want.data()[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

/// out(i,j) = sum over offsets (di,dj) of k(c+di, c+dj) * x(i-di, j-dj), indices mod H/W.
inline Tensor3 brute_circular_conv(const Tensor3 &x, const Mat &k) {
  const Index c = k.rows() / 2, h = x.height(), w = x.width();
  Tensor3 out(h, w, x.bands());
  for (Index b = 0; b < x.bands(); ++b)
    for (Index i = 0; i < h; ++i)
      for (Index j = 0; j < w; ++j) {
        double acc = 0.0;
        for (Index di = -c; di <= c; ++di)
          for (Index dj = -c; dj <= c; ++dj) {
            const Index si = ((i - di) % h + h) % h, sj = ((j - dj) % w + w) % w;
            acc += k(c + di, c + dj) * x(si, sj, b);
          }
        out(i, j, b) = acc;
      }
  return out;
}

/// Dense matrix of a linear map by probing with unit vectors.
inline Mat dense_operator(const std::function<Tensor3(const Tensor3 &)> &f, Index h, Index w,
                          Index s) {
  Tensor3 probe(h, w, s);
  const Index n = probe.size();
  Mat m;
  for (Index i = 0; i < n; ++i) {
    probe.data()[i] = 1.0;
    const Tensor3 col = f(probe);
    probe.data()[i] = 0.0;
    if (i == 0) m = Mat::Zero(col.size(), n);
    for (Index r = 0; r < col.size(); ++r) m(r, i) = col.data()[r];
  }
  return m;
}

/// Central finite-difference gradient of a scalar function.
inline Tensor3 fd_gradient(const std::function<double(const Tensor3 &)> &f, Tensor3 x,
                           double h = 1e-6) {
  Tensor3 g(x.height(), x.width(), x.bands());
  for (Index i = 0; i < x.size(); ++i) {
    const double x0 = x.data()[i];
    x.data()[i] = x0 + h;
    const double fp = f(x);
    x.data()[i] = x0 - h;
    const double fm = f(x);
    x.data()[i] = x0;
    g.data()[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Minimum-norm least-squares solution of E * A = Y via the SVD pseudo-inverse.
inline Mat pinv_rows(const Mat &y, const Mat &a) {
  Eigen::JacobiSVD<Mat> svd(a.transpose(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(1e-12);
  return svd.solve(y.transpose()).transpose();
}

/// Cayley-Dickson multiplication written recursively on halves.
inline Eigen::VectorXd cd_mul(const Eigen::VectorXd &a, const Eigen::VectorXd &b) {
  const Index n = a.size();
  if (n == 1) return a.cwiseProduct(b);
  const Index m = n / 2;
  auto conj = [](const Eigen::VectorXd &v) {
    Eigen::VectorXd c = -v;
    c(0) = v(0);
    return c;
  };
  const Eigen::VectorXd p = a.head(m), q = a.tail(m), r = b.head(m), s = b.tail(m);
  Eigen::VectorXd out(n);
  // (p, q)(r, s) = (pr - s*q, sp + qr*)
  out.head(m) = cd_mul(p, r) - cd_mul(conj(s), q);
  out.tail(m) = cd_mul(s, p) + cd_mul(q, conj(r));
  return out;
}

/// Q2^n of one block computed pixel by pixel with hypercomplex products.
inline double naive_q2n_block(const Tensor3 &ref, const Tensor3 &out, Index r0, Index c0,
                              Index block) {
  Index dim = 1;
  while (dim < ref.bands()) dim *= 2;
  auto pix = [&](const Tensor3 &t, Index i, Index j) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
    for (Index b = 0; b < t.bands(); ++b) v(b) = t(r0 + i, c0 + j, b);
    return v;
  };
  auto conj = [](Eigen::VectorXd v) {
    v.tail(v.size() - 1) *= -1.0;
    return v;
  };
  const double n = double(block * block);
  Eigen::VectorXd mx = Eigen::VectorXd::Zero(dim), my = mx, mxy = mx;
  double sx = 0.0, sy = 0.0;
  for (Index i = 0; i < block; ++i)
    for (Index j = 0; j < block; ++j) {
      const Eigen::VectorXd x = pix(ref, i, j), y = pix(out, i, j);
      mx += x / n;
      my += y / n;
      mxy += cd_mul(x, conj(y)) / n;
      sx += x.squaredNorm() / n;
      sy += y.squaredNorm() / n;
    }
  const double k = n / (n - 1.0);
  const double vx = k * (sx - mx.squaredNorm()), vy = k * (sy - my.squaredNorm());
  const Eigen::VectorXd cov = k * (mxy - cd_mul(mx, conj(my)));
  const double mean_term = 2.0 * mx.norm() * my.norm() / (mx.squaredNorm() + my.squaredNorm());
  return cov.norm() * 2.0 / (vx + vy) * mean_term;
}

} // namespace plrdiff::testing
