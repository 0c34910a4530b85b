#include "plrdiff/metrics.hpp"

#include "plrdiff/degrade.hpp"
#include "plrdiff/error.hpp"

#include "json.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace plrdiff {

namespace {

void require_pair(const Tensor3 &ref, const Tensor3 &out, const char *name) {
  if (!ref.same_shape(out) || ref.empty()) {
    throw ShapeError(std::string(name) + ": reference and output must be non-empty and equally shaped");
  }
}

void warn(std::vector<std::string> *warnings, std::string msg) {
  if (warnings) warnings->push_back(std::move(msg));
}

double pearson(const Tensor3 &a, const Tensor3 &b, double floor, bool &degenerate) {
  const auto va = a.vector().array() - a.vector().mean();
  const auto vb = b.vector().array() - b.vector().mean();
  const double saa = (va * va).sum(), sbb = (vb * vb).sum();
  degenerate = saa <= floor * double(a.size()) || sbb <= floor * double(b.size());
  if (degenerate) return 0.0;
  return (va * vb).sum() / std::sqrt(saa * sbb);
}

Mat laplacian_kernel() {
  Mat k(3, 3);
  k << 0, 1, 0, 1, -4, 1, 0, 1, 0;
  return k;
}

double format_number(std::ostream &os, double v) {
  if (std::isinf(v)) {
    os << (v > 0 ? "inf" : "-inf");
  } else {
    os << v;
  }
  return v;
}

} // namespace

double mse(const Tensor3 &ref, const Tensor3 &out) {
  require_pair(ref, out, "mse");
  return (ref.vector() - out.vector()).squaredNorm() / double(ref.size());
}

double psnr(const Tensor3 &ref, const Tensor3 &out, double peak) {
  require_pair(ref, out, "psnr");
  if (!(peak > 0.0)) throw ParameterError("psnr: peak must be positive");
  const Mat diff = ref.matrix() - out.matrix();
  double total = 0.0;
  for (Index b = 0; b < ref.bands(); ++b) {
    const double m = diff.row(b).squaredNorm() / double(ref.pixels());
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    total += 10.0 * std::log10(peak * peak / m);
  }
  return total / double(ref.bands());
}

double sam(const Tensor3 &ref, const Tensor3 &out, std::vector<std::string> *warnings) {
  require_pair(ref, out, "sam");
  const auto r = ref.matrix();
  const auto o = out.matrix();
  double total = 0.0;
  Index used = 0;
  for (Index p = 0; p < ref.pixels(); ++p) {
    const double nr = r.col(p).norm(), no = o.col(p).norm();
    if (nr == 0.0 || no == 0.0) continue;
    const double c = std::clamp(r.col(p).dot(o.col(p)) / (nr * no), -1.0, 1.0);
    total += std::acos(c);
    ++used;
  }
  if (used < ref.pixels()) {
    warn(warnings, "sam: skipped " + std::to_string(ref.pixels() - used) + " zero-spectrum pixels");
  }
  if (used == 0) return 0.0;
  return total / double(used) * 180.0 / std::numbers::pi;
}

double ergas(const Tensor3 &ref, const Tensor3 &out, int scale, std::vector<std::string> *warnings,
             double floor) {
  require_pair(ref, out, "ergas");
  if (scale < 1) throw ParameterError("ergas: scale must be >= 1");
  const auto r = ref.matrix();
  const auto o = out.matrix();
  double total = 0.0;
  Index used = 0;
  for (Index b = 0; b < ref.bands(); ++b) {
    const double mean = r.row(b).mean();
    if (std::abs(mean) < floor) {
      warn(warnings, "ergas: band " + std::to_string(b + 1) + " has zero mean, skipped");
      continue;
    }
    const double rmse = std::sqrt((r.row(b) - o.row(b)).squaredNorm() / double(ref.pixels()));
    total += (rmse / mean) * (rmse / mean);
    ++used;
  }
  if (used == 0) return std::numeric_limits<double>::quiet_NaN();
  return 100.0 / double(scale) * std::sqrt(total / double(used));
}

double scc(const Tensor3 &ref, const Tensor3 &out, std::vector<std::string> *warnings, double floor) {
  require_pair(ref, out, "scc");
  const Mat lap = laplacian_kernel();
  const Tensor3 hr = blur(ref, lap);
  const Tensor3 ho = blur(out, lap);
  double total = 0.0;
  Index used = 0;
  for (Index b = 0; b < ref.bands(); ++b) {
    bool degenerate = false;
    const double c = pearson(hr.band(b), ho.band(b), floor, degenerate);
    if (degenerate) {
      warn(warnings, "scc: band " + std::to_string(b + 1) + " is flat after high-pass, skipped");
      continue;
    }
    total += c;
    ++used;
  }
  if (used == 0) return std::numeric_limits<double>::quiet_NaN();
  return total / double(used);
}

double ssim(const Tensor3 &ref, const Tensor3 &out, double peak) {
  require_pair(ref, out, "ssim");
  // The window shrinks to the largest odd size that fits very small images.
  Index side = std::min<Index>(11, std::min(ref.height(), ref.width()));
  if (side % 2 == 0) --side;
  const Mat window = gaussian_kernel(static_cast<int>(side), 1.5);
  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);

  Tensor3 xx = ref, yy = out, xy = ref;
  xx.vector().array() *= ref.vector().array();
  yy.vector().array() *= out.vector().array();
  xy.vector().array() *= out.vector().array();
  const Tensor3 mx = blur(ref, window), my = blur(out, window);
  const Tensor3 sxx = blur(xx, window), syy = blur(yy, window), sxy = blur(xy, window);

  double total = 0.0;
  for (Index i = 0; i < ref.size(); ++i) {
    const double ux = mx.data()[i], uy = my.data()[i];
    const double vx = sxx.data()[i] - ux * ux;
    const double vy = syy.data()[i] - uy * uy;
    const double cxy = sxy.data()[i] - ux * uy;
    total += ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
  }
  return total / double(ref.size());
}

Vec hypercomplex_conj(const Vec &a) {
  Vec c = -a;
  c(0) = a(0);
  return c;
}

// (a, b)(c, d) = (a c - d* b, d a + b c*)
Vec hypercomplex_mul(const Vec &x, const Vec &y) {
  const Index n = x.size();
  if (n != y.size() || n < 1 || (n & (n - 1)) != 0) {
    throw ShapeError("hypercomplex_mul: operands must share a power-of-two length");
  }
  if (n == 1) return Vec::Constant(1, x(0) * y(0));
  const Index h = n / 2;
  const Vec a = x.head(h), b = x.tail(h), c = y.head(h), d = y.tail(h);
  Vec out(n);
  out.head(h) = hypercomplex_mul(a, c) - hypercomplex_mul(hypercomplex_conj(d), b);
  out.tail(h) = hypercomplex_mul(d, a) + hypercomplex_mul(b, hypercomplex_conj(c));
  return out;
}

namespace {

// Basis products of a Cayley-Dickson algebra satisfy e_i e_j = sign(i, j) e_{i xor j}.
Mat hypercomplex_sign_table(Index dim) {
  Mat sign(dim, dim);
  for (Index i = 0; i < dim; ++i) {
    for (Index j = 0; j < dim; ++j) {
      const Vec p = hypercomplex_mul(Vec::Unit(dim, i), Vec::Unit(dim, j));
      sign(i, j) = p(i ^ j);
    }
  }
  return sign;
}

// sum_p x_p * conj(y_p) given M = X conj(Y)^T.
Vec contract(const Mat &m, const Mat &sign) {
  const Index dim = m.rows();
  Vec out = Vec::Zero(dim);
  for (Index i = 0; i < dim; ++i) {
    for (Index j = 0; j < dim; ++j) out(i ^ j) += sign(i, j) * m(i, j);
  }
  return out;
}

} // namespace

double q2n(const Tensor3 &ref, const Tensor3 &out, Index block) {
  require_pair(ref, out, "q2n");
  if (block < 2) throw ParameterError("q2n: block must be >= 2");
  if (ref.height() < block || ref.width() < block) {
    throw ParameterError("q2n: image " + std::to_string(ref.height()) + "x" +
                         std::to_string(ref.width()) + " is smaller than block " +
                         std::to_string(block));
  }
  Index dim = 1;
  while (dim < ref.bands()) dim *= 2;
  const Index s = ref.bands();
  const Mat sign = hypercomplex_sign_table(dim);
  const double n = double(block * block);
  const double unbias = n / (n - 1.0);

  // Zero-padded block pixels as columns; y is stored conjugated.
  Mat x = Mat::Zero(dim, block * block), yc = Mat::Zero(dim, block * block);
  double total = 0.0;
  Index blocks = 0;
  for (Index bi = 0; bi + block <= ref.height(); bi += block) {
    for (Index bj = 0; bj + block <= ref.width(); bj += block) {
      for (Index i = 0; i < block; ++i) {
        for (Index j = 0; j < block; ++j) {
          const Index p = i * block + j;
          for (Index b = 0; b < s; ++b) {
            x(b, p) = ref(bi + i, bj + j, b);
            yc(b, p) = b == 0 ? out(bi + i, bj + j, b) : -out(bi + i, bj + j, b);
          }
        }
      }
      const Vec mx = x.rowwise().mean();
      const Vec myc = yc.rowwise().mean();
      const double vx = unbias * (x.squaredNorm() / n - mx.squaredNorm());
      const double vy = unbias * (yc.squaredNorm() / n - myc.squaredNorm());
      const double mean_den = mx.squaredNorm() + myc.squaredNorm();
      const double mean_term = mean_den > 0.0 ? 2.0 * mx.norm() * myc.norm() / mean_den : 1.0;
      double q;
      if (vx + vy <= 0.0) {
        q = mean_term;
      } else {
        const Mat cross = x * yc.transpose();
        const Mat mean_cross = mx * myc.transpose();
        const Vec cov = unbias * (contract(cross, sign) / n - contract(mean_cross, sign));
        q = cov.norm() * 2.0 / (vx + vy) * mean_term;
      }
      total += q;
      ++blocks;
    }
  }
  return total / double(blocks);
}

MetricReport evaluate(const Tensor3 &ref, const Tensor3 &out, const MetricOptions &opts) {
  require_pair(ref, out, "evaluate");
  MetricReport m;
  m.mse = mse(ref, out);
  m.psnr = psnr(ref, out, opts.peak);
  m.ssim = ssim(ref, out, opts.peak);
  m.sam = sam(ref, out, &m.warnings);
  m.ergas = ergas(ref, out, opts.scale, &m.warnings, opts.floor);
  m.scc = scc(ref, out, &m.warnings, opts.floor);
  if (ref.height() >= opts.q2n_block && ref.width() >= opts.q2n_block) {
    m.q2n = q2n(ref, out, opts.q2n_block);
  } else {
    // Fall back to one block covering the largest square that fits.
    const Index side = std::min(ref.height(), ref.width());
    m.warnings.push_back("q2n: image smaller than block " + std::to_string(opts.q2n_block) +
                         ", using block " + std::to_string(side));
    m.q2n = q2n(ref, out, side);
  }
  return m;
}

std::string metrics_csv_header() { return "psnr,ssim,q2n,sam,ergas,scc,mse"; }

std::string metrics_csv_row(const MetricReport &m) {
  std::ostringstream os;
  os.precision(17);
  for (double v : {m.psnr, m.ssim, m.q2n, m.sam, m.ergas, m.scc}) {
    format_number(os, v);
    os << ',';
  }
  format_number(os, m.mse);
  return os.str();
}

std::string metrics_json(const MetricReport &m) {
  auto num = [](double v) -> nlohmann::json {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return nullptr;
    return v;
  };
  nlohmann::ordered_json j;
  j["psnr"] = num(m.psnr);
  j["ssim"] = num(m.ssim);
  j["q2n"] = num(m.q2n);
  j["sam"] = num(m.sam);
  j["ergas"] = num(m.ergas);
  j["scc"] = num(m.scc);
  j["mse"] = num(m.mse);
  j["warnings"] = m.warnings;
  return j.dump(2);
}

} // namespace plrdiff
