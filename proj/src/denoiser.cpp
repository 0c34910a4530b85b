#include "plrdiff/denoiser.hpp"

#include "plrdiff/error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

namespace plrdiff {

// --- NoisePredictor ---------------------------------------------------------

Tensor3 NoisePredictor::vjp(const Tensor3 &, int, const NoiseSchedule &, const Tensor3 &) const {
  throw CapabilityError("this noise predictor does not provide a vector-Jacobian product");
}

// --- GaussianPredictor ------------------------------------------------------

GaussianPredictor::GaussianPredictor(GaussianPrior prior) : prior_(std::move(prior)) {
  if (!(prior_.variance > 0.0) || !std::isfinite(prior_.variance)) {
    throw ParameterError("Gaussian prior variance must be positive");
  }
  if (prior_.mean.empty() || !prior_.mean.all_finite()) {
    throw ParameterError("Gaussian prior mean must be a finite, non-empty tensor");
  }
}

double GaussianPredictor::slope(double ab) const {
  return std::sqrt(1.0 - ab) / (ab * prior_.variance + 1.0 - ab);
}

Tensor3 GaussianPredictor::predict(const Tensor3 &a_t, int t, const NoiseSchedule &sched) const {
  if (!a_t.same_shape(prior_.mean)) throw ShapeError("GaussianPredictor: input shape mismatch");
  const double ab = sched.alpha_bar(t);
  Tensor3 out = a_t;
  out.axpy(-std::sqrt(ab), prior_.mean);
  out *= slope(ab);
  return out;
}

Tensor3 GaussianPredictor::vjp(const Tensor3 &a_t, int t, const NoiseSchedule &sched,
                               const Tensor3 &cotangent) const {
  if (!a_t.same_shape(prior_.mean) || !cotangent.same_shape(a_t)) {
    throw ShapeError("GaussianPredictor::vjp: shape mismatch");
  }
  return cotangent * slope(sched.alpha_bar(t));
}

// --- TinyDenoiser -----------------------------------------------------------

namespace {

constexpr Index kTaps = 9;

Index wrap(Index i, Index n) {
  const Index r = i % n;
  return r < 0 ? r + n : r;
}

// src[tap][p]: pixel read by tap (dy, dx) for output pixel p, circular boundary.
std::array<std::vector<Index>, kTaps> neighbour_table(Index h, Index w) {
  std::array<std::vector<Index>, kTaps> table;
  for (Index tap = 0; tap < kTaps; ++tap) {
    const Index dy = tap / 3 - 1, dx = tap % 3 - 1;
    auto &src = table[static_cast<std::size_t>(tap)];
    src.resize(static_cast<std::size_t>(h * w));
    for (Index i = 0; i < h; ++i) {
      for (Index j = 0; j < w; ++j) src[static_cast<std::size_t>(i * w + j)] = wrap(i + dy, h) * w + wrap(j + dx, w);
    }
  }
  return table;
}

// (9*C) x P matrix; row tap*C + c of column p is channel c at neighbour `tap` of p.
Mat im2col(const Mat &x, const std::array<std::vector<Index>, kTaps> &table) {
  const Index c = x.rows(), p = x.cols();
  Mat cols(kTaps * c, p);
  for (Index q = 0; q < p; ++q) {
    for (Index tap = 0; tap < kTaps; ++tap) {
      cols.col(q).segment(tap * c, c) = x.col(table[static_cast<std::size_t>(tap)][static_cast<std::size_t>(q)]);
    }
  }
  return cols;
}

Mat col2im(const Mat &cols, Index c, const std::array<std::vector<Index>, kTaps> &table) {
  const Index p = cols.cols();
  Mat x = Mat::Zero(c, p);
  for (Index q = 0; q < p; ++q) {
    for (Index tap = 0; tap < kTaps; ++tap) {
      x.col(table[static_cast<std::size_t>(tap)][static_cast<std::size_t>(q)]) += cols.col(q).segment(tap * c, c);
    }
  }
  return x;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Mat silu(const Mat &z) {
  return z.unaryExpr([](double v) { return v * sigmoid(v); });
}

Mat silu_grad(const Mat &z) {
  return z.unaryExpr([](double v) {
    const double s = sigmoid(v);
    return s * (1.0 + v * (1.0 - s));
  });
}

} // namespace

struct TinyDenoiser::Layout {
  // offsets into theta
  Index w1, b1, p1, w2, b2, p2, w3, b3, w4, b4, total;

  Layout(Index s, Index c, Index d) {
    Index o = 0;
    w1 = o; o += kTaps * s * c;
    b1 = o; o += c;
    p1 = o; o += d * c;
    w2 = o; o += kTaps * c * c;
    b2 = o; o += c;
    p2 = o; o += d * c;
    w3 = o; o += kTaps * c * c;
    b3 = o; o += c;
    w4 = o; o += kTaps * c * s;
    b4 = o; o += s;
    total = o;
  }
};

struct TinyDenoiser::Cache {
  std::array<std::vector<Index>, kTaps> table;
  Vec emb;
  Mat cols0, z1, h1, cols1, z2, h2, cols2, z3, h3, cols3, out;
};

TinyDenoiser::TinyDenoiser(const Options &opts)
  : bands_(opts.bands), channels_(opts.channels), embed_(opts.embedding) {
  if (bands_ < 1 || channels_ < 1 || embed_ < 2 || embed_ % 2 != 0) {
    throw ParameterError("TinyDenoiser: bands, channels must be positive and embedding even");
  }
  const Layout lay(bands_, channels_, embed_);
  theta_.assign(static_cast<std::size_t>(lay.total), 0.0);
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](Index off, Index n, double stddev) {
    for (Index i = 0; i < n; ++i) theta_[static_cast<std::size_t>(off + i)] = stddev * normal(rng);
  };
  // He initialization for the hidden convolutions; output layer stays zero.
  fill(lay.w1, kTaps * bands_ * channels_, std::sqrt(2.0 / double(kTaps * bands_)));
  fill(lay.p1, embed_ * channels_, 0.1);
  fill(lay.w2, kTaps * channels_ * channels_, std::sqrt(2.0 / double(kTaps * channels_)));
  fill(lay.p2, embed_ * channels_, 0.1);
  fill(lay.w3, kTaps * channels_ * channels_, std::sqrt(1.0 / double(kTaps * channels_)));
}

TinyDenoiser::TinyDenoiser(Index bands, Index channels, Index embedding, std::vector<double> params)
  : bands_(bands), channels_(channels), embed_(embedding), theta_(std::move(params)) {
  if (bands_ < 1 || channels_ < 1 || embed_ < 2 || embed_ % 2 != 0) {
    throw ParameterError("TinyDenoiser: bands, channels must be positive and embedding even");
  }
  if (static_cast<Index>(theta_.size()) != Layout(bands_, channels_, embed_).total) {
    throw ShapeError("TinyDenoiser: parameter vector has wrong length");
  }
}

std::vector<ParamShape> TinyDenoiser::param_shapes() const {
  const auto s = static_cast<std::uint32_t>(bands_);
  const auto c = static_cast<std::uint32_t>(channels_);
  const auto d = static_cast<std::uint32_t>(embed_);
  // Convolution weights are HWIO; time projections are [embedding, out].
  return {{3, 3, s, c}, {c}, {d, c}, {3, 3, c, c}, {c}, {d, c},
          {3, 3, c, c}, {c}, {3, 3, c, s}, {s}};
}

Vec TinyDenoiser::time_embedding(int t, int steps) const {
  const double tau = 1000.0 * double(t) / double(steps);
  const Index half = embed_ / 2;
  Vec e(embed_);
  for (Index k = 0; k < half; ++k) {
    const double freq = std::exp(-std::log(10000.0) * double(k) / double(half));
    e(2 * k) = std::sin(tau * freq);
    e(2 * k + 1) = std::cos(tau * freq);
  }
  return e;
}

void TinyDenoiser::check_input(const Tensor3 &x) const {
  if (x.bands() != bands_) {
    throw ShapeError("TinyDenoiser: expected " + std::to_string(bands_) + " bands, got " +
                     std::to_string(x.bands()));
  }
}

void TinyDenoiser::forward(const Tensor3 &x, int t, const NoiseSchedule &sched, Cache &k) const {
  check_input(x);
  if (t < 0 || t > sched.steps()) throw ParameterError("TinyDenoiser: t out of range");
  const Layout lay(bands_, channels_, embed_);
  const double *th = theta_.data();
  const Index s = bands_, c = channels_, d = embed_;
  using CMap = Eigen::Map<const Mat>;
  const CMap w1(th + lay.w1, c, kTaps * s), w2(th + lay.w2, c, kTaps * c),
      w3(th + lay.w3, c, kTaps * c), w4(th + lay.w4, s, kTaps * c);
  const CMap p1(th + lay.p1, c, d), p2(th + lay.p2, c, d);
  const Eigen::Map<const Vec> b1(th + lay.b1, c), b2(th + lay.b2, c), b3(th + lay.b3, c),
      b4(th + lay.b4, s);

  k.table = neighbour_table(x.height(), x.width());
  k.emb = time_embedding(t, sched.steps());
  const Vec bias1 = b1 + p1 * k.emb;
  const Vec bias2 = b2 + p2 * k.emb;

  k.cols0 = im2col(x.matrix(), k.table);
  k.z1.noalias() = w1 * k.cols0;
  k.z1.colwise() += bias1;
  k.h1 = silu(k.z1);

  k.cols1 = im2col(k.h1, k.table);
  k.z2.noalias() = w2 * k.cols1;
  k.z2.colwise() += bias2;
  k.h2 = silu(k.z2);

  k.cols2 = im2col(k.h2, k.table);
  k.z3.noalias() = w3 * k.cols2;
  k.z3.colwise() += b3;
  k.h3 = k.h2 + silu(k.z3);

  k.cols3 = im2col(k.h3, k.table);
  k.out.noalias() = w4 * k.cols3;
  k.out.colwise() += b4;
}

Tensor3 TinyDenoiser::predict(const Tensor3 &a_t, int t, const NoiseSchedule &sched) const {
  Cache k;
  forward(a_t, t, sched, k);
  Tensor3 out(a_t.height(), a_t.width(), bands_);
  out.matrix() = k.out;
  return out;
}

Tensor3 TinyDenoiser::vjp(const Tensor3 &a_t, int t, const NoiseSchedule &sched,
                          const Tensor3 &cotangent) const {
  return backward(a_t, t, sched, cotangent, false).input;
}

TinyDenoiser::Gradients TinyDenoiser::backward(const Tensor3 &a_t, int t, const NoiseSchedule &sched,
                                               const Tensor3 &grad_out, bool want_params) const {
  if (!grad_out.same_shape(a_t)) throw ShapeError("TinyDenoiser::backward: cotangent shape mismatch");
  Cache k;
  forward(a_t, t, sched, k);
  return backward_cached(k, a_t.height(), a_t.width(), grad_out.matrix(), want_params);
}

double TinyDenoiser::squared_error_gradient(const Tensor3 &a_t, int t, const NoiseSchedule &sched,
                                            const Tensor3 &target, std::vector<double> &grad) const {
  if (!target.same_shape(a_t)) throw ShapeError("TinyDenoiser: target shape mismatch");
  Cache k;
  forward(a_t, t, sched, k);
  const double n = double(a_t.size());
  const Mat residual = k.out - target.matrix();
  const double loss = residual.squaredNorm() / n;
  if (!std::isfinite(loss)) return loss;
  grad = backward_cached(k, a_t.height(), a_t.width(), (2.0 / n) * residual, true).params;
  return loss;
}

TinyDenoiser::Gradients TinyDenoiser::backward_cached(const Cache &k, Index height, Index width,
                                                      const Mat &g_out, bool want_params) const {
  const Layout lay(bands_, channels_, embed_);
  const double *th = theta_.data();
  const Index s = bands_, c = channels_, d = embed_;
  using CMap = Eigen::Map<const Mat>;
  const CMap w1(th + lay.w1, c, kTaps * s), w2(th + lay.w2, c, kTaps * c),
      w3(th + lay.w3, c, kTaps * c), w4(th + lay.w4, s, kTaps * c);

  Gradients g;
  if (want_params) g.params.assign(theta_.size(), 0.0);
  double *gp = want_params ? g.params.data() : nullptr;
  auto param_mat = [&](Index off, Index rows, Index cols) { return Eigen::Map<Mat>(gp + off, rows, cols); };
  auto param_vec = [&](Index off, Index n) { return Eigen::Map<Vec>(gp + off, n); };

  if (gp) {
    param_mat(lay.w4, s, kTaps * c).noalias() = g_out * k.cols3.transpose();
    param_vec(lay.b4, s) = g_out.rowwise().sum();
  }
  const Mat g_h3 = col2im(w4.transpose() * g_out, c, k.table);

  const Mat g_z3 = g_h3.cwiseProduct(silu_grad(k.z3));
  if (gp) {
    param_mat(lay.w3, c, kTaps * c).noalias() = g_z3 * k.cols2.transpose();
    param_vec(lay.b3, c) = g_z3.rowwise().sum();
  }
  const Mat g_h2 = g_h3 + col2im(w3.transpose() * g_z3, c, k.table);

  const Mat g_z2 = g_h2.cwiseProduct(silu_grad(k.z2));
  if (gp) {
    param_mat(lay.w2, c, kTaps * c).noalias() = g_z2 * k.cols1.transpose();
    const Vec sum2 = g_z2.rowwise().sum();
    param_vec(lay.b2, c) = sum2;
    param_mat(lay.p2, c, d).noalias() = sum2 * k.emb.transpose();
  }
  const Mat g_h1 = col2im(w2.transpose() * g_z2, c, k.table);

  const Mat g_z1 = g_h1.cwiseProduct(silu_grad(k.z1));
  if (gp) {
    param_mat(lay.w1, c, kTaps * s).noalias() = g_z1 * k.cols0.transpose();
    const Vec sum1 = g_z1.rowwise().sum();
    param_vec(lay.b1, c) = sum1;
    param_mat(lay.p1, c, d).noalias() = sum1 * k.emb.transpose();
  }
  g.input = Tensor3(height, width, bands_);
  g.input.matrix() = col2im(w1.transpose() * g_z1, s, k.table);
  return g;
}

// --- training ---------------------------------------------------------------

double denoiser_loss(const NoisePredictor &model, const std::vector<Tensor3> &data,
                     const NoiseSchedule &sched, std::mt19937_64 &rng, int draws) {
  if (data.empty() || draws < 1) return std::numeric_limits<double>::quiet_NaN();
  std::uniform_int_distribution<int> pick_t(1, sched.steps());
  double total = 0.0;
  double count = 0.0;
  for (const Tensor3 &x0 : data) {
    for (int k = 0; k < draws; ++k) {
      const int t = pick_t(rng);
      const ForwardSample fs = forward_sample(x0, t, sched, rng);
      const Tensor3 pred = model.predict(fs.xt, t, sched);
      total += (pred.vector() - fs.eps.vector()).squaredNorm();
      count += double(x0.size());
    }
  }
  return total / count;
}

namespace {

// Zero predictor: E||eps||^2 per element.
double zero_loss(const std::vector<Tensor3> &data, const NoiseSchedule &sched,
                 std::mt19937_64 &rng, int draws) {
  double total = 0.0, count = 0.0;
  for (const Tensor3 &x0 : data) {
    for (int k = 0; k < draws; ++k) {
      const ForwardSample fs = forward_sample(x0, 1, sched, rng);
      total += fs.eps.vector().squaredNorm();
      count += double(x0.size());
    }
  }
  return count > 0 ? total / count : std::numeric_limits<double>::quiet_NaN();
}

} // namespace

TrainReport train_denoiser(TinyDenoiser &model, const std::vector<Tensor3> &dataset,
                           const NoiseSchedule &sched, const TrainOptions &opts) {
  if (dataset.empty()) throw ParameterError("train_denoiser: dataset is empty");
  for (const Tensor3 &x : dataset) {
    if (x.bands() != model.bands() || !x.same_shape(dataset.front())) {
      throw ShapeError("train_denoiser: dataset items must share one shape with " +
                       std::to_string(model.bands()) + " bands");
    }
  }
  if (opts.steps < 1 || !(opts.learning_rate > 0.0) || opts.momentum < 0.0 || opts.momentum >= 1.0) {
    throw ParameterError("train_denoiser: invalid optimizer settings");
  }
  if (opts.holdout_fraction < 0.0 || opts.holdout_fraction >= 1.0) {
    throw ParameterError("train_denoiser: holdout_fraction must lie in [0, 1)");
  }

  std::mt19937_64 rng(opts.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  auto n_hold = static_cast<std::size_t>(opts.holdout_fraction * double(dataset.size()));
  if (n_hold >= dataset.size()) n_hold = dataset.size() - 1;
  std::vector<Tensor3> held, train;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_hold ? held : train).push_back(dataset[order[i]]);
  }

  const double decay = std::pow(std::clamp(opts.final_lr_fraction, 1e-6, 1.0),
                                1.0 / double(std::max<long>(opts.steps - 1, 1)));
  std::vector<double> velocity(model.parameter_count(), 0.0);
  std::vector<double> grad;
  std::uniform_int_distribution<int> pick_t(1, sched.steps());
  std::uniform_int_distribution<std::size_t> pick_item(0, train.size() - 1);

  TrainReport report;
  report.step_losses.reserve(static_cast<std::size_t>(opts.steps));
  double lr = opts.learning_rate;
  double epoch_sum = 0.0;
  long epoch_count = 0;
  long epoch = 0;
  for (long step = 0; step < opts.steps; ++step) {
    const Tensor3 &x0 = train[pick_item(rng)];
    const int t = pick_t(rng);
    const ForwardSample fs = forward_sample(x0, t, sched, rng);
    const double loss = model.squared_error_gradient(fs.xt, t, sched, fs.eps, grad);
    if (!std::isfinite(loss)) {
      throw TrainingError("train_denoiser: non-finite loss at step " + std::to_string(step), step);
    }

    double gnorm = 0.0;
    for (double v : grad) gnorm += v * v;
    gnorm = std::sqrt(gnorm);
    if (!std::isfinite(gnorm)) {
      throw TrainingError("train_denoiser: non-finite gradient at step " + std::to_string(step), step);
    }
    const double clip = (opts.clip_norm > 0.0 && gnorm > opts.clip_norm) ? opts.clip_norm / gnorm : 1.0;
    auto theta = model.parameters();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      velocity[i] = opts.momentum * velocity[i] - lr * clip * grad[i];
      theta[i] += velocity[i];
    }
    lr *= decay;

    report.step_losses.push_back(loss);
    if (opts.on_step) opts.on_step(step, loss);
    epoch_sum += loss;
    ++epoch_count;
    if (epoch_count == static_cast<long>(train.size()) || step + 1 == opts.steps) {
      report.epochs.push_back({epoch++, epoch_sum / double(epoch_count)});
      epoch_sum = 0.0;
      epoch_count = 0;
    }
  }

  std::mt19937_64 eval_rng(opts.seed ^ 0x9e3779b97f4a7c15ULL);
  report.holdout_loss = denoiser_loss(model, held, sched, eval_rng, opts.eval_draws);
  report.zero_predictor_loss = zero_loss(held.empty() ? train : held, sched, eval_rng, opts.eval_draws);
  return report;
}

// --- weight file ------------------------------------------------------------
//
//   8 bytes   magic "PLRDTDN1"
//   u32       tensor count N
//   N times:  u32 rank, rank x u32 dims
//   payload:  f32 values of every tensor in order, little endian
//
// Tensor order and shapes follow TinyDenoiser::param_shapes().

namespace {

constexpr char kMagic[8] = {'P', 'L', 'R', 'D', 'T', 'D', 'N', '1'};

template <class T> void write_le(std::ostream &os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    os.write(bytes.data(), sizeof(T));
  } else {
    os.write(reinterpret_cast<const char *>(&v), sizeof(T));
  }
}

template <class T> T read_le(std::istream &is, const std::filesystem::path &path) {
  std::array<char, sizeof(T)> bytes{};
  if (!is.read(bytes.data(), sizeof(T))) throw IoError(path.string() + ": truncated weight file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

} // namespace

void save_weights(const TinyDenoiser &model, const std::filesystem::path &path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(path.string() + ": cannot open for writing");
  os.write(kMagic, sizeof(kMagic));
  const auto shapes = model.param_shapes();
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(shapes.size()));
  for (const auto &shape : shapes) {
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(shape.size()));
    for (std::uint32_t d : shape) write_le<std::uint32_t>(os, d);
  }
  for (double v : model.parameters()) write_le<float>(os, static_cast<float>(v));
  if (!os) throw IoError(path.string() + ": write failed");
}

TinyDenoiser load_weights(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(path.string() + ": cannot open weight file");
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError(path.string() + ": bad magic, not a TinyDenoiser weight file");
  }
  const auto count = read_le<std::uint32_t>(is, path);
  if (count != 10) throw IoError(path.string() + ": expected 10 tensors, found " + std::to_string(count));
  std::vector<ParamShape> shapes(count);
  std::size_t total = 0;
  for (auto &shape : shapes) {
    const auto rank = read_le<std::uint32_t>(is, path);
    if (rank == 0 || rank > 4) throw IoError(path.string() + ": invalid tensor rank");
    shape.resize(rank);
    std::size_t n = 1;
    for (auto &d : shape) {
      d = read_le<std::uint32_t>(is, path);
      n *= d;
    }
    total += n;
  }
  if (shapes[0].size() != 4 || shapes[2].size() != 2) throw IoError(path.string() + ": unexpected layout");
  const Index bands = shapes[0][2], channels = shapes[0][3], embedding = shapes[2][0];
  std::vector<double> params(total);
  for (double &v : params) v = static_cast<double>(read_le<float>(is, path));
  TinyDenoiser model(bands, channels, embedding, std::move(params));
  if (model.param_shapes() != shapes) throw IoError(path.string() + ": tensor shapes are inconsistent");
  return model;
}

} // namespace plrdiff
