#pragma once

#include "plrdiff/schedule.hpp"
#include "plrdiff/tensor3.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace plrdiff {

/**
 * Noise predictor eps_hat = eps_theta(a_t, t).
 *
 * vjp() returns (d eps_hat / d a_t)^T applied to a cotangent; predictors
 * without a Jacobian leave supports_vjp() false and throw CapabilityError.
 */
class NoisePredictor {
public:
  virtual ~NoisePredictor() = default;

  virtual Tensor3 predict(const Tensor3 &a_t, int t, const NoiseSchedule &sched) const = 0;
  virtual Tensor3 vjp(const Tensor3 &a_t, int t, const NoiseSchedule &sched,
                      const Tensor3 &cotangent) const;
  virtual bool supports_vjp() const { return false; }
};

struct GaussianPrior {
  Tensor3 mean;
  double variance = 1.0;
};

/// Exact noise predictor for a N(mean, variance I) data distribution.
class GaussianPredictor final : public NoisePredictor {
public:
  explicit GaussianPredictor(GaussianPrior prior);

  const GaussianPrior &prior() const noexcept { return prior_; }

  Tensor3 predict(const Tensor3 &a_t, int t, const NoiseSchedule &sched) const override;
  Tensor3 vjp(const Tensor3 &a_t, int t, const NoiseSchedule &sched,
              const Tensor3 &cotangent) const override;
  bool supports_vjp() const override { return true; }

  /// sqrt(1 - ab) / (ab * var + 1 - ab), the slope of eps_hat in a_t.
  double slope(double alpha_bar) const;

private:
  GaussianPrior prior_;
};

/// Shape of one parameter tensor, e.g. {out, in, 3, 3}.
using ParamShape = std::vector<std::uint32_t>;

/**
 * Shallow convolutional noise predictor.
 *
 *   h1 = silu(conv(x) + b1 + P1 emb(t))
 *   h2 = silu(conv(h1) + b2 + P2 emb(t))
 *   h3 = h2 + silu(conv(h2) + b3)
 *   out = conv(h3) + b4
 *
 * Convolutions are 3x3 with circular boundary. emb(t) is a sinusoidal
 * embedding of 1000 * t / T, so a model trained under one step count can be
 * sampled under another with the rescaled linear schedule. The output layer
 * starts at zero.
 */
class TinyDenoiser final : public NoisePredictor {
public:
  struct Options {
    Index bands = 3;
    Index channels = 16;
    Index embedding = 16;  ///< even
    std::uint64_t seed = 0;
  };

  /// Gradients with respect to input and parameters from one backward pass.
  struct Gradients {
    Tensor3 input;
    std::vector<double> params;
  };

  explicit TinyDenoiser(const Options &opts);
  /// Rebuilds from a flat parameter vector laid out as param_shapes().
  TinyDenoiser(Index bands, Index channels, Index embedding, std::vector<double> params);

  Index bands() const noexcept { return bands_; }
  Index channels() const noexcept { return channels_; }
  Index embedding() const noexcept { return embed_; }
  std::size_t parameter_count() const noexcept { return theta_.size(); }
  std::span<const double> parameters() const noexcept { return theta_; }
  std::span<double> parameters() noexcept { return theta_; }

  /// Shapes of w1, b1, p1, w2, b2, p2, w3, b3, w4, b4 in storage order.
  std::vector<ParamShape> param_shapes() const;

  Tensor3 predict(const Tensor3 &a_t, int t, const NoiseSchedule &sched) const override;
  Tensor3 vjp(const Tensor3 &a_t, int t, const NoiseSchedule &sched,
              const Tensor3 &cotangent) const override;
  bool supports_vjp() const override { return true; }

  /// Forward pass and full backward pass for the cotangent `grad_out`.
  Gradients backward(const Tensor3 &a_t, int t, const NoiseSchedule &sched,
                     const Tensor3 &grad_out, bool want_params) const;

  /// mean((eps_theta(a_t, t) - target)^2) and its parameter gradient, from a
  /// single forward pass. `grad` is left untouched when the loss is not finite.
  double squared_error_gradient(const Tensor3 &a_t, int t, const NoiseSchedule &sched,
                                const Tensor3 &target, std::vector<double> &grad) const;

private:
  struct Layout;
  struct Cache;

  Vec time_embedding(int t, int steps) const;
  void forward(const Tensor3 &x, int t, const NoiseSchedule &sched, Cache &cache) const;
  void check_input(const Tensor3 &x) const;
  Gradients backward_cached(const Cache &cache, Index height, Index width, const Mat &grad_out,
                            bool want_params) const;

  Index bands_;
  Index channels_;
  Index embed_;
  std::vector<double> theta_;
};

struct TrainOptions {
  long steps = 2000;
  double learning_rate = 0.05;
  double momentum = 0.9;
  /// Step size is multiplied by this factor over the full run (geometric decay).
  double final_lr_fraction = 0.1;
  /// Global gradient-norm clip; <= 0 disables.
  double clip_norm = 1.0;
  std::uint64_t seed = 0;
  /// Fraction of the dataset held out for the final loss report.
  double holdout_fraction = 0.2;
  /// Noise draws per held-out item when evaluating.
  int eval_draws = 8;
  std::function<void(long step, double loss)> on_step;
};

struct EpochLoss {
  long epoch;
  double loss;
};

struct TrainReport {
  std::vector<EpochLoss> epochs;  ///< mean per-element training loss per pass
  std::vector<double> step_losses;
  double holdout_loss = 0.0;      ///< per-element, NaN when there is no held-out split
  double zero_predictor_loss = 0.0;
};

/**
 * Fits `model` with the noise-prediction objective
 *   E_{x0, t, eps} mean((eps - eps_theta(sqrt(ab_t) x0 + sqrt(1 - ab_t) eps, t))^2)
 * by SGD with momentum. Throws TrainingError on a non-finite loss.
 */
TrainReport train_denoiser(TinyDenoiser &model, const std::vector<Tensor3> &dataset,
                           const NoiseSchedule &sched, const TrainOptions &opts);

/// Monte-Carlo per-element noise-prediction loss of `model` over `data`.
double denoiser_loss(const NoisePredictor &model, const std::vector<Tensor3> &data,
                     const NoiseSchedule &sched, std::mt19937_64 &rng, int draws);

void save_weights(const TinyDenoiser &model, const std::filesystem::path &path);
TinyDenoiser load_weights(const std::filesystem::path &path);

} // namespace plrdiff
