#pragma once

#include "plrdiff/tensor3.hpp"

#include <random>
#include <vector>

namespace plrdiff {

/**
 * Discrete diffusion schedule over steps t = 1..T.
 *
 * alpha(t) in (0, 1); alpha_bar(t) = prod_{i<=t} alpha(i), strictly
 * decreasing. alpha_bar(0) = 1 by convention, so the clean signal sits at
 * t = 0.
 */
class NoiseSchedule {
public:
  /// Builds from per-step alphas (alphas[0] is alpha_1).
  explicit NoiseSchedule(std::vector<double> alphas);

  int steps() const noexcept { return static_cast<int>(alpha_.size()) - 1; }
  double alpha(int t) const { return alpha_.at(static_cast<std::size_t>(t)); }
  double beta(int t) const { return 1.0 - alpha(t); }
  double alpha_bar(int t) const { return alpha_bar_.at(static_cast<std::size_t>(t)); }

  /// Throws ParameterError unless alpha_bar(T) < threshold.
  void require_terminal_below(double threshold) const;

private:
  std::vector<double> alpha_;      // index 0 unused (1.0)
  std::vector<double> alpha_bar_;  // index 0 == 1.0
};

constexpr double kDefaultBetaStart = 1e-4;
constexpr double kDefaultBetaEnd = 0.02;
constexpr double kDefaultTerminalThreshold = 1e-3;

/// Betas linearly spaced from beta_start to beta_end over T steps.
NoiseSchedule linear_schedule(int steps, double beta_start, double beta_end);

/// Default linear schedule with both endpoints rescaled by 1000/T so the
/// total injected noise does not depend on T to first order. For 1 < T <= 20
/// the rescaled beta_T reaches 1 and ParameterError is thrown; pass explicit
/// betas there. T = 1 uses beta_1 = 0.1 only.
NoiseSchedule linear_schedule(int steps);

struct ForwardSample {
  Tensor3 xt;
  Tensor3 eps;
};

/// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps, eps ~ N(0, I). t = 0 returns x0.
ForwardSample forward_sample(const Tensor3 &x0, int t, const NoiseSchedule &sched,
                             std::mt19937_64 &rng);

/// One forward transition x_t = sqrt(alpha_t) x_{t-1} + sqrt(1 - alpha_t) z.
Tensor3 forward_step(const Tensor3 &x_prev, int t, const NoiseSchedule &sched,
                     std::mt19937_64 &rng);

} // namespace plrdiff
