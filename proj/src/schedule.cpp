#include "plrdiff/schedule.hpp"

#include "plrdiff/error.hpp"

#include <cmath>
#include <string>

namespace plrdiff {

NoiseSchedule::NoiseSchedule(std::vector<double> alphas) {
  if (alphas.empty()) throw ParameterError("noise schedule needs at least one step");
  alpha_.reserve(alphas.size() + 1);
  alpha_bar_.reserve(alphas.size() + 1);
  alpha_.push_back(1.0);
  alpha_bar_.push_back(1.0);
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    const double a = alphas[i];
    if (!(a > 0.0 && a < 1.0)) {
      throw ParameterError("alpha_" + std::to_string(i + 1) + " = " + std::to_string(a) +
                           " outside (0, 1)");
    }
    alpha_.push_back(a);
    alpha_bar_.push_back(alpha_bar_.back() * a);
  }
}

void NoiseSchedule::require_terminal_below(double threshold) const {
  if (!(alpha_bar_.back() < threshold)) {
    throw ParameterError("alpha_bar_T = " + std::to_string(alpha_bar_.back()) +
                         " is not below " + std::to_string(threshold) +
                         "; use more steps or a larger beta_end");
  }
}

NoiseSchedule linear_schedule(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw ParameterError("linear_schedule: T must be >= 1");
  // A single-step schedule only uses beta_start.
  const bool end_used = steps > 1;
  if (!(beta_start > 0.0) || beta_start >= 1.0 ||
      (end_used && (!(beta_end > 0.0) || beta_end >= 1.0))) {
    throw ParameterError("linear_schedule: betas must lie in (0, 1), got " +
                         std::to_string(beta_start) + ", " + std::to_string(beta_end) +
                         " for T = " + std::to_string(steps));
  }
  std::vector<double> alphas(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : double(i) / double(steps - 1);
    alphas[static_cast<std::size_t>(i)] = 1.0 - (beta_start + frac * (beta_end - beta_start));
  }
  return NoiseSchedule(std::move(alphas));
}

NoiseSchedule linear_schedule(int steps) {
  if (steps < 1) throw ParameterError("linear_schedule: T must be >= 1");
  const double k = 1000.0 / double(steps);
  return linear_schedule(steps, kDefaultBetaStart * k, kDefaultBetaEnd * k);
}

ForwardSample forward_sample(const Tensor3 &x0, int t, const NoiseSchedule &sched,
                             std::mt19937_64 &rng) {
  if (t < 0 || t > sched.steps()) throw ParameterError("forward_sample: t out of range");
  Tensor3 eps = random_normal(x0.height(), x0.width(), x0.bands(), rng);
  const double ab = sched.alpha_bar(t);
  Tensor3 xt = x0 * std::sqrt(ab);
  xt.axpy(std::sqrt(1.0 - ab), eps);
  return {std::move(xt), std::move(eps)};
}

Tensor3 forward_step(const Tensor3 &x_prev, int t, const NoiseSchedule &sched,
                     std::mt19937_64 &rng) {
  if (t < 1 || t > sched.steps()) throw ParameterError("forward_step: t out of range");
  const Tensor3 z = random_normal(x_prev.height(), x_prev.width(), x_prev.bands(), rng);
  Tensor3 xt = x_prev * std::sqrt(sched.alpha(t));
  xt.axpy(std::sqrt(1.0 - sched.alpha(t)), z);
  return xt;
}

} // namespace plrdiff
