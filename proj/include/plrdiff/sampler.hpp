#pragma once

#include "plrdiff/degrade.hpp"
#include "plrdiff/denoiser.hpp"
#include "plrdiff/schedule.hpp"
#include "plrdiff/subspace.hpp"
#include "plrdiff/tensor3.hpp"

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

namespace plrdiff {

enum class VjpMode {
  StopGradient,  ///< d A0_hat / d a treated as identity / sqrt(alpha_bar)
  Full,          ///< includes the predictor Jacobian through vjp()
};

/// Step sizes of the LRMS (eta1) and PAN (eta2) fidelity gradients.
struct GuidanceConfig {
  double eta1 = 1.0;
  double eta2 = 2.0;
  VjpMode vjp_mode = VjpMode::StopGradient;
  double norm_floor = 1e-12;

  void validate() const;
  bool enabled() const noexcept { return eta1 != 0.0 || eta2 != 0.0; }
};

struct StepDiagnostics {
  int t = 0;
  double residual_lrms = 0.0;  ///< ||D(B(A0_hat)) x_3 E - Y||_F after the step
  double residual_pan = 0.0;   ///< ||A0_hat x_3 E x_3 r - P||_F after the step
  double eps_norm = 0.0;       ///< ||eps_hat|| used by the ancestral step
  double a_norm = 0.0;         ///< ||a_{t-1}||
};

using Trace = std::vector<StepDiagnostics>;

/// Writes "t,residual_lrms,residual_pan,eps_norm,a_norm" rows.
void write_trace_csv(std::ostream &os, const Trace &trace);

struct SamplerState {
  Tensor3 a;  ///< current iterate a_t
  int t = 0;  ///< time index of `a`
  std::mt19937_64 rng;
  bool record_trace = false;
  Trace trace;
};

/// Mean of p(a_{t-1} | a_t): (a - (1 - alpha)/sqrt(1 - alpha_bar) eps_hat) / sqrt(alpha).
Tensor3 ancestral_mean(const Tensor3 &a_t, const Tensor3 &eps_hat, double alpha, double alpha_bar);

/// One reverse step t -> t-1. Noise is added for t > 1 only. Throws
/// DivergenceError if the new iterate is not finite.
SamplerState ancestral_step(SamplerState state, const NoisePredictor &predictor,
                            const NoiseSchedule &sched);

/// Unconditional chain a_T ~ N(0, I) -> a_0.
Tensor3 ancestral_sample(Index height, Index width, Index bands, const NoisePredictor &predictor,
                         const NoiseSchedule &sched, std::uint64_t seed);

/// Posterior-mean estimate A0_hat = (a_t - sqrt(1 - ab_t) eps_hat) / sqrt(ab_t).
/// At t = 0 the iterate is returned unchanged.
Tensor3 tweedie_estimate(const Tensor3 &a_t, int t, const NoisePredictor &predictor,
                         const NoiseSchedule &sched);

/// Observations and fixed spectral coefficients shared by every guidance call.
struct GuidanceProblem {
  const Tensor3 &lrms;  ///< h x w x S
  const Tensor3 &pan;   ///< H x W x 1
  const Mat &e;         ///< S x s
  const DegradationModel &model;
};

struct GuidanceResult {
  Tensor3 gradient;  ///< n = -eta1 G1 - eta2 G2
  double residual_lrms = 0.0;
  double residual_pan = 0.0;
};

/**
 * Negative gradient of
 *   eta1 ||D(B(A0_hat)) x_3 E - Y||_F + eta2 ||A0_hat x_3 E x_3 r - P||_F
 * with respect to the iterate at time t, where A0_hat = tweedie_estimate.
 * Norms below cfg.norm_floor are clamped so exact consistency gives zero.
 */
GuidanceResult guidance(const Tensor3 &a_point, const GuidanceProblem &problem,
                        const NoisePredictor &predictor, int t, const NoiseSchedule &sched,
                        const GuidanceConfig &cfg);

Tensor3 guidance_gradient(const Tensor3 &a_point, const Tensor3 &lrms, const Tensor3 &pan,
                          const Mat &e, const DegradationModel &model,
                          const NoisePredictor &predictor, int t, const NoiseSchedule &sched,
                          const GuidanceConfig &cfg);

struct SampleResult {
  Tensor3 hrms;  ///< a0 x_3 E
  Tensor3 a0;
  Mat e;
  Trace trace;
};

/**
 * Guided reverse diffusion over the base tensor.
 *
 * E is estimated once from the LRMS and held fixed. Each step draws
 * a_{t-1} from the ancestral kernel, then moves it along the guidance
 * gradient evaluated at a_{t-1}, scaled by (1 - alpha_t)/sqrt(alpha_t).
 */
SampleResult plrdiff_sample(const Tensor3 &lrms, const Tensor3 &pan, const BandSelection &sel,
                            const DegradationModel &model, const NoisePredictor &predictor,
                            const NoiseSchedule &sched, const GuidanceConfig &cfg,
                            std::uint64_t seed, bool record_trace = false);

/// Same loop with a caller-supplied coefficient matrix (S x s).
SampleResult plrdiff_sample_with_coefficients(const Tensor3 &lrms, const Tensor3 &pan, const Mat &e,
                                              const DegradationModel &model,
                                              const NoisePredictor &predictor,
                                              const NoiseSchedule &sched, const GuidanceConfig &cfg,
                                              std::uint64_t seed, bool record_trace = false);

} // namespace plrdiff
