#include "plrdiff/sampler.hpp"

#include "plrdiff/error.hpp"

#include <cmath>
#include <ostream>
#include <string>

namespace plrdiff {

void GuidanceConfig::validate() const {
  if (!(eta1 >= 0.0) || !std::isfinite(eta1)) throw ParameterError("eta1 must be >= 0");
  if (!(eta2 >= 0.0) || !std::isfinite(eta2)) throw ParameterError("eta2 must be >= 0");
  if (!(norm_floor > 0.0)) throw ParameterError("norm_floor must be > 0");
}

void write_trace_csv(std::ostream &os, const Trace &trace) {
  os << "t,residual_lrms,residual_pan,eps_norm,a_norm\n";
  os.precision(17);
  for (const auto &d : trace) {
    os << d.t << ',' << d.residual_lrms << ',' << d.residual_pan << ',' << d.eps_norm << ','
       << d.a_norm << '\n';
  }
}

Tensor3 ancestral_mean(const Tensor3 &a_t, const Tensor3 &eps_hat, double alpha, double alpha_bar) {
  Tensor3 out = a_t;
  if (alpha_bar < 1.0) out.axpy(-(1.0 - alpha) / std::sqrt(1.0 - alpha_bar), eps_hat);
  out *= 1.0 / std::sqrt(alpha);
  return out;
}

SamplerState ancestral_step(SamplerState state, const NoisePredictor &predictor,
                            const NoiseSchedule &sched) {
  const int t = state.t;
  if (t < 1 || t > sched.steps()) {
    throw ParameterError("ancestral_step: t = " + std::to_string(t) + " out of range");
  }
  const Tensor3 eps = predictor.predict(state.a, t, sched);
  Tensor3 next = ancestral_mean(state.a, eps, sched.alpha(t), sched.alpha_bar(t));
  if (t > 1) {
    const Tensor3 z = random_normal(next.height(), next.width(), next.bands(), state.rng);
    next.axpy(std::sqrt(1.0 - sched.alpha(t)), z);
  }
  if (!next.all_finite()) {
    throw DivergenceError("sampler diverged at step t = " + std::to_string(t), t);
  }
  if (state.record_trace) {
    StepDiagnostics d;
    d.t = t;
    d.eps_norm = frobenius_norm(eps);
    d.a_norm = frobenius_norm(next);
    state.trace.push_back(d);
  }
  state.a = std::move(next);
  state.t = t - 1;
  return state;
}

Tensor3 ancestral_sample(Index height, Index width, Index bands, const NoisePredictor &predictor,
                         const NoiseSchedule &sched, std::uint64_t seed) {
  SamplerState state;
  state.rng.seed(seed);
  state.a = random_normal(height, width, bands, state.rng);
  state.t = sched.steps();
  while (state.t > 0) state = ancestral_step(std::move(state), predictor, sched);
  return std::move(state.a);
}

Tensor3 tweedie_estimate(const Tensor3 &a_t, int t, const NoisePredictor &predictor,
                         const NoiseSchedule &sched) {
  if (t < 0 || t > sched.steps()) throw ParameterError("tweedie_estimate: t out of range");
  if (t == 0) return a_t;
  const double ab = sched.alpha_bar(t);
  Tensor3 out = a_t;
  out.axpy(-std::sqrt(1.0 - ab), predictor.predict(a_t, t, sched));
  out *= 1.0 / std::sqrt(ab);
  return out;
}

namespace {

void check_problem(const Tensor3 &a, const GuidanceProblem &p) {
  if (p.e.cols() != a.bands()) {
    throw ShapeError("guidance: E has " + std::to_string(p.e.cols()) + " columns, iterate has " +
                     std::to_string(a.bands()) + " bands");
  }
  if (p.lrms.bands() != p.e.rows() || p.model.response.size() != p.e.rows()) {
    throw ShapeError("guidance: LRMS bands, response length and E rows must agree");
  }
  if (p.pan.bands() != 1 || p.pan.height() != a.height() || p.pan.width() != a.width()) {
    throw ShapeError("guidance: PAN must be H x W x 1 matching the iterate");
  }
  if (p.lrms.height() * p.model.scale != a.height() || p.lrms.width() * p.model.scale != a.width()) {
    throw ShapeError("guidance: LRMS size times scale must equal the iterate size");
  }
}

} // namespace

GuidanceResult guidance(const Tensor3 &a_point, const GuidanceProblem &p,
                        const NoisePredictor &predictor, int t, const NoiseSchedule &sched,
                        const GuidanceConfig &cfg) {
  cfg.validate();
  check_problem(a_point, p);
  if (t < 0 || t > sched.steps()) throw ParameterError("guidance: t out of range");
  if (cfg.vjp_mode == VjpMode::Full && t > 0 && !predictor.supports_vjp()) {
    throw CapabilityError("guidance: full vjp mode requires a predictor with vjp support");
  }

  GuidanceResult out;
  out.gradient = Tensor3(a_point.height(), a_point.width(), a_point.bands());
  if (!cfg.enabled()) return out;

  const Tensor3 a0 = tweedie_estimate(a_point, t, predictor, sched);

  // Gradient of the objective with respect to A0_hat. The LRMS term uses
  // D(B(A0)) x_3 E = D(B(A0 x_3 E)), which only blurs the s-band tensor.
  Tensor3 g(a_point.height(), a_point.width(), a_point.bands());
  if (cfg.eta1 > 0.0) {
    Tensor3 r1 = mode3_mul(spatial_degrade(a0, p.model), p.e);
    r1 -= p.lrms;
    out.residual_lrms = frobenius_norm(r1);
    r1 *= 1.0 / std::max(out.residual_lrms, cfg.norm_floor);
    g.axpy(cfg.eta1, spatial_degrade_adjoint(mode3_mul_adjoint(r1, p.e), p.model));
  }
  if (cfg.eta2 > 0.0) {
    const Mat re = p.model.response.transpose() * p.e;  // 1 x s
    Tensor3 r2 = mode3_mul(a0, re);
    r2 -= p.pan;
    out.residual_pan = frobenius_norm(r2);
    r2 *= 1.0 / std::max(out.residual_pan, cfg.norm_floor);
    g.axpy(cfg.eta2, mode3_mul_adjoint(r2, re));
  }

  // Chain rule through A0_hat(a) = (a - sqrt(1 - ab) eps(a)) / sqrt(ab).
  if (t > 0) {
    const double ab = sched.alpha_bar(t);
    if (cfg.vjp_mode == VjpMode::Full) {
      g.axpy(-std::sqrt(1.0 - ab), predictor.vjp(a_point, t, sched, g));
    }
    g *= 1.0 / std::sqrt(ab);
  }
  g *= -1.0;
  out.gradient = std::move(g);
  return out;
}

Tensor3 guidance_gradient(const Tensor3 &a_point, const Tensor3 &lrms, const Tensor3 &pan,
                          const Mat &e, const DegradationModel &model,
                          const NoisePredictor &predictor, int t, const NoiseSchedule &sched,
                          const GuidanceConfig &cfg) {
  return guidance(a_point, GuidanceProblem{lrms, pan, e, model}, predictor, t, sched, cfg).gradient;
}

SampleResult plrdiff_sample_with_coefficients(const Tensor3 &lrms, const Tensor3 &pan, const Mat &e,
                                              const DegradationModel &model,
                                              const NoisePredictor &predictor,
                                              const NoiseSchedule &sched, const GuidanceConfig &cfg,
                                              std::uint64_t seed, bool record_trace) {
  cfg.validate();
  if (pan.bands() != 1) throw ShapeError("plrdiff_sample: PAN must have one band");
  model.validate_for(pan.height(), pan.width(), lrms.bands());
  if (lrms.height() * model.scale != pan.height() || lrms.width() * model.scale != pan.width()) {
    throw ShapeError("plrdiff_sample: LRMS " + std::to_string(lrms.height()) + "x" +
                     std::to_string(lrms.width()) + " times scale " + std::to_string(model.scale) +
                     " does not match PAN " + std::to_string(pan.height()) + "x" +
                     std::to_string(pan.width()));
  }
  if (e.rows() != lrms.bands() || e.cols() < 1) {
    throw ShapeError("plrdiff_sample: E must be S x s with S = LRMS bands");
  }
  if (cfg.enabled() && cfg.vjp_mode == VjpMode::Full && !predictor.supports_vjp()) {
    throw CapabilityError("plrdiff_sample: full vjp mode requires a predictor with vjp support");
  }

  const GuidanceProblem problem{lrms, pan, e, model};
  SamplerState state;
  state.rng.seed(seed);
  state.record_trace = record_trace;
  state.a = random_normal(pan.height(), pan.width(), e.cols(), state.rng);
  state.t = sched.steps();
  while (state.t > 0) {
    const int t = state.t;
    state = ancestral_step(std::move(state), predictor, sched);
    if (!cfg.enabled()) continue;
    const GuidanceResult n = guidance(state.a, problem, predictor, t - 1, sched, cfg);
    state.a.axpy((1.0 - sched.alpha(t)) / std::sqrt(sched.alpha(t)), n.gradient);
    if (!state.a.all_finite()) {
      throw DivergenceError("guided sampler diverged at step t = " + std::to_string(t), t);
    }
    if (record_trace) {
      StepDiagnostics &d = state.trace.back();
      d.residual_lrms = n.residual_lrms;
      d.residual_pan = n.residual_pan;
      d.a_norm = frobenius_norm(state.a);
    }
  }

  SampleResult result;
  result.hrms = reconstruct(state.a, e);
  result.a0 = std::move(state.a);
  result.e = e;
  result.trace = std::move(state.trace);
  return result;
}

SampleResult plrdiff_sample(const Tensor3 &lrms, const Tensor3 &pan, const BandSelection &sel,
                            const DegradationModel &model, const NoisePredictor &predictor,
                            const NoiseSchedule &sched, const GuidanceConfig &cfg,
                            std::uint64_t seed, bool record_trace) {
  if (sel.total_bands() != lrms.bands()) {
    throw ShapeError("plrdiff_sample: band selection is for " + std::to_string(sel.total_bands()) +
                     " bands, LRMS has " + std::to_string(lrms.bands()));
  }
  const Mat e = estimate_coefficients(lrms, sel);
  return plrdiff_sample_with_coefficients(lrms, pan, e, model, predictor, sched, cfg, seed,
                                          record_trace);
}

} // namespace plrdiff
