#include "psyduck/diffusion.hpp"

#include <cmath>

#include "psyduck/error.hpp"

namespace psyduck {

Schedule::Schedule(std::vector<double> betas) : beta_(std::move(betas)) {
  if (beta_.empty()) throw ParameterError("schedule needs at least one step");
  for (std::size_t i = 0; i < beta_.size(); ++i) {
    if (!(beta_[i] > 0.0 && beta_[i] < 1.0))
      throw ParameterError("beta values must lie in (0, 1)");
    if (i > 0 && beta_[i] < beta_[i - 1]) throw ParameterError("betas must be nondecreasing");
  }
  alpha_bar_.resize(beta_.size());
  sigma_.resize(beta_.size());
  double prev = 1.0;
  for (std::size_t i = 0; i < beta_.size(); ++i) {
    alpha_bar_[i] = prev * (1.0 - beta_[i]);
    sigma_[i] = std::sqrt(beta_[i] * (1.0 - prev) / (1.0 - alpha_bar_[i]));
    prev = alpha_bar_[i];
  }
}

std::size_t Schedule::check(std::size_t t) const {
  if (t < 1 || t > beta_.size())
    throw ParameterError("timestep " + std::to_string(t) + " outside [1, " +
                         std::to_string(beta_.size()) + "]");
  return t;
}

double Schedule::alpha_bar(std::size_t t) const {
  if (t == 0) return 1.0;
  return alpha_bar_.at(check(t) - 1);
}

Schedule Schedule::with_scaled_sigma(double factor, std::size_t from_t) const {
  if (!(factor >= 0.0)) throw ParameterError("sigma scale must be >= 0");
  Schedule copy = *this;
  for (std::size_t t = std::max<std::size_t>(from_t, 1); t <= T(); ++t) copy.sigma_[t - 1] *= factor;
  return copy;
}

Schedule make_schedule(std::size_t T, double beta_start, double beta_end) {
  if (T < 2) throw ParameterError("schedule needs T >= 2");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw ParameterError("need 0 < beta_start <= beta_end < 1");
  std::vector<double> betas(T);
  for (std::size_t i = 0; i < T; ++i)
    betas[i] = beta_start + (beta_end - beta_start) * static_cast<double>(i) /
                                static_cast<double>(T - 1);
  betas.back() = beta_end;
  return Schedule(std::move(betas));
}

Schedule schedule_preset(std::string_view name) {
  if (name == "linear-1000") return make_schedule(1000, 1e-4, 0.02);
  if (name == "linear-50") return make_schedule(50, 1e-4, 0.05);
  throw ParameterError("unknown schedule preset '" + std::string(name) + "'");
}

std::string_view to_string(StepMode m) {
  return m == StepMode::stochastic ? "stochastic" : "deterministic";
}

StepMode parse_step_mode(std::string_view text) {
  if (text == "stochastic") return StepMode::stochastic;
  if (text == "deterministic") return StepMode::deterministic;
  throw ParameterError("unknown step mode '" + std::string(text) + "'");
}

void validate_backend(const BackendSpec& spec, std::size_t n) {
  if (spec.kind == BackendKind::external_bridge) {
    if (!spec.predictor) throw ParameterError("external backend has no predictor attached");
    return;
  }
  auto check_size = [n](const std::vector<double>& v, const char* what) {
    if (v.size() != 1 && v.size() != n)
      throw ShapeError(std::string(what) + " must have 1 or " + std::to_string(n) + " entries");
  };
  check_size(spec.prior_mean, "prior_mean");
  check_size(spec.prior_std, "prior_std");
  for (double s : spec.prior_std)
    if (!(s > 0.0) || !std::isfinite(s)) throw ParameterError("prior_std must be > 0");
}

Sample forward_diffuse(const Sample& x0, std::size_t t, const Schedule& sched,
                       const NoiseContext& ctx) {
  const double abar = sched.alpha_bar(t);
  if (t == 0) throw ParameterError("forward_diffuse needs t >= 1");
  const Sample eps = gaussian_field(ctx, x0.shape, Precision::f64);
  Sample out = x0;
  const double a = std::sqrt(abar);
  const double b = std::sqrt(1.0 - abar);
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] = a * x0.values[i] + b * eps.values[i];
  out.normalize();
  return out;
}

Sample posterior_x0(const Sample& x_t, std::size_t t, const Schedule& sched,
                    const BackendSpec& spec) {
  validate_backend(spec, x_t.size());
  if (spec.kind != BackendKind::analytic_gaussian)
    throw ParameterError("posterior_x0 is only defined for the analytic backend");
  const double abar = sched.alpha_bar(t);
  if (t == 0) throw ParameterError("posterior_x0 needs t >= 1");
  const double sqrt_abar = std::sqrt(abar);
  const bool mean_bcast = spec.prior_mean.size() == 1;
  const bool std_bcast = spec.prior_std.size() == 1;
  Sample out = x_t;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double mu0 = spec.prior_mean[mean_bcast ? 0 : i];
    const double s0 = spec.prior_std[std_bcast ? 0 : i];
    const double s2 = s0 * s0;
    out.values[i] =
        (s2 * sqrt_abar * x_t.values[i] + (1.0 - abar) * mu0) / (s2 * abar + (1.0 - abar));
  }
  return out;
}

Sample model_predict(const Sample& x_t, std::size_t t, const Schedule& sched,
                     const BackendSpec& spec) {
  if (spec.kind == BackendKind::external_bridge) {
    validate_backend(spec, x_t.size());
    sched.beta(t);
    Sample mu = spec.predictor->predict_mean(x_t, t);
    require_same_shape(mu, x_t);
    return mu;
  }
  const Sample x0_hat = posterior_x0(x_t, t, sched, spec);
  const double beta = sched.beta(t);
  const double abar = sched.alpha_bar(t);
  const double abar_prev = sched.alpha_bar(t - 1);
  const double c_x0 = std::sqrt(abar_prev) * beta / (1.0 - abar);
  const double c_xt = std::sqrt(1.0 - beta) * (1.0 - abar_prev) / (1.0 - abar);
  Sample mu = x_t;
  for (std::size_t i = 0; i < mu.size(); ++i)
    mu.values[i] = c_x0 * x0_hat.values[i] + c_xt * x_t.values[i];
  return mu;
}

Sample diffusion_step(const Sample& x_t, std::size_t t, const SecretKey& key,
                      const Schedule& sched, const BackendSpec& spec) {
  const double sigma = sched.sigma(t);
  Sample out = model_predict(x_t, t, sched, spec);
  if (spec.step_mode == StepMode::stochastic && sigma != 0.0) {
    std::vector<double> eps(out.size());
    gaussian_values(NoiseContext{key, t, StreamTag::step}, 0, eps);
    for (std::size_t i = 0; i < out.size(); ++i) {
      // The noise is rounded at the sample precision like any stored field.
      out.values[i] += sigma * round_to(eps[i], x_t.precision);
    }
  }
  out.precision = x_t.precision;
  out.space = x_t.space;
  out.normalize();
  return out;
}

Sample preprocess(const SecretKey& sync, const Shape& shape, const Schedule& sched,
                  Precision precision, Space space) {
  Sample x = gaussian_field(NoiseContext{sync, sched.T(), StreamTag::initial}, shape, precision);
  x.space = space;
  return x;
}

Sample denoise(Sample x, std::size_t t_start, std::size_t t_end, const SecretKey& key,
               const Schedule& sched, const BackendSpec& spec) {
  if (t_end > t_start) throw ParameterError("denoise: t_end must not exceed t_start");
  for (std::size_t t = t_start; t > t_end; --t) x = diffusion_step(x, t, key, sched, spec);
  return x;
}

}  // namespace psyduck
