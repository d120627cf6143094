#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "psyduck/keys.hpp"
#include "psyduck/sample.hpp"

namespace psyduck {

/// Linear variance schedule with derived quantities. Timesteps are 1-based;
/// alpha_bar(0) is 1 by convention, which makes sigma(1) exactly zero.
class Schedule {
 public:
  /// Builds from explicit betas (beta_1..beta_T). Throws ParameterError
  /// unless 0 < beta < 1 and betas are nondecreasing.
  explicit Schedule(std::vector<double> betas);

  std::size_t T() const noexcept { return beta_.size(); }
  double beta(std::size_t t) const { return beta_.at(check(t) - 1); }
  double alpha_bar(std::size_t t) const;  // t in [0, T]
  double sigma(std::size_t t) const { return sigma_.at(check(t) - 1); }

  const std::vector<double>& betas() const noexcept { return beta_; }
  const std::vector<double>& sigmas() const noexcept { return sigma_; }

  /// Copy with sigma_t multiplied by `factor` for t >= from_t while betas
  /// and alpha_bar stay untouched. Used to model a miscalibrated sampler.
  Schedule with_scaled_sigma(double factor, std::size_t from_t = 1) const;

 private:
  std::size_t check(std::size_t t) const;

  std::vector<double> beta_;
  std::vector<double> alpha_bar_;
  std::vector<double> sigma_;
};

/// T >= 2, 0 < beta_start <= beta_end < 1, betas linear inclusive of ends.
Schedule make_schedule(std::size_t T, double beta_start, double beta_end);

/// "linear-1000" (T=1000, 1e-4..0.02) or "linear-50" (T=50, 1e-4..0.05).
Schedule schedule_preset(std::string_view name);

enum class StepMode { stochastic, deterministic };
enum class BackendKind { analytic_gaussian, external_bridge };

std::string_view to_string(StepMode m);
StepMode parse_step_mode(std::string_view text);

/// Deterministic part of a denoising step served by something other than the
/// analytic model (the subprocess bridge, or a test double).
class MeanPredictor {
 public:
  virtual ~MeanPredictor() = default;
  /// Returns mu(x_t, t), the mean of x_{t-1}.
  virtual Sample predict_mean(const Sample& x_t, std::size_t t) = 0;
};

struct BackendSpec {
  BackendKind kind = BackendKind::analytic_gaussian;
  /// Prior N(mu0, s0^2). Size 1 broadcasts, otherwise one entry per element.
  std::vector<double> prior_mean{0.0};
  std::vector<double> prior_std{1.0};
  StepMode step_mode = StepMode::stochastic;
  std::shared_ptr<MeanPredictor> predictor;  // required for external_bridge
};

void validate_backend(const BackendSpec& spec, std::size_t element_count);

/// Closed-form marginal x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps with
/// eps = gaussian_field(ctx).
Sample forward_diffuse(const Sample& x0, std::size_t t, const Schedule& sched,
                       const NoiseContext& ctx);

/// E[x0 | x_t] under the Gaussian prior of `spec`.
Sample posterior_x0(const Sample& x_t, std::size_t t, const Schedule& sched,
                    const BackendSpec& spec);

/// Mean of x_{t-1}: the DDPM posterior mean built from x_t and E[x0 | x_t].
/// Delegates to spec.predictor for external backends.
Sample model_predict(const Sample& x_t, std::size_t t, const Schedule& sched,
                     const BackendSpec& spec);

/// One reverse step. The key only selects the injected noise
/// sigma_t * gaussian_field(key, t, step); the mean never depends on it.
Sample diffusion_step(const Sample& x_t, std::size_t t, const SecretKey& key,
                      const Schedule& sched, const BackendSpec& spec);

/// Shared initial noise x_T = gaussian_field(k_s, T, initial).
Sample preprocess(const SecretKey& sync, const Shape& shape, const Schedule& sched,
                  Precision precision = Precision::f64, Space space = Space::latent);

/// Runs diffusion_step with `key` from t_start down to t_end + 1, returning
/// x_{t_end}.
Sample denoise(Sample x, std::size_t t_start, std::size_t t_end, const SecretKey& key,
               const Schedule& sched, const BackendSpec& spec);

}  // namespace psyduck
