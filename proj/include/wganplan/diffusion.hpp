#pragma once

#include <cstddef>
#include <vector>

#include "wganplan/rng.hpp"
#include "wganplan/tensor.hpp"

namespace wganplan {

/// Forward-diffusion coefficients: per-step alpha_t and the cumulative
/// beta_hat_t = prod_{s<=t} alpha_s that makes the single-step closed form
/// match the step recursion in distribution.
struct NoiseSchedule {
    std::size_t steps = 0;          // T
    std::vector<double> alpha;      // alpha[t-1] = alpha_t, in (0,1]
    std::vector<double> beta_hat;   // beta_hat[t-1] = prod_{s<=t} alpha_s

    /// Default inference timestep for the planner (T/4).
    std::size_t default_inference_t() const { return std::max<std::size_t>(1, steps / 4); }
};

constexpr std::size_t kDefaultDiffusionSteps = 100;
constexpr double kDefaultBetaStart = 1e-4;
constexpr double kDefaultBetaEnd = 0.1;

/// Linear beta ramp from beta_start to beta_end; alpha_t = 1 - beta_t.
NoiseSchedule make_schedule(std::size_t steps = kDefaultDiffusionSteps,
                            double beta_start = kDefaultBetaStart,
                            double beta_end = kDefaultBetaEnd);

/// Single recursion step: sqrt(alpha_t) * x_prev + sqrt(1 - alpha_t) * noise.
Tensor forward_step(const Tensor& x_prev, std::size_t t, const NoiseSchedule& schedule,
                    const Tensor& noise);

/// Closed form: sqrt(beta_hat_t) * x0 + sqrt(1 - beta_hat_t) * noise.
Tensor diffuse(const Tensor& x0, std::size_t t, const NoiseSchedule& schedule, const Tensor& noise);

/// Standard-normal tensor of the given shape drawn from rng.
Tensor gaussian_like(const Tensor& x, Rng& rng);

}  // namespace wganplan
