#include "wganplan/diffusion.hpp"

#include <cmath>
#include <stdexcept>

namespace wganplan {

NoiseSchedule make_schedule(std::size_t steps, double beta_start, double beta_end) {
    if (steps < 1) throw std::invalid_argument("make_schedule: need at least one step");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw std::invalid_argument("make_schedule: require 0 < beta_start <= beta_end < 1");

    NoiseSchedule s;
    s.steps = steps;
    s.alpha.resize(steps);
    s.beta_hat.resize(steps);
    double cumulative = 1.0;
    for (std::size_t t = 0; t < steps; ++t) {
        double frac = steps == 1 ? 0.0 : static_cast<double>(t) / static_cast<double>(steps - 1);
        double beta = beta_start + frac * (beta_end - beta_start);
        s.alpha[t] = 1.0 - beta;
        cumulative *= s.alpha[t];
        s.beta_hat[t] = cumulative;
    }
    return s;
}

static void check_step(std::size_t t, const NoiseSchedule& schedule) {
    if (t < 1 || t > schedule.steps)
        throw std::invalid_argument("diffusion: timestep out of range");
}

Tensor forward_step(const Tensor& x_prev, std::size_t t, const NoiseSchedule& schedule,
                    const Tensor& noise) {
    check_step(t, schedule);
    if (!x_prev.same_shape(noise))
        throw std::invalid_argument("forward_step: noise shape must match input");
    double a = std::sqrt(schedule.alpha[t - 1]);
    double b = std::sqrt(1.0 - schedule.alpha[t - 1]);
    Tensor out(x_prev.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = a * x_prev.data[i] + b * noise.data[i];
    return out;
}

Tensor diffuse(const Tensor& x0, std::size_t t, const NoiseSchedule& schedule, const Tensor& noise) {
    check_step(t, schedule);
    if (!x0.same_shape(noise))
        throw std::invalid_argument("diffuse: noise shape must match input");
    double a = std::sqrt(schedule.beta_hat[t - 1]);
    double b = std::sqrt(1.0 - schedule.beta_hat[t - 1]);
    Tensor out(x0.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = a * x0.data[i] + b * noise.data[i];
    return out;
}

Tensor gaussian_like(const Tensor& x, Rng& rng) {
    Tensor n(x.shape);
    for (double& v : n.data) v = rng.normal();
    return n;
}

}  // namespace wganplan
