#include <doctest.h>

#include <cmath>

#include "wganplan/diffusion.hpp"
#include "wganplan/rng.hpp"

using namespace wganplan;

TEST_CASE("make_schedule: single step") {
    NoiseSchedule s = make_schedule(1, 0.1, 0.1);
    CHECK(s.alpha.size() == 1);
    CHECK(s.alpha[0] == doctest::Approx(0.9));
    CHECK(s.beta_hat[0] == doctest::Approx(0.9));
}

TEST_CASE("make_schedule: beta_hat strictly decreases") {
    NoiseSchedule s = make_schedule(50, 5e-4, 0.2);
    for (std::size_t t = 1; t < s.beta_hat.size(); ++t) CHECK(s.beta_hat[t] < s.beta_hat[t - 1]);
    CHECK(s.beta_hat.back() > 0.0);
}

TEST_CASE("make_schedule: defaults match a cumulative-product oracle") {
    NoiseSchedule s = make_schedule();
    CHECK(s.steps == 100);
    double prod = 1.0;
    for (std::size_t t = 0; t < 100; ++t) {
        double beta = 1e-4 + (0.1 - 1e-4) * static_cast<double>(t) / 99.0;
        prod *= 1.0 - beta;
        CHECK(s.alpha[t] == doctest::Approx(1.0 - beta).epsilon(1e-12));
        CHECK(s.beta_hat[t] == doctest::Approx(prod).epsilon(1e-12));
    }
    // near-pure noise at the end of the ramp
    CHECK(s.beta_hat.back() < 0.01);
}

TEST_CASE("make_schedule validates parameters") {
    CHECK_THROWS_AS(make_schedule(0, 0.1, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(make_schedule(10, 0.0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(make_schedule(10, 0.2, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(make_schedule(10, 0.1, 1.0), std::invalid_argument);
}

TEST_CASE("forward_step: identity when alpha is one and noise zero") {
    NoiseSchedule s;
    s.steps = 1;
    s.alpha = {1.0};
    s.beta_hat = {1.0};
    Tensor x({2, 2}, {0.1, 0.2, 0.3, 0.4});
    Tensor noise({2, 2});
    Tensor out = forward_step(x, 1, s, noise);
    CHECK(out.data == x.data);
}

TEST_CASE("forward_step: pure noise scaling at zero input") {
    NoiseSchedule s = make_schedule(10, 0.05, 0.05);
    Tensor x({3});
    Tensor noise({3}, {1.0, -2.0, 0.5});
    Tensor out = forward_step(x, 3, s, noise);
    double b = std::sqrt(1.0 - s.alpha[2]);
    CHECK(out.data[0] == doctest::Approx(b * 1.0));
    CHECK(out.data[1] == doctest::Approx(b * -2.0));
    CHECK(out.data[2] == doctest::Approx(b * 0.5));
}

TEST_CASE("forward_step matches the recursion oracle over a full trajectory") {
    NoiseSchedule s = make_schedule(40, 2e-4, 0.08);
    Rng rng(321);
    Tensor x0({4});
    for (double& v : x0.data) v = rng.normal();

    std::vector<Tensor> noises;
    for (std::size_t t = 0; t < 40; ++t) noises.push_back(gaussian_like(x0, rng));

    Tensor x = x0;
    for (std::size_t t = 1; t <= 40; ++t) x = forward_step(x, t, s, noises[t - 1]);

    // independent recursion
    std::vector<double> ref = x0.data;
    for (std::size_t t = 1; t <= 40; ++t)
        for (std::size_t i = 0; i < ref.size(); ++i)
            ref[i] = std::sqrt(s.alpha[t - 1]) * ref[i] +
                     std::sqrt(1.0 - s.alpha[t - 1]) * noises[t - 1].data[i];
    for (std::size_t i = 0; i < ref.size(); ++i)
        CHECK(x.data[i] == doctest::Approx(ref[i]).epsilon(1e-10));
}

TEST_CASE("diffuse: beta_hat one returns x0, zero input scales noise variance") {
    NoiseSchedule s;
    s.steps = 1;
    s.alpha = {1.0};
    s.beta_hat = {1.0};
    Tensor x({2}, {0.7, -0.3});
    Tensor none({2});
    CHECK(diffuse(x, 1, s, none).data == x.data);

    NoiseSchedule real = make_schedule();
    Rng rng(55);
    std::size_t t = 50;
    double want_var = 1.0 - real.beta_hat[t - 1];
    double acc = 0.0;
    const int n = 20000;
    Tensor zero({1});
    for (int i = 0; i < n; ++i) {
        Tensor noise({1}, {rng.normal()});
        double v = diffuse(zero, t, real, noise).data[0];
        acc += v * v;
    }
    CHECK(acc / n == doctest::Approx(want_var).epsilon(0.03));
}

TEST_CASE("diffuse shape and timestep validation") {
    NoiseSchedule s = make_schedule(10, 0.01, 0.1);
    Tensor x({2});
    Tensor noise({3});
    CHECK_THROWS_AS(diffuse(x, 1, s, noise), std::invalid_argument);
    CHECK_THROWS_AS(diffuse(x, 0, s, Tensor({2})), std::invalid_argument);
    CHECK_THROWS_AS(diffuse(x, 11, s, Tensor({2})), std::invalid_argument);
}

TEST_CASE("closed form matches the iterated recursion in distribution") {
    // variance identity beta_hat = prod(alpha) holds exactly
    NoiseSchedule s = make_schedule(64, 3e-4, 0.12);
    double prod = 1.0;
    for (std::size_t t = 0; t < 64; ++t) {
        prod *= s.alpha[t];
        CHECK(s.beta_hat[t] == doctest::Approx(prod).epsilon(1e-10));
    }

    // Monte-Carlo check at a mid-schedule timestep (unit-variance input)
    Rng rng(808);
    const std::size_t t = 32;
    const int n = 30000;
    double mean_closed = 0.0, var_closed = 0.0, mean_iter = 0.0, var_iter = 0.0;
    std::vector<double> closed(n), iter(n);
    for (int i = 0; i < n; ++i) {
        Tensor x0({1}, {rng.normal()});
        closed[i] = diffuse(x0, t, s, Tensor({1}, {rng.normal()})).data[0];
        Tensor x = x0;
        for (std::size_t step = 1; step <= t; ++step)
            x = forward_step(x, step, s, Tensor({1}, {rng.normal()}));
        iter[i] = x.data[0];
    }
    for (int i = 0; i < n; ++i) {
        mean_closed += closed[i];
        mean_iter += iter[i];
    }
    mean_closed /= n;
    mean_iter /= n;
    for (int i = 0; i < n; ++i) {
        var_closed += (closed[i] - mean_closed) * (closed[i] - mean_closed);
        var_iter += (iter[i] - mean_iter) * (iter[i] - mean_iter);
    }
    var_closed /= n - 1;
    var_iter /= n - 1;

    CHECK(std::abs(mean_closed - mean_iter) < 3.0 / std::sqrt(static_cast<double>(n)) * 2.0);
    CHECK(var_closed == doctest::Approx(var_iter).epsilon(0.05));
    // unit-variance input keeps unit variance through the chain
    CHECK(var_closed == doctest::Approx(1.0).epsilon(0.05));
}
