#include <doctest.h>

#include <cmath>

#include "iscs/noise.hpp"
#include "iscs/schedule.hpp"

using namespace iscs;

TEST_CASE("linear schedule basic structure") {
  const NoiseSchedule s = schedule_linear(30, 1e-4, 0.2);
  REQUIRE(s.timesteps() == 30);
  CHECK(s.beta(0) == 1e-4);
  CHECK(s.beta(29) == doctest::Approx(0.2).epsilon(1e-15));
  // strictly increasing beta, strictly decreasing alpha_bar in (0,1)
  for (int i = 1; i < 30; ++i) {
    CHECK(s.beta(i) > s.beta(i - 1));
    CHECK(s.alpha_bar(i) < s.alpha_bar(i - 1));
  }
  CHECK(s.alpha_bar(0) > 0.0);
  CHECK(s.alpha_bar(0) < 1.0);
  CHECK(s.alpha_bar(29) > 0.0);

  // independent recomputation of alpha_bar
  double prod = 1.0;
  for (int i = 0; i < 30; ++i) {
    prod *= 1.0 - s.beta(i);
    CHECK(s.alpha_bar(i) == doctest::Approx(prod).epsilon(1e-14));
  }
}

TEST_CASE("beta_tilde follows the posterior formula with the boundary convention") {
  const NoiseSchedule s = schedule_linear(30, 1e-4, 0.2);
  // t = 1: alpha_bar_0 == alpha_bar_1 makes the ratio exactly one
  CHECK(s.beta_tilde(0) == std::sqrt(s.beta(0)));
  CHECK(s.alpha_bar_prev(1) == s.alpha_bar(0));
  for (int t = 2; t <= 30; ++t) {
    const double want =
        std::sqrt((1.0 - s.alpha_bar(t - 2)) / (1.0 - s.alpha_bar(t - 1)) * s.beta(t - 1));
    CHECK(s.beta_tilde(t - 1) == doctest::Approx(want).epsilon(1e-14));
    CHECK(s.alpha_bar_prev(t) == s.alpha_bar(t - 2));
  }
}

TEST_CASE("schedule construction rejects invalid parameters") {
  CHECK_THROWS_AS(schedule_linear(0, 1e-4, 0.2), ScheduleError);
  CHECK_THROWS_AS(schedule_linear(10, 0.0, 0.2), ScheduleError);
  CHECK_THROWS_AS(schedule_linear(10, -1e-4, 0.2), ScheduleError);
  CHECK_THROWS_AS(schedule_linear(10, 1e-4, 1.0), ScheduleError);
  CHECK_THROWS_AS(schedule_linear(10, 0.3, 0.2), ScheduleError);
  CHECK_NOTHROW(schedule_linear(1, 1e-4, 0.2));
}

TEST_CASE("step coefficients satisfy b^2 + c^2 = 1 - alpha_bar_prev for all eta") {
  const NoiseSchedule s = schedule_linear(30, 1e-4, 0.2);
  for (double eta : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    for (int t = 1; t <= 30; ++t) {
      const StepCoefficients k = step_coefficients(s, t, eta);
      CHECK(k.a == doctest::Approx(std::sqrt(s.alpha_bar_prev(t))).epsilon(1e-15));
      CHECK(k.b >= 0.0);
      CHECK(k.c == eta * s.beta_tilde(t - 1));
      const double want = 1.0 - s.alpha_bar_prev(t);
      CHECK(k.b * k.b + k.c * k.c == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("boundary step stays valid at full stochasticity") {
  const NoiseSchedule s = schedule_linear(30, 1e-4, 0.2);
  const StepCoefficients k = step_coefficients(s, 1, 1.0);
  // 1 - alpha_bar_0 - beta_tilde_1^2 = beta_1 - beta_1 up to rounding
  CHECK(k.b >= 0.0);
  CHECK(k.b < 1e-8);
  CHECK(k.c == doctest::Approx(std::sqrt(1e-4)).epsilon(1e-12));
}

TEST_CASE("eta zero removes the stochastic term entirely") {
  const NoiseSchedule s = schedule_linear(12, 1e-3, 0.1);
  for (int t = 1; t <= 12; ++t) {
    const StepCoefficients k = step_coefficients(s, t, 0.0);
    CHECK(k.c == 0.0);
    CHECK(k.b == doctest::Approx(std::sqrt(1.0 - s.alpha_bar_prev(t))).epsilon(1e-15));
  }
}

TEST_CASE("step coefficient argument validation") {
  const NoiseSchedule s = schedule_linear(10, 1e-4, 0.2);
  CHECK_THROWS_AS(step_coefficients(s, 0, 0.5), ScheduleError);
  CHECK_THROWS_AS(step_coefficients(s, 11, 0.5), ScheduleError);
  CHECK_THROWS_AS(step_coefficients(s, 5, -0.1), ParameterError);
  CHECK_THROWS_AS(step_coefficients(s, 5, 1.5), ParameterError);
}

TEST_CASE("tweedie inverts the forward noising identity") {
  const NoiseSchedule s = schedule_linear(30, 1e-4, 0.2);
  NormalStream rng(41, 0);
  Volume x0(4, 8, 8);
  rng.fill(x0.data());
  Volume eps(4, 8, 8);
  rng.fill(eps.data());

  for (int t : {1, 10, 20, 30}) {
    const double ab = s.alpha_bar(t - 1);
    Volume x_t = x0.same_shape();
    x_t.data() = std::sqrt(ab) * x0.data() + std::sqrt(1.0 - ab) * eps.data();
    const Volume rec = tweedie_denoise(x_t, eps, ab);
    CHECK((rec.data() - x0.data()).abs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(tweedie_denoise(x0, eps, 0.0), ParameterError);
  CHECK_THROWS_AS(tweedie_denoise(x0, eps, 1.0), ParameterError);
  Volume wrong(4, 8, 9);
  CHECK_THROWS_AS(tweedie_denoise(x0, wrong, 0.5), DimensionError);
}

TEST_CASE("renoise step combines the three terms with the schedule coefficients") {
  const NoiseSchedule s = schedule_linear(20, 1e-4, 0.15);
  NormalStream rng(42, 0);
  Volume x0(3, 6, 6), eps(3, 6, 6), n(3, 6, 6);
  rng.fill(x0.data());
  rng.fill(eps.data());
  rng.fill(n.data());

  for (int t : {2, 10, 20}) {
    for (double eta : {0.0, 0.5, 1.0}) {
      const Volume out = renoise_step(x0, eps, n, s, t, eta);
      const StepCoefficients k = step_coefficients(s, t, eta);
      ArrayXd want = k.a * x0.data() + k.b * eps.data();
      if (k.c != 0.0) want += k.c * n.data();
      CHECK((out.data() - want).abs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("renoise step tolerates an empty noise volume only when eta is zero") {
  const NoiseSchedule s = schedule_linear(20, 1e-4, 0.15);
  NormalStream rng(43, 0);
  Volume x0(3, 6, 6), eps(3, 6, 6);
  rng.fill(x0.data());
  rng.fill(eps.data());
  Volume empty;
  CHECK_NOTHROW(renoise_step(x0, eps, empty, s, 10, 0.0));
  CHECK_THROWS_AS(renoise_step(x0, eps, empty, s, 10, 1.0), DimensionError);
}

TEST_CASE("renoise preserves the forward marginal when fed the true noise") {
  // x_t built from (x0, eps_true); one exact step with eps_pred = eps_true and
  // fresh noise must produce a field whose deviation from sqrt(ab_prev) x0 has
  // variance 1 - ab_prev.
  const NoiseSchedule s = schedule_linear(30, 1e-4, 0.2);
  NormalStream rng(44, 0);
  const Dims dims{16, 32, 32};
  Volume x0(dims, 0.0);  // zero signal isolates the noise variance
  Volume eps(dims);
  rng.fill(eps.data());
  Volume fresh(dims);
  rng.fill(fresh.data());

  const int t = 15;
  const double eta = 0.7;
  const Volume out = renoise_step(x0, eps, fresh, s, t, eta);
  const double var = out.data().square().mean();
  const double want = 1.0 - s.alpha_bar_prev(t);
  // eps and fresh are unit-variance fields of 16k samples; 5-sigma bound
  CHECK(var == doctest::Approx(want).epsilon(0.05));
}
