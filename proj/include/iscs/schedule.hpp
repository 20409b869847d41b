#pragma once

// Variance schedule and the denoise / re-noise primitives of the sampler.
//
// Discrete schedule over timesteps t = 1..T:
//   beta_t linear from beta_start to beta_end, alpha_t = 1 - beta_t,
//   alpha_bar_t = prod_{u<=t} alpha_u,
//   beta_tilde_t = sqrt( (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t) * beta_t ).
// Boundary convention: alpha_bar_0 := alpha_bar_1. This makes beta_tilde_1 =
// sqrt(beta_1) fall out of the general formula and keeps the re-noising
// coefficient 1 - alpha_bar_{t-1} - eta^2 beta_tilde_t^2 nonnegative at t = 1
// for every eta in [0, 1] (it is exactly 0 at eta = 1). With alpha_bar_0 = 1
// that coefficient would be negative for any eta > 0 and no stochastic
// schedule would be valid.
//
// One re-noising step maps an x0 estimate and a noise prediction to the next
// (earlier-t) iterate:
//   x_{t-1} = a * x0 + b * eps_pred + c * noise,
//   a = sqrt(alpha_bar_{t-1}),  c = eta * beta_tilde_t,
//   b = sqrt(1 - alpha_bar_{t-1} - c^2),
// so b^2 + c^2 = 1 - alpha_bar_{t-1} and the forward-process marginal is
// preserved when eps_pred is the true noise.

#include <cmath>
#include <string>

#include "iscs/core.hpp"
#include "iscs/volume.hpp"

namespace iscs {

struct NoiseSchedule {
  // All arrays are indexed by t-1 for t in 1..T.
  ArrayXd beta;
  ArrayXd alpha;
  ArrayXd alpha_bar;
  ArrayXd beta_tilde;

  int timesteps() const { return static_cast<int>(beta.size()); }

  void check_t(int t) const {
    if (t < 1 || t > timesteps())
      throw ScheduleError("timestep " + std::to_string(t) + " outside [1, " +
                          std::to_string(timesteps()) + "]");
  }

  // alpha_bar_{t-1} with the alpha_bar_0 := alpha_bar_1 boundary convention.
  double alpha_bar_prev(int t) const {
    check_t(t);
    return t >= 2 ? alpha_bar(t - 2) : alpha_bar(0);
  }
};

inline NoiseSchedule schedule_linear(int timesteps, double beta_start, double beta_end) {
  if (timesteps < 1) throw ScheduleError("schedule_linear: need at least one timestep");
  if (!(beta_start > 0.0) || !(beta_end < 1.0) || !(beta_start <= beta_end))
    throw ScheduleError("schedule_linear: need 0 < beta_start <= beta_end < 1");

  NoiseSchedule s;
  s.beta.resize(timesteps);
  if (timesteps == 1) {
    s.beta(0) = beta_start;
  } else {
    const double step = (beta_end - beta_start) / (timesteps - 1);
    for (int i = 0; i < timesteps; ++i) s.beta(i) = beta_start + step * i;
  }
  s.alpha = 1.0 - s.beta;
  s.alpha_bar.resize(timesteps);
  double prod = 1.0;
  for (int i = 0; i < timesteps; ++i) {
    prod *= s.alpha(i);
    s.alpha_bar(i) = prod;
    if (!(s.alpha_bar(i) > 0.0 && s.alpha_bar(i) < 1.0))
      throw ScheduleError("schedule_linear: alpha_bar left (0, 1) at t=" + std::to_string(i + 1));
  }
  s.beta_tilde.resize(timesteps);
  for (int t = 1; t <= timesteps; ++t) {
    const double prev = t >= 2 ? s.alpha_bar(t - 2) : s.alpha_bar(0);
    s.beta_tilde(t - 1) =
        std::sqrt((1.0 - prev) / (1.0 - s.alpha_bar(t - 1)) * s.beta(t - 1));
  }
  return s;
}

struct StepCoefficients {
  double a = 0.0;  // sqrt(alpha_bar_{t-1}), multiplies the x0 estimate
  double b = 0.0;  // multiplies the predicted noise
  double c = 0.0;  // eta * beta_tilde_t, multiplies the fresh noise
};

inline StepCoefficients step_coefficients(const NoiseSchedule& s, int t, double eta) {
  s.check_t(t);
  if (!(eta >= 0.0 && eta <= 1.0))
    throw ParameterError("step_coefficients: eta must be in [0, 1], got " + std::to_string(eta));

  StepCoefficients k;
  const double prev = s.alpha_bar_prev(t);
  k.a = std::sqrt(prev);
  k.c = eta * s.beta_tilde(t - 1);
  const double b2 = 1.0 - prev - k.c * k.c;
  if (b2 < -1e-12)
    throw ScheduleError("step_coefficients: negative noise-prediction variance at t=" +
                        std::to_string(t));
  k.b = std::sqrt(std::max(b2, 0.0));
  return k;
}

// Tweedie/posterior-mean style x0 estimate from the current iterate and a
// noise prediction: x0 = (x_t - sqrt(1 - alpha_bar_t) * eps) / sqrt(alpha_bar_t).
template <typename Scalar>
VolumeT<Scalar> tweedie_denoise(const VolumeT<Scalar>& x_t, const VolumeT<Scalar>& eps,
                                double alpha_bar_t) {
  require_same_shape(x_t, eps, "tweedie_denoise");
  if (!(alpha_bar_t > 0.0 && alpha_bar_t < 1.0))
    throw ParameterError("tweedie_denoise: alpha_bar must lie in (0, 1)");
  VolumeT<Scalar> out = x_t.same_shape();
  const Scalar sa = static_cast<Scalar>(std::sqrt(alpha_bar_t));
  const Scalar sb = static_cast<Scalar>(std::sqrt(1.0 - alpha_bar_t));
  out.data() = (x_t.data() - sb * eps.data()) / sa;
  return out;
}

// One re-noising step. `noise` may be an empty volume when the stochastic
// coefficient is zero (eta = 0), in which case no noise term is added.
template <typename Scalar>
VolumeT<Scalar> renoise_step(const VolumeT<Scalar>& x0_pred, const VolumeT<Scalar>& eps_pred,
                             const VolumeT<Scalar>& noise, const NoiseSchedule& s, int t,
                             double eta) {
  require_same_shape(x0_pred, eps_pred, "renoise_step");
  const StepCoefficients k = step_coefficients(s, t, eta);
  VolumeT<Scalar> out = x0_pred.same_shape();
  out.data() = static_cast<Scalar>(k.a) * x0_pred.data() +
               static_cast<Scalar>(k.b) * eps_pred.data();
  if (k.c != 0.0) {
    require_same_shape(x0_pred, noise, "renoise_step(noise)");
    out.data() += static_cast<Scalar>(k.c) * noise.data();
  }
  return out;
}

}  // namespace iscs
