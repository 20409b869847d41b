#pragma once

// Reconstruction algorithms: the diffusion-style sampler with data fidelity,
// and the classical baselines (FBP, SIRT via operators.hpp, ADMM-TV).
//
// Sampler outline, t = T .. 1:
//   eps_pred = denoiser(x_t)                    (slice-wise)
//   x0       = tweedie(x_t, eps_pred)
//   x0       = fidelity(x0, y)                  (DDS or DDNM step)
//   x0       = tv_prox(x0)                      (optional)
//   x_{t-1}  = a x0 + b eps_pred + c noise      (strategy-correlated noise)
// The final iteration returns the fidelity-updated x0 directly — re-noising
// past the last step would only re-inject schedule noise into the output.
//
// DDS fidelity solves (gamma A^T A + I) x = gamma A^T y + x0 with a few CG
// iterations started at x0. DDNM replaces the range-space content of x0:
// x0 - pinv(A x0) + pinv(y), evaluated in that two-term form so an exact
// pseudo-inverse reproduces y's range content exactly (A = I returns y
// bit-for-bit).

#include <cmath>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "iscs/core.hpp"
#include "iscs/metrics.hpp"
#include "iscs/noise.hpp"
#include "iscs/operators.hpp"
#include "iscs/priors.hpp"
#include "iscs/schedule.hpp"
#include "iscs/volume.hpp"

namespace iscs {

struct CgResult {
  ArrayXd x;
  int iterations = 0;
  // ||r||_2 before the first iteration and after each one.
  std::vector<double> residual_norms;
};

// Conjugate gradients on a symmetric positive definite system given as a
// matrix-vector callable. Runs exactly `iters` iterations unless the residual
// reaches rel_tol * ||b|| earlier.
template <typename MatVec>
CgResult cg_solve(const MatVec& matvec, const ArrayXd& b, const ArrayXd& x0, int iters,
                  double rel_tol = 0.0) {
  if (iters < 0) throw ParameterError("cg_solve: negative iteration count");
  if (b.size() != x0.size()) throw DimensionError("cg_solve: b/x0 size mismatch");

  CgResult res;
  res.x = x0;
  ArrayXd r = b - matvec(res.x);
  ArrayXd p = r;
  double rr = (r * r).sum();
  const double stop = rel_tol * std::sqrt((b * b).sum());
  res.residual_norms.push_back(std::sqrt(rr));

  for (int it = 0; it < iters; ++it) {
    if (std::sqrt(rr) <= stop) break;
    const ArrayXd ap = matvec(p);
    const double pap = (p * ap).sum();
    if (!(pap > 0.0)) {
      if (rr == 0.0) break;  // exact solve; nothing left to do
      throw NumericalError("cg_solve: non-positive curvature, operator is not SPD");
    }
    const double alpha = rr / pap;
    res.x += alpha * p;
    r -= alpha * ap;
    const double rr_new = (r * r).sum();
    if (!std::isfinite(rr_new)) throw NumericalError("cg_solve: diverged");
    p = r + (rr_new / rr) * p;
    rr = rr_new;
    res.residual_norms.push_back(std::sqrt(rr));
    ++res.iterations;
  }
  return res;
}

struct DdsFidelity {
  double gamma = 1.0;
  int cg_iters = 10;
};

struct DdnmFidelity {};

using FidelityConfig = std::variant<DdsFidelity, DdnmFidelity>;

inline Volume dds_update(const Volume& x0_pred, const Volume& y, const LinearOperator& A,
                         double gamma, int cg_iters) {
  if (!(gamma > 0.0)) throw ParameterError("dds_update: gamma must be positive");
  if (cg_iters < 1) throw ParameterError("dds_update: need at least one CG iteration");
  A.check_domain(x0_pred, "dds_update");
  A.check_range(y, "dds_update");

  const Dims dd = A.domain_dims();
  const auto matvec = [&](const ArrayXd& v) -> ArrayXd {
    Volume vx(dd);
    vx.data() = v;
    Volume ata = A.adjoint(A.apply(vx));
    return gamma * ata.data() + v;
  };
  Volume aty = A.adjoint(y);
  const ArrayXd b = gamma * aty.data() + x0_pred.data();
  const CgResult cg = cg_solve(matvec, b, x0_pred.data(), cg_iters);
  Volume out(dd);
  out.data() = cg.x;
  return out;
}

inline Volume ddnm_update(const Volume& x0_pred, const Volume& y, const LinearOperator& A) {
  A.check_domain(x0_pred, "ddnm_update");
  A.check_range(y, "ddnm_update");
  Volume range_part = A.pinv(A.apply(x0_pred));
  Volume data_part = A.pinv(y);
  Volume out = x0_pred;
  out.data() -= range_part.data();
  out.data() += data_part.data();
  return out;
}

// ---- total variation ---------------------------------------------------------

// Isotropic TV with forward differences and Neumann boundaries:
// sum over voxels of sqrt(dz^2 + dy^2 + dx^2).
inline double tv3d_value(const Volume& v) {
  const Index S = v.slices(), H = v.height(), W = v.width();
  double acc = 0.0;
  for (Index s = 0; s < S; ++s)
    for (Index h = 0; h < H; ++h)
      for (Index w = 0; w < W; ++w) {
        const double c = v(s, h, w);
        const double dz = s + 1 < S ? v(s + 1, h, w) - c : 0.0;
        const double dy = h + 1 < H ? v(s, h + 1, w) - c : 0.0;
        const double dx = w + 1 < W ? v(s, h, w + 1) - c : 0.0;
        acc += std::sqrt(dz * dz + dy * dy + dx * dx);
      }
  return acc;
}

namespace detail {

// Negative adjoint of the forward-difference gradient.
inline void tv_divergence(const Volume& pz, const Volume& py, const Volume& px, Volume& out) {
  const Index S = out.slices(), H = out.height(), W = out.width();
  for (Index s = 0; s < S; ++s)
    for (Index h = 0; h < H; ++h)
      for (Index w = 0; w < W; ++w) {
        double d = 0.0;
        if (s + 1 < S) d += pz(s, h, w);
        if (s > 0) d -= pz(s - 1, h, w);
        if (h + 1 < H) d += py(s, h, w);
        if (h > 0) d -= py(s, h - 1, w);
        if (w + 1 < W) d += px(s, h, w);
        if (w > 0) d -= px(s, h, w - 1);
        out(s, h, w) = d;
      }
}

}  // namespace detail

// Proximal map of lambda * TV: solves min_x 1/2 ||x - v||^2 + lambda TV(x)
// with Chambolle's dual fixed-point iteration. Step 1/12 is the 3-D bound
// (||div||^2 <= 12). The dual field p is projected to unit euclidean balls.
inline Volume tv3d_prox(const Volume& v, double lambda, int iters) {
  if (!(lambda >= 0.0)) throw ParameterError("tv3d_prox: lambda must be >= 0");
  if (iters < 1) throw ParameterError("tv3d_prox: need at least one iteration");
  if (lambda == 0.0) return v;

  const Index S = v.slices(), H = v.height(), W = v.width();
  Volume pz(S, H, W, 0.0), py(S, H, W, 0.0), px(S, H, W, 0.0);
  Volume div(S, H, W, 0.0), work(S, H, W, 0.0);
  constexpr double tau = 1.0 / 12.0;

  for (int it = 0; it < iters; ++it) {
    detail::tv_divergence(pz, py, px, div);
    work.data() = div.data() - v.data() / lambda;
    for (Index s = 0; s < S; ++s)
      for (Index h = 0; h < H; ++h)
        for (Index w = 0; w < W; ++w) {
          const double c = work(s, h, w);
          const double gz = s + 1 < S ? work(s + 1, h, w) - c : 0.0;
          const double gy = h + 1 < H ? work(s, h + 1, w) - c : 0.0;
          const double gx = w + 1 < W ? work(s, h, w + 1) - c : 0.0;
          const double mag = std::sqrt(gz * gz + gy * gy + gx * gx);
          const double denom = 1.0 + tau * mag;
          pz(s, h, w) = (pz(s, h, w) + tau * gz) / denom;
          py(s, h, w) = (py(s, h, w) + tau * gy) / denom;
          px(s, h, w) = (px(s, h, w) + tau * gx) / denom;
        }
  }
  detail::tv_divergence(pz, py, px, div);
  Volume out = v;
  out.data() -= lambda * div.data();
  return out;
}

// ---- classical baselines -----------------------------------------------------

// Filtered backprojection with a spatial-domain ramp filter at unit detector
// pitch: h[0] = 1/4, h[n] = -1/(pi^2 n^2) for odd n, 0 for even n != 0.
// Each filtered view is backprojected with angular cell weight span/V; when
// the views cover (nearly) the full circle — span >= 1.5 pi — every line is
// measured twice, so the weight is halved.
inline Volume fbp(const TomoGeometry& g, const Volume& sino) {
  g.validate();
  if (sino.height() != g.views() || sino.width() != g.detector_bins)
    throw DimensionError("fbp: sinogram shape does not match geometry");

  const Index D = g.detector_bins;
  ArrayXd kernel(2 * D - 1);
  for (Index i = 0; i < 2 * D - 1; ++i) {
    const Index n = i - (D - 1);
    if (n == 0)
      kernel(i) = 0.25;
    else if (n % 2 != 0)
      kernel(i) = -1.0 / (std::numbers::pi * std::numbers::pi * static_cast<double>(n * n));
    else
      kernel(i) = 0.0;
  }

  Volume filtered(sino.slices(), g.views(), D, 0.0);
  for (Index s = 0; s < sino.slices(); ++s)
    for (Index v = 0; v < g.views(); ++v)
      for (Index k = 0; k < D; ++k) {
        double acc = 0.0;
        for (Index m = 0; m < D; ++m) acc += kernel(k - m + (D - 1)) * sino(s, v, m);
        filtered(s, v, k) = acc;
      }

  // Angular extent: grid spread plus one mean spacing (exact 2 pi for a
  // half-open uniform circle grid).
  double span_rad;
  if (g.views() == 1) {
    span_rad = std::numbers::pi;
  } else {
    const double spread = g.angles_deg.maxCoeff() - g.angles_deg.minCoeff();
    span_rad = (spread + spread / static_cast<double>(g.views() - 1)) * std::numbers::pi / 180.0;
  }
  double weight = span_rad / static_cast<double>(g.views());
  if (span_rad >= 1.5 * std::numbers::pi) weight *= 0.5;

  Volume out = radon_adjoint(g, filtered);
  out.data() *= weight;
  return out;
}

struct AdmmResult {
  Volume x;
  // Augmented Lagrangian value after each outer iteration.
  std::vector<double> aug_lagrangian;
};

// ADMM on 1/2||Ax - y||^2 + lambda TV(z) subject to x = z.
//   x-step: CG on (A^T A + rho I) x = A^T y + rho (z - u)
//   z-step: TV prox of x + u at strength lambda / rho
//   u-step: u += x - z
inline AdmmResult admm_tv(const LinearOperator& A, const Volume& y, double lambda, double rho,
                          int outer_iters, int cg_iters = 10, int tv_iters = 25) {
  if (!(lambda >= 0.0)) throw ParameterError("admm_tv: lambda must be >= 0");
  if (!(rho > 0.0)) throw ParameterError("admm_tv: rho must be positive");
  if (outer_iters < 1) throw ParameterError("admm_tv: need at least one outer iteration");
  A.check_range(y, "admm_tv");

  const Dims dd = A.domain_dims();
  Volume x(dd, 0.0), z(dd, 0.0), u(dd, 0.0);
  const Volume aty = A.adjoint(y);

  const auto matvec = [&](const ArrayXd& v) -> ArrayXd {
    Volume vx(dd);
    vx.data() = v;
    Volume ata = A.adjoint(A.apply(vx));
    return ata.data() + rho * v;
  };

  AdmmResult res{Volume(dd, 0.0), {}};
  for (int it = 0; it < outer_iters; ++it) {
    const ArrayXd b = aty.data() + rho * (z.data() - u.data());
    x.data() = cg_solve(matvec, b, x.data(), cg_iters).x;

    Volume xu = x;
    xu.data() += u.data();
    z = tv3d_prox(xu, lambda / rho, tv_iters);

    u.data() += x.data() - z.data();

    Volume ax = A.apply(x);
    const double data_term = 0.5 * (ax.data() - y.data()).square().sum();
    const double split = 0.5 * rho * (x.data() - z.data() + u.data()).square().sum() -
                         0.5 * rho * u.data().square().sum();
    res.aug_lagrangian.push_back(data_term + lambda * tv3d_value(z) + split);
  }
  if (!x.data().isFinite().all()) throw NumericalError("admm_tv: non-finite iterate");
  res.x = x;
  return res;
}

// ---- sampler -----------------------------------------------------------------

struct ReconstructOptions {
  double eta = 1.0;
  NoiseStrategy strategy = NoiseStrategy::Slerp;
  // Slerp: prescribe the anchor angle instead of free anchor draws.
  std::optional<double> anchor_angle_deg;
  // Draw one anchor pair per reconstruction instead of per re-noising step.
  bool freeze_anchors = false;
  // Initialize x_T from the configured strategy instead of an independent draw.
  bool strategy_init = false;
  double tv_lambda = 0.0;  // 0 disables the TV stage
  int tv_prox_iters = 25;
};

struct TrajectoryPoint {
  int t = 0;
  double psnr_vs_gt = std::numeric_limits<double>::quiet_NaN();
  double sdiff_value = 0.0;
  double residual = 0.0;  // ||A x0 - y|| / ||y||
};

struct Reconstruction {
  Volume x;
  std::vector<TrajectoryPoint> trajectory;
};

inline Reconstruction reconstruct(const LinearOperator& A, const Measurement& y,
                                  const Denoiser& denoiser, const NoiseSchedule& sched,
                                  const FidelityConfig& fidelity, const ReconstructOptions& opts,
                                  NormalStream& rng, const Volume* ground_truth = nullptr) {
  if (!(opts.eta >= 0.0 && opts.eta <= 1.0))
    throw ParameterError("reconstruct: eta must be in [0, 1]");
  A.check_range(y.data, "reconstruct(y)");
  const Dims dd = A.domain_dims();
  if (ground_truth && ground_truth->dims() != dd)
    throw DimensionError("reconstruct: ground truth shape mismatch");

  NoiseOptions nopts;
  if (opts.anchor_angle_deg)
    nopts.anchor_angle_rad = *opts.anchor_angle_deg * std::numbers::pi / 180.0;

  std::optional<AnchorPair> frozen;
  if (opts.strategy == NoiseStrategy::Slerp && opts.freeze_anchors) {
    frozen = nopts.anchor_angle_rad
                 ? angle_constrained_anchors(rng, dd.h * dd.w, *nopts.anchor_angle_rad)
                 : draw_anchor_pair(rng, dd.h * dd.w);
  }
  const auto strategy_noise = [&]() -> Volume {
    if (frozen) return noise_volume_from_anchors(*frozen, dd);
    return make_noise_volume(opts.strategy, dd, rng, nopts);
  };

  Volume x = opts.strategy_init ? strategy_noise()
                                : make_noise_volume(NoiseStrategy::Independent, dd, rng);

  const double y_norm = std::sqrt(y.data.data().square().sum());
  Reconstruction rec;
  const int T = sched.timesteps();
  rec.trajectory.reserve(T);

  for (int t = T; t >= 1; --t) {
    const double ab = sched.alpha_bar(t - 1);
    const Volume eps_pred = slicewise_denoise(denoiser, x, t, ab);
    Volume x0 = tweedie_denoise(x, eps_pred, ab);

    if (std::holds_alternative<DdsFidelity>(fidelity)) {
      const auto& f = std::get<DdsFidelity>(fidelity);
      x0 = dds_update(x0, y.data, A, f.gamma, f.cg_iters);
    } else {
      x0 = ddnm_update(x0, y.data, A);
    }

    if (opts.tv_lambda > 0.0) x0 = tv3d_prox(x0, opts.tv_lambda, opts.tv_prox_iters);

    TrajectoryPoint pt;
    pt.t = t - 1;
    if (ground_truth) pt.psnr_vs_gt = psnr(x0, *ground_truth);
    pt.sdiff_value = dd.s >= 2 ? sdiff(x0) : 0.0;
    const Volume ax0 = A.apply(x0);
    const double rnorm = std::sqrt((ax0.data() - y.data.data()).square().sum());
    pt.residual = y_norm > 0.0 ? rnorm / y_norm : rnorm;
    rec.trajectory.push_back(pt);

    if (t == 1) {
      x = std::move(x0);
      break;
    }

    const StepCoefficients k = step_coefficients(sched, t, opts.eta);
    // eta = 0 draws nothing at all, so the sampler consumes the identical RNG
    // sequence regardless of strategy.
    Volume noise;
    if (k.c != 0.0) noise = strategy_noise();
    x = renoise_step(x0, eps_pred, noise, sched, t, opts.eta);
  }

  if (!x.data().isFinite().all()) throw NumericalError("reconstruct: non-finite result");
  rec.x = std::move(x);
  return rec;
}

}  // namespace iscs
