#pragma once

// Correlated re-noising strategies for slice stacks.
//
// A noise volume assigns one Gaussian field per slice. Three strategies:
//   Independent — every slice is an independent N(0, I) draw.
//   Identical   — one N(0, I) draw shared bit-exactly by all slices.
//   Slerp       — two anchor draws z1 (slice 0) and zS (slice S-1); slice i
//                 is the spherical interpolation at alpha_i = i/(S-1):
//                   sin((1-a)*Om)/sin(Om) * z1 + sin(a*Om)/sin(Om) * zS,
//                 Om = angle(z1, zS).
// In high dimension the slerp path stays on the Gaussian annulus (norms
// concentrate at sqrt(d), anchor angles at 90 degrees), so every interpolated
// slice remains statistically indistinguishable from a fresh draw while
// adjacent slices are strongly correlated.

#include <cmath>
#include <optional>
#include <string>

#include "iscs/core.hpp"
#include "iscs/rng.hpp"
#include "iscs/volume.hpp"

namespace iscs {

enum class NoiseStrategy { Independent, Identical, Slerp };

inline const char* to_string(NoiseStrategy s) {
  switch (s) {
    case NoiseStrategy::Independent: return "independent";
    case NoiseStrategy::Identical: return "identical";
    case NoiseStrategy::Slerp: return "slerp";
  }
  return "?";
}

// Angle between two vectors, radians in [0, pi]. Uses 2 atan2(|u - v|, |u + v|)
// on the normalized vectors rather than acos of the cosine: acos amplifies a
// 1-ulp rounding of cos near +-1 into ~1e-8 radians, which would make exactly
// parallel vectors look non-degenerate.
template <typename D1, typename D2>
double vector_angle(const Eigen::ArrayBase<D1>& a, const Eigen::ArrayBase<D2>& b) {
  if (a.size() != b.size()) throw DimensionError("vector_angle: size mismatch");
  const double na = std::sqrt(static_cast<double>((a * a).sum()));
  const double nb = std::sqrt(static_cast<double>((b * b).sum()));
  if (na == 0.0 || nb == 0.0) throw ParameterError("vector_angle: zero-norm vector");
  const ArrayXd u = a.template cast<double>() / na;
  const ArrayXd v = b.template cast<double>() / nb;
  const double dm = std::sqrt((u - v).square().sum());
  const double dp = std::sqrt((u + v).square().sum());
  return 2.0 * std::atan2(dm, dp);
}

constexpr double kDegenerateSinOmega = 1e-9;

// Spherical linear interpolation between two same-length vectors.
// alpha=0 and alpha=1 return the anchors exactly. Near-(anti)parallel anchors
// (|sin Omega| below the threshold) are rejected: the interpolation plane is
// then numerically undefined.
template <typename D1, typename D2>
ArrayXd slerp(const Eigen::ArrayBase<D1>& z1, const Eigen::ArrayBase<D2>& zS, double alpha,
              double degenerate_threshold = kDegenerateSinOmega) {
  if (z1.size() != zS.size()) throw DimensionError("slerp: anchor size mismatch");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw ParameterError("slerp: alpha must be in [0, 1], got " + std::to_string(alpha));

  const double omega = vector_angle(z1, zS);
  const double s = std::sin(omega);
  if (std::abs(s) < degenerate_threshold)
    throw DegenerateAnchorError("slerp: anchors are numerically (anti)parallel");

  if (alpha == 0.0) return z1.derived();
  if (alpha == 1.0) return zS.derived();
  const double w1 = std::sin((1.0 - alpha) * omega) / s;
  const double wS = std::sin(alpha * omega) / s;
  return w1 * z1.derived() + wS * zS.derived();
}

struct AnchorPair {
  ArrayXd z1;
  ArrayXd zS;

  double angle() const { return vector_angle(z1, zS); }
};

constexpr int kAnchorRetries = 8;

// Two i.i.d. N(0, I) anchors of dimension d. If the pair is slerp-degenerate
// the second anchor is redrawn, up to kAnchorRetries times. (With d in the
// thousands a single degenerate draw already has vanishing probability; the
// retry loop exists so the failure mode is defined, not because it is
// expected.)
inline AnchorPair draw_anchor_pair(NormalStream& rng, Index d,
                                   double degenerate_threshold = kDegenerateSinOmega) {
  if (d <= 0) throw DimensionError("draw_anchor_pair: dimension must be positive");
  AnchorPair p;
  p.z1 = rng.draw(d);
  for (int attempt = 0; attempt <= kAnchorRetries; ++attempt) {
    p.zS = rng.draw(d);
    if (std::abs(std::sin(vector_angle(p.z1, p.zS))) >= degenerate_threshold) return p;
  }
  throw DegenerateAnchorError("draw_anchor_pair: anchors degenerate after " +
                              std::to_string(kAnchorRetries) + " retries");
}

// Anchor pair with a prescribed angle theta between the anchors.
// z1 is a plain draw. The second anchor points along
//   cos(theta) * z1_hat + sin(theta) * u_hat,
// where u_hat is a fresh draw orthogonalized against z1, and its norm is that
// of a third independent draw, so both anchors keep chi-distributed lengths.
inline AnchorPair angle_constrained_anchors(NormalStream& rng, Index d, double theta_rad,
                                            double degenerate_threshold = kDegenerateSinOmega) {
  if (d < 2) throw DimensionError("angle_constrained_anchors: need dimension >= 2");
  if (!(theta_rad > 0.0 && theta_rad < std::numbers::pi))
    throw ParameterError("angle_constrained_anchors: angle must lie strictly in (0, pi)");

  AnchorPair p;
  p.z1 = rng.draw(d);
  const double n1 = std::sqrt((p.z1 * p.z1).sum());
  if (n1 == 0.0) throw DegenerateAnchorError("angle_constrained_anchors: zero-norm first anchor");
  const ArrayXd z1_hat = p.z1 / n1;

  ArrayXd u_hat;
  bool ok = false;
  for (int attempt = 0; attempt <= kAnchorRetries && !ok; ++attempt) {
    const ArrayXd w = rng.draw(d);
    const ArrayXd u = w - (w * z1_hat).sum() * z1_hat;
    const double nu = std::sqrt((u * u).sum());
    if (nu >= degenerate_threshold) {
      u_hat = u / nu;
      ok = true;
    }
  }
  if (!ok)
    throw DegenerateAnchorError("angle_constrained_anchors: could not build orthogonal direction");

  const ArrayXd v = rng.draw(d);
  const double norm_s = std::sqrt((v * v).sum());
  p.zS = norm_s * (std::cos(theta_rad) * z1_hat + std::sin(theta_rad) * u_hat);
  return p;
}

// Noise volume from a fixed anchor pair (Slerp strategy core).
inline Volume noise_volume_from_anchors(const AnchorPair& anchors, Dims dims) {
  if (dims.s < 2)
    throw DimensionError("noise_volume_from_anchors: slerp needs at least 2 slices");
  const Index d = dims.h * dims.w;
  if (anchors.z1.size() != d || anchors.zS.size() != d)
    throw DimensionError("noise_volume_from_anchors: anchor size does not match slice size");

  Volume out(dims);
  for (Index i = 0; i < dims.s; ++i) {
    const double alpha = static_cast<double>(i) / static_cast<double>(dims.s - 1);
    out.data().segment(i * d, d) = slerp(anchors.z1, anchors.zS, alpha);
  }
  return out;
}

struct NoiseOptions {
  // Slerp only: prescribe the anchor angle (radians) instead of drawing
  // anchors independently.
  std::optional<double> anchor_angle_rad;
};

inline Volume make_noise_volume(NoiseStrategy strategy, Dims dims, NormalStream& rng,
                                const NoiseOptions& opts = {}) {
  if (dims.s <= 0 || dims.h <= 0 || dims.w <= 0)
    throw DimensionError("make_noise_volume: dimensions must be positive");
  const Index d = dims.h * dims.w;

  switch (strategy) {
    case NoiseStrategy::Independent: {
      Volume out(dims);
      rng.fill(out.data());
      return out;
    }
    case NoiseStrategy::Identical: {
      Volume out(dims);
      const ArrayXd z = rng.draw(d);
      for (Index i = 0; i < dims.s; ++i) out.data().segment(i * d, d) = z;
      return out;
    }
    case NoiseStrategy::Slerp: {
      if (dims.s < 2) throw DimensionError("make_noise_volume: slerp needs at least 2 slices");
      const AnchorPair anchors = opts.anchor_angle_rad
                                     ? angle_constrained_anchors(rng, d, *opts.anchor_angle_rad)
                                     : draw_anchor_pair(rng, d);
      return noise_volume_from_anchors(anchors, dims);
    }
  }
  throw ParameterError("make_noise_volume: unknown strategy");
}

// ---- statistical validators -------------------------------------------------

struct AnnulusReport {
  Index dim = 0;
  int draws = 0;
  double mean_norm = 0.0;
  double expected_norm = 0.0;   // sqrt(d)
  double band_halfwidth = 0.0;
  double fraction_outside = 0.0;  // fraction with | ||z|| - sqrt(d) | >= band
};

// Norm concentration of N(0, I_d): ||z|| concentrates at sqrt(d) with O(1)
// fluctuations, so the fraction of draws outside a fixed band shrinks as d
// grows.
inline AnnulusReport annulus_check(Index d, int draws, double band_halfwidth, NormalStream& rng) {
  if (d <= 0) throw DimensionError("annulus_check: dimension must be positive");
  if (draws <= 0) throw ParameterError("annulus_check: need at least one draw");
  if (!(band_halfwidth > 0)) throw ParameterError("annulus_check: band halfwidth must be positive");

  AnnulusReport rep;
  rep.dim = d;
  rep.draws = draws;
  rep.expected_norm = std::sqrt(static_cast<double>(d));
  rep.band_halfwidth = band_halfwidth;
  int outside = 0;
  double norm_sum = 0.0;
  for (int i = 0; i < draws; ++i) {
    const ArrayXd z = rng.draw(d);
    const double n = std::sqrt((z * z).sum());
    norm_sum += n;
    if (std::abs(n - rep.expected_norm) >= band_halfwidth) ++outside;
  }
  rep.mean_norm = norm_sum / draws;
  rep.fraction_outside = static_cast<double>(outside) / draws;
  return rep;
}

struct AngleConcentrationReport {
  Index dim = 0;
  int pairs = 0;
  double mean_deg = 0.0;
  double std_deg = 0.0;
};

// Angles between independent Gaussian pairs concentrate at 90 degrees with
// standard deviation ~ (180/pi)/sqrt(d) degrees.
inline AngleConcentrationReport angle_concentration_check(Index d, int pairs, NormalStream& rng) {
  if (d <= 0) throw DimensionError("angle_concentration_check: dimension must be positive");
  if (pairs < 2) throw ParameterError("angle_concentration_check: need at least two pairs");

  AngleConcentrationReport rep;
  rep.dim = d;
  rep.pairs = pairs;
  ArrayXd deg(pairs);
  for (int i = 0; i < pairs; ++i) {
    const ArrayXd a = rng.draw(d);
    const ArrayXd b = rng.draw(d);
    deg(i) = vector_angle(a, b) * 180.0 / std::numbers::pi;
  }
  rep.mean_deg = deg.mean();
  rep.std_deg = std::sqrt((deg - rep.mean_deg).square().sum() / (pairs - 1));
  return rep;
}

// Mean Pearson correlation between adjacent slices of a noise volume;
// a quick fingerprint of the strategy (Independent ~ 0, Identical = 1,
// Slerp ~ cos(Omega/(S-1))).
inline double adjacent_slice_correlation(const Volume& v) {
  if (v.slices() < 2) throw DimensionError("adjacent_slice_correlation: need >= 2 slices");
  const Index d = v.height() * v.width();
  double acc = 0.0;
  for (Index i = 0; i + 1 < v.slices(); ++i) {
    const auto a = v.data().segment(i * d, d);
    const auto b = v.data().segment((i + 1) * d, d);
    const double ma = a.mean();
    const double mb = b.mean();
    const double cov = ((a - ma) * (b - mb)).sum();
    const double va = (a - ma).square().sum();
    const double vb = (b - mb).square().sum();
    if (va == 0.0 || vb == 0.0)
      throw NumericalError("adjacent_slice_correlation: constant slice");
    acc += cov / std::sqrt(va * vb);
  }
  return acc / static_cast<double>(v.slices() - 1);
}

}  // namespace iscs
