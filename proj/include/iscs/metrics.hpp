#pragma once

// Reconstruction quality metrics and reslicing.
//
// The inter-slice consistency score of a volume is the mean absolute
// difference between consecutive slices,
//   sdiff(x) = 1/(S-1) * sum_i mean| x[i+1] - x[i] |,
// always taken along the native z axis. Reported against a reference as the
// absolute gap |sdiff(recon) - sdiff(gt)|: a reconstruction should neither
// be rougher nor smoother across slices than the reference, so smaller is
// better and over-smoothing cannot masquerade as quality.

#include <cmath>
#include <limits>

#include "iscs/core.hpp"
#include "iscs/volume.hpp"

namespace iscs {

inline double sdiff(const Volume& v) {
  if (v.slices() < 2) throw DimensionError("sdiff: need at least two slices");
  const Index d = v.height() * v.width();
  double acc = 0.0;
  for (Index i = 0; i + 1 < v.slices(); ++i)
    acc += (v.data().segment((i + 1) * d, d) - v.data().segment(i * d, d)).abs().mean();
  return acc / static_cast<double>(v.slices() - 1);
}

inline double sdiff_gap(const Volume& recon, const Volume& reference) {
  require_same_shape(recon, reference, "sdiff_gap");
  return std::abs(sdiff(recon) - sdiff(reference));
}

inline double mse(const Volume& a, const Volume& b) {
  require_same_shape(a, b, "mse");
  return (a.data() - b.data()).square().mean();
}

// Peak signal-to-noise ratio; identical volumes map to +infinity.
inline double psnr(const Volume& recon, const Volume& reference, double data_range = 1.0) {
  if (!(data_range > 0.0)) throw ParameterError("psnr: data_range must be positive");
  const double m = mse(recon, reference);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(data_range * data_range / m);
}

// Mean SSIM over all 7x7 uniform windows fully inside each slice, averaged
// over slices. Constants C1 = (K1*L)^2, C2 = (K2*L)^2 with K1 = 0.01,
// K2 = 0.03, L = data_range.
inline double ssim(const Volume& a, const Volume& b, double data_range = 1.0) {
  require_same_shape(a, b, "ssim");
  if (!(data_range > 0.0)) throw ParameterError("ssim: data_range must be positive");
  constexpr Index win = 7;
  if (a.height() < win || a.width() < win)
    throw DimensionError("ssim: slices smaller than the 7x7 window");

  const double c1 = (0.01 * data_range) * (0.01 * data_range);
  const double c2 = (0.03 * data_range) * (0.03 * data_range);
  constexpr double n = static_cast<double>(win * win);

  double total = 0.0;
  for (Index s = 0; s < a.slices(); ++s) {
    const auto xa = a.slice(s);
    const auto xb = b.slice(s);
    double slice_acc = 0.0;
    Index windows = 0;
    for (Index r = 0; r + win <= a.height(); ++r) {
      for (Index c = 0; c + win <= a.width(); ++c) {
        double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
        for (Index i = 0; i < win; ++i)
          for (Index j = 0; j < win; ++j) {
            const double va = xa(r + i, c + j);
            const double vb = xb(r + i, c + j);
            sa += va;
            sb += vb;
            saa += va * va;
            sbb += vb * vb;
            sab += va * vb;
          }
        const double mu_a = sa / n;
        const double mu_b = sb / n;
        const double var_a = saa / n - mu_a * mu_a;
        const double var_b = sbb / n - mu_b * mu_b;
        const double cov = sab / n - mu_a * mu_b;
        const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
        const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
        slice_acc += num / den;
        ++windows;
      }
    }
    total += slice_acc / static_cast<double>(windows);
  }
  return total / static_cast<double>(a.slices());
}

enum class Axis { Axial, Coronal, Sagittal };

inline const char* to_string(Axis a) {
  switch (a) {
    case Axis::Axial: return "axial";
    case Axis::Coronal: return "coronal";
    case Axis::Sagittal: return "sagittal";
  }
  return "?";
}

// View the volume along a different axis.
//   Axial    (S, H, W): the volume itself.
//   Coronal  (H, S, W): out(h, s, w) = in(s, h, w).
//   Sagittal (W, S, H): out(w, s, h) = in(s, h, w).
inline Volume reslice(const Volume& v, Axis axis) {
  if (axis == Axis::Axial) return v;
  if (axis == Axis::Coronal) {
    Volume out(v.height(), v.slices(), v.width());
    for (Index s = 0; s < v.slices(); ++s)
      for (Index h = 0; h < v.height(); ++h)
        for (Index w = 0; w < v.width(); ++w) out(h, s, w) = v(s, h, w);
    return out;
  }
  Volume out(v.width(), v.slices(), v.height());
  for (Index s = 0; s < v.slices(); ++s)
    for (Index h = 0; h < v.height(); ++h)
      for (Index w = 0; w < v.width(); ++w) out(w, s, h) = v(s, h, w);
  return out;
}

struct AxisMetrics {
  double psnr = 0.0;
  double ssim = 0.0;
};

struct MetricReport {
  AxisMetrics axial;
  AxisMetrics coronal;
  AxisMetrics sagittal;
  double sdiff_recon = 0.0;
  double sdiff_reference = 0.0;
  double sdiff_delta = 0.0;  // signed: recon - reference
  double sdiff_abs_delta = 0.0;
};

inline MetricReport compute_metric_report(const Volume& recon, const Volume& reference,
                                          double data_range = 1.0) {
  require_same_shape(recon, reference, "compute_metric_report");
  MetricReport rep;
  for (Axis axis : {Axis::Axial, Axis::Coronal, Axis::Sagittal}) {
    const Volume ra = reslice(recon, axis);
    const Volume rb = reslice(reference, axis);
    AxisMetrics m{psnr(ra, rb, data_range), ssim(ra, rb, data_range)};
    if (axis == Axis::Axial)
      rep.axial = m;
    else if (axis == Axis::Coronal)
      rep.coronal = m;
    else
      rep.sagittal = m;
  }
  rep.sdiff_recon = sdiff(recon);
  rep.sdiff_reference = sdiff(reference);
  rep.sdiff_delta = rep.sdiff_recon - rep.sdiff_reference;
  rep.sdiff_abs_delta = std::abs(rep.sdiff_delta);
  return rep;
}

}  // namespace iscs
