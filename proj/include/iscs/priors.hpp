#pragma once

// Slice-wise denoisers.
//
// The sampler only ever needs a noise prediction eps(x_t, t) per slice. The
// closed-form stand-in is a pixelwise Gaussian prior x0 ~ N(mu, var): under
// the forward model x_t = sqrt(ab) x0 + sqrt(1-ab) eps the posterior mean is
//   x0_hat = ((1-ab) * mu + sqrt(ab) * var * x_t) / ((1-ab) + ab * var),
// and the matching noise prediction is
//   eps_hat = (x_t - sqrt(ab) * x0_hat) / sqrt(1-ab).
// This keeps the whole pipeline exactly computable while leaving the
// null space of the measurement genuinely prior-driven.

#include <cmath>
#include <memory>

#include "iscs/core.hpp"
#include "iscs/volume.hpp"

namespace iscs {

struct GaussianPrior {
  ImageXd mu;
  ImageXd var;  // pixelwise variance, strictly positive

  void validate() const {
    if (mu.rows() != var.rows() || mu.cols() != var.cols())
      throw DimensionError("GaussianPrior: mu/var shape mismatch");
    if (mu.size() == 0) throw DimensionError("GaussianPrior: empty prior");
    if (!(var > 0.0).all()) throw ParameterError("GaussianPrior: variance must be positive");
  }
};

inline ImageXd gaussian_denoiser_predict(const Eigen::Ref<const ImageXd>& x_t,
                                         const GaussianPrior& prior, double alpha_bar) {
  prior.validate();
  if (x_t.rows() != prior.mu.rows() || x_t.cols() != prior.mu.cols())
    throw DimensionError("gaussian_denoiser_predict: slice/prior shape mismatch");
  if (!(alpha_bar > 0.0 && alpha_bar < 1.0))
    throw ParameterError("gaussian_denoiser_predict: alpha_bar must lie in (0, 1)");

  const double sab = std::sqrt(alpha_bar);
  const double rem = 1.0 - alpha_bar;
  const ImageXd x0_hat =
      (rem * prior.mu + sab * prior.var * x_t) / (rem + alpha_bar * prior.var);
  return (x_t - sab * x0_hat) / std::sqrt(rem);
}

class Denoiser {
 public:
  virtual ~Denoiser() = default;
  // Pure function of its arguments: same slice, timestep, and alpha_bar must
  // give the same prediction.
  virtual ImageXd predict_eps(const Eigen::Ref<const ImageXd>& slice, int t,
                              double alpha_bar) const = 0;
};

class GaussianDenoiser final : public Denoiser {
 public:
  explicit GaussianDenoiser(GaussianPrior prior) : prior_(std::move(prior)) {
    prior_.validate();
  }

  const GaussianPrior& prior() const { return prior_; }

  ImageXd predict_eps(const Eigen::Ref<const ImageXd>& slice, int /*t*/,
                      double alpha_bar) const override {
    return gaussian_denoiser_predict(slice, prior_, alpha_bar);
  }

 private:
  GaussianPrior prior_;
};

// Predicts zero noise everywhere; turns the sampler into a pure
// data-fidelity iteration. Useful as a pipeline probe.
class PassthroughDenoiser final : public Denoiser {
 public:
  ImageXd predict_eps(const Eigen::Ref<const ImageXd>& slice, int /*t*/,
                      double /*alpha_bar*/) const override {
    return ImageXd::Zero(slice.rows(), slice.cols());
  }
};

// Applies the denoiser to every slice of x_t at the same timestep.
inline Volume slicewise_denoise(const Denoiser& den, const Volume& x_t, int t,
                                double alpha_bar) {
  Volume out = x_t.same_shape();
  for (Index s = 0; s < x_t.slices(); ++s) {
    const ImageXd pred = den.predict_eps(x_t.slice(s), t, alpha_bar);
    if (pred.rows() != x_t.height() || pred.cols() != x_t.width())
      throw DimensionError("slicewise_denoise: denoiser changed the slice shape");
    out.slice(s) = pred;
  }
  return out;
}

// Separable Gaussian blur with replicated edges; kernel truncated at 3 sigma.
inline ImageXd gaussian_blur(const Eigen::Ref<const ImageXd>& img, double sigma) {
  if (!(sigma >= 0.0)) throw ParameterError("gaussian_blur: sigma must be >= 0");
  if (sigma == 0.0) return img;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  ArrayXd kernel(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i)
    kernel(i + radius) = std::exp(-0.5 * (i * i) / (sigma * sigma));
  kernel /= kernel.sum();

  const Index h = img.rows(), w = img.cols();
  ImageXd tmp(h, w), out(h, w);
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k)
        acc += kernel(k + radius) * img(r, std::clamp<Index>(c + k, 0, w - 1));
      tmp(r, c) = acc;
    }
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k)
        acc += kernel(k + radius) * tmp(std::clamp<Index>(r + k, 0, h - 1), c);
      out(r, c) = acc;
    }
  return out;
}

// Desk-scale prior builder: mu is a blurred z-average of a reference volume,
// var is constant. Gives the denoiser anatomy-aware structure with no
// training step.
inline GaussianPrior prior_from_volume(const Volume& reference, double blur_sigma,
                                       double var_value) {
  if (!(var_value > 0.0)) throw ParameterError("prior_from_volume: variance must be positive");
  ImageXd mean = ImageXd::Zero(reference.height(), reference.width());
  for (Index s = 0; s < reference.slices(); ++s) mean += reference.slice(s);
  mean /= static_cast<double>(reference.slices());

  GaussianPrior p;
  p.mu = gaussian_blur(mean, blur_sigma);
  p.var = ImageXd::Constant(reference.height(), reference.width(), var_value);
  return p;
}

}  // namespace iscs
