#include <doctest.h>

#include <cmath>

#include "iscs/priors.hpp"
#include "iscs/rng.hpp"

using namespace iscs;

namespace {

GaussianPrior flat_prior(Index h, Index w, double mu, double var) {
  GaussianPrior p;
  p.mu = ImageXd::Constant(h, w, mu);
  p.var = ImageXd::Constant(h, w, var);
  return p;
}

}  // namespace

TEST_CASE("gaussian posterior mean matches the scalar closed form") {
  const GaussianPrior prior = flat_prior(4, 4, 0.5, 0.04);
  const double ab = 0.7;
  ImageXd x_t = ImageXd::Constant(4, 4, 0.9);
  const ImageXd eps = gaussian_denoiser_predict(x_t, prior, ab);

  // independent scalar computation
  const double sab = std::sqrt(ab);
  const double x0_want = ((1.0 - ab) * 0.5 + sab * 0.04 * 0.9) / ((1.0 - ab) + ab * 0.04);
  const double eps_want = (0.9 - sab * x0_want) / std::sqrt(1.0 - ab);
  CHECK(eps(0, 0) == doctest::Approx(eps_want).epsilon(1e-14));
  CHECK((eps == eps(0, 0)).all());

  // inverting the eps prediction must recover the posterior mean
  const ImageXd x0 = (x_t - std::sqrt(1.0 - ab) * eps) / sab;
  CHECK(x0(2, 2) == doctest::Approx(x0_want).epsilon(1e-14));
}

TEST_CASE("uninformative prior reduces to the maximum-likelihood estimate") {
  const GaussianPrior prior = flat_prior(3, 3, 0.0, 1e12);
  const double ab = 0.5;
  ImageXd x_t(3, 3);
  x_t.setConstant(1.7);
  const ImageXd eps = gaussian_denoiser_predict(x_t, prior, ab);
  const ImageXd x0 = (x_t - std::sqrt(1.0 - ab) * eps) / std::sqrt(ab);
  // var -> infinity: x0 -> x_t / sqrt(ab)
  CHECK(x0(0, 0) == doctest::Approx(1.7 / std::sqrt(ab)).epsilon(1e-9));
}

TEST_CASE("dogmatic prior pins the estimate to its mean") {
  const GaussianPrior prior = flat_prior(3, 3, 0.25, 1e-12);
  const double ab = 0.5;
  ImageXd x_t(3, 3);
  x_t.setConstant(5.0);
  const ImageXd eps = gaussian_denoiser_predict(x_t, prior, ab);
  const ImageXd x0 = (x_t - std::sqrt(1.0 - ab) * eps) / std::sqrt(ab);
  CHECK(x0(1, 1) == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("gaussian denoiser validates shapes and parameters") {
  const GaussianPrior prior = flat_prior(4, 4, 0.0, 1.0);
  ImageXd wrong(4, 5);
  wrong.setZero();
  CHECK_THROWS_AS(gaussian_denoiser_predict(wrong, prior, 0.5), DimensionError);
  ImageXd ok = ImageXd::Zero(4, 4);
  CHECK_THROWS_AS(gaussian_denoiser_predict(ok, prior, 0.0), ParameterError);
  CHECK_THROWS_AS(gaussian_denoiser_predict(ok, prior, 1.0), ParameterError);

  GaussianPrior bad = prior;
  bad.var(1, 1) = 0.0;
  CHECK_THROWS_AS(gaussian_denoiser_predict(ok, bad, 0.5), ParameterError);
  GaussianPrior mism = prior;
  mism.var = ImageXd::Constant(4, 5, 1.0);
  CHECK_THROWS_AS(mism.validate(), DimensionError);
}

TEST_CASE("denoiser classes agree with the free function") {
  NormalStream rng(61, 0);
  GaussianPrior prior = flat_prior(8, 8, 0.3, 0.1);
  const GaussianDenoiser den(prior);
  ImageXd x_t(8, 8);
  for (Index i = 0; i < 64; ++i) x_t(i / 8, i % 8) = rng.next();
  const ImageXd a = den.predict_eps(x_t, 5, 0.42);
  const ImageXd b = gaussian_denoiser_predict(x_t, prior, 0.42);
  CHECK((a == b).all());

  const PassthroughDenoiser pass;
  CHECK((pass.predict_eps(x_t, 5, 0.42) == 0.0).all());
}

TEST_CASE("slicewise denoising applies the denoiser slice by slice") {
  NormalStream rng(62, 0);
  Volume x_t(3, 6, 6);
  rng.fill(x_t.data());
  GaussianPrior prior = flat_prior(6, 6, 0.2, 0.5);
  const GaussianDenoiser den(prior);
  const Volume eps = slicewise_denoise(den, x_t, 7, 0.6);
  for (Index s = 0; s < 3; ++s) {
    const ImageXd want = gaussian_denoiser_predict(x_t.slice(s), prior, 0.6);
    CHECK(((eps.slice(s) - want).abs() == 0.0).all());
  }
}

TEST_CASE("gaussian blur basics") {
  ImageXd flat = ImageXd::Constant(9, 9, 0.37);
  const ImageXd b = gaussian_blur(flat, 2.0);
  CHECK((b - 0.37).abs().maxCoeff() < 1e-12);  // normalized kernel, replicate edges

  ImageXd delta = ImageXd::Zero(11, 11);
  delta(5, 5) = 1.0;
  const ImageXd d = gaussian_blur(delta, 1.0);
  CHECK(d(5, 5) > d(5, 6));
  CHECK(d(5, 6) == doctest::Approx(d(6, 5)).epsilon(1e-12));  // symmetry
  CHECK(d(5, 6) == doctest::Approx(d(5, 4)).epsilon(1e-12));
  CHECK(std::abs(d.sum() - 1.0) < 1e-12);  // interior delta keeps its mass

  const ImageXd same = gaussian_blur(delta, 0.0);
  CHECK((same == delta).all());
  CHECK_THROWS_AS(gaussian_blur(delta, -1.0), ParameterError);
}

TEST_CASE("prior_from_volume averages along z and blurs") {
  Volume v(2, 8, 8, 0.0);
  v.slice(0).setConstant(0.2);
  v.slice(1).setConstant(0.4);
  const GaussianPrior p = prior_from_volume(v, 1.5, 0.04);
  CHECK((p.mu - 0.3).abs().maxCoeff() < 1e-12);
  CHECK((p.var == 0.04).all());
  CHECK_THROWS_AS(prior_from_volume(v, 1.5, 0.0), ParameterError);
}
