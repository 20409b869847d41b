#include <doctest.h>

#include <cmath>

#include "iscs/operators.hpp"
#include "iscs/phantom.hpp"
#include "iscs/rng.hpp"

using namespace iscs;

TEST_CASE("geometry factories") {
  const TomoGeometry sv = sparse_view_geometry(64, 64, 30);
  CHECK(sv.views() == 30);
  CHECK(sv.detector_bins == 91);  // ceil(64 * sqrt(2))
  CHECK(sv.angles_deg(0) == 0.0);
  CHECK(sv.angles_deg(1) == doctest::Approx(12.0).epsilon(1e-15));
  CHECK(sv.angles_deg(29) == doctest::Approx(348.0).epsilon(1e-15));

  const TomoGeometry la = limited_angle_geometry(64, 64, 100);
  CHECK(la.views() == 100);
  CHECK(la.angles_deg(0) == 0.0);
  CHECK(la.angles_deg(99) == doctest::Approx(100.0).epsilon(1e-15));
  CHECK(la.angles_deg(1) == doctest::Approx(100.0 / 99.0).epsilon(1e-15));

  CHECK(default_detector_bins(32, 32) == 46);
  CHECK_THROWS_AS(sparse_view_geometry(64, 64, 0), GeometryError);
  CHECK_THROWS_AS(limited_angle_geometry(64, 64, 1), GeometryError);
  CHECK_THROWS_AS(limited_angle_geometry(64, 64, 10, 0.0), GeometryError);
  TomoGeometry bad = sv;
  bad.detector_bins = 1;
  CHECK_THROWS_AS(bad.validate(), GeometryError);
}

TEST_CASE("projector preserves total mass at every angle") {
  const TomoGeometry g = sparse_view_geometry(64, 64, 36);

  // single unit pixel near the center
  Volume point(1, 64, 64, 0.0);
  point(0, 32, 32) = 1.0;
  const Volume sino = radon_apply(g, point);
  for (Index v = 0; v < g.views(); ++v) {
    double mass = 0.0;
    for (Index k = 0; k < g.detector_bins; ++k) mass += sino(0, v, k);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
  }

  // arbitrary image supported on the inscribed field-of-view circle: every
  // view's mass equals the pixel sum (outside that circle a pixel's footprint
  // can leave the detector at oblique angles, so mass preservation is only
  // guaranteed for in-FOV content)
  NormalStream rng(71, 0);
  Volume img(1, 64, 64);
  rng.fill(img.data());
  img.data() = img.data().abs();
  for (Index h = 0; h < 64; ++h)
    for (Index w = 0; w < 64; ++w) {
      const double dy = static_cast<double>(h) - 31.5;
      const double dx = static_cast<double>(w) - 31.5;
      if (dx * dx + dy * dy > 31.5 * 31.5) img(0, h, w) = 0.0;
    }
  const double total = img.data().sum();
  const Volume s2 = radon_apply(g, img);
  for (Index v = 0; v < g.views(); ++v) {
    double mass = 0.0;
    for (Index k = 0; k < g.detector_bins; ++k) mass += s2(0, v, k);
    CHECK(mass == doctest::Approx(total).epsilon(1e-9));
  }
}

TEST_CASE("projections of a radially symmetric image are angle-independent") {
  const TomoGeometry g = sparse_view_geometry(64, 64, 24);
  Volume disk(1, 64, 64);
  disk.slice(0) = gaussian_disk(64, 64, 12.0, 1.5);
  const Volume sino = radon_apply(g, disk);

  ArrayXd ref(g.detector_bins);
  for (Index k = 0; k < g.detector_bins; ++k) ref(k) = sino(0, 0, k);
  const double peak = ref.maxCoeff();
  REQUIRE(peak > 1.0);
  for (Index v = 1; v < g.views(); ++v) {
    double max_diff = 0.0;
    for (Index k = 0; k < g.detector_bins; ++k)
      max_diff = std::max(max_diff, std::abs(sino(0, v, k) - ref(k)));
    CHECK(max_diff / peak < 1e-6);
  }
}

TEST_CASE("opposite views mirror each other exactly") {
  const TomoGeometry g = sparse_view_geometry(64, 64, 2);  // 0 and 180 degrees
  NormalStream rng(72, 0);
  Volume img(1, 64, 64);
  rng.fill(img.data());
  const Volume sino = radon_apply(g, img);
  const Index D = g.detector_bins;
  for (Index k = 0; k < D; ++k)
    CHECK(sino(0, 0, k) == doctest::Approx(sino(0, 1, D - 1 - k)).epsilon(1e-10));
}

TEST_CASE("projector adjoint passes the dot test to rounding") {
  const TomoGeometry g = sparse_view_geometry(64, 64, 30);
  NormalStream rng(73, 0);
  Volume x(3, 64, 64);
  rng.fill(x.data());
  Volume y(3, 30, g.detector_bins);
  rng.fill(y.data());

  const Volume ax = radon_apply(g, x);
  const Volume aty = radon_adjoint(g, y);
  const double lhs = (ax.data() * y.data()).sum();
  const double rhs = (x.data() * aty.data()).sum();
  CHECK(std::abs(lhs - rhs) / std::abs(lhs) < 1e-12);
}

TEST_CASE("projector is linear") {
  const TomoGeometry g = sparse_view_geometry(32, 32, 12);
  NormalStream rng(74, 0);
  Volume a(2, 32, 32), b(2, 32, 32);
  rng.fill(a.data());
  rng.fill(b.data());
  Volume comb(2, 32, 32);
  comb.data() = 2.5 * a.data() - 0.75 * b.data();
  const Volume lhs = radon_apply(g, comb);
  const Volume ra = radon_apply(g, a);
  const Volume rb = radon_apply(g, b);
  CHECK(((lhs.data() - (2.5 * ra.data() - 0.75 * rb.data())).abs()).maxCoeff() < 1e-10);
}

TEST_CASE("projector shape validation") {
  const TomoGeometry g = sparse_view_geometry(32, 32, 12);
  Volume wrong(1, 32, 33);
  CHECK_THROWS_AS(radon_apply(g, wrong), DimensionError);
  Volume bad_sino(1, 13, g.detector_bins);
  CHECK_THROWS_AS(radon_adjoint(g, bad_sino), DimensionError);
}

TEST_CASE("sirt reconstructs a smooth slice from a dense scan") {
  const TomoGeometry g = sparse_view_geometry(32, 32, 60);
  Volume ph(1, 32, 32);
  ph.slice(0) = gaussian_disk(32, 32, 7.0, 1.5);
  const Volume sino = radon_apply(g, ph);
  const Volume rec = sirt_pinv(g, sino, 40);

  const Volume resid = radon_apply(g, rec);
  const double rel = std::sqrt((resid.data() - sino.data()).square().sum()) /
                     std::sqrt(sino.data().square().sum());
  CHECK(rel < 0.03);
  // residual shrinks with more iterations
  const Volume rec_few = sirt_pinv(g, sino, 5);
  const Volume resid_few = radon_apply(g, rec_few);
  const double rel_few = std::sqrt((resid_few.data() - sino.data()).square().sum()) /
                         std::sqrt(sino.data().square().sum());
  CHECK(rel < rel_few);
}

TEST_CASE("sirt of a zero sinogram is zero") {
  const TomoGeometry g = sparse_view_geometry(16, 16, 8);
  Volume zero(2, 8, g.detector_bins, 0.0);
  const Volume rec = sirt_pinv(g, zero, 3);
  CHECK((rec.data() == 0.0).all());
}

TEST_CASE("sirt validates arguments") {
  const TomoGeometry g = sparse_view_geometry(16, 16, 8);
  Volume sino(1, 8, g.detector_bins, 0.0);
  CHECK_THROWS_AS(sirt_pinv(g, sino, 0), ParameterError);
  Volume wrong(1, 9, g.detector_bins, 0.0);
  CHECK_THROWS_AS(sirt_pinv(g, wrong, 3), DimensionError);
}

TEST_CASE("downsample_z block means, hand-checked") {
  Volume v(4, 1, 2);
  // slices: [1 2], [3 4], [5 6], [7 8]
  for (Index i = 0; i < 8; ++i) v.data()(i) = static_cast<double>(i + 1);
  const Volume d = downsample_z(v, 2);
  REQUIRE(d.dims() == Dims{2, 1, 2});
  CHECK(d(0, 0, 0) == 2.0);  // (1+3)/2
  CHECK(d(0, 0, 1) == 3.0);  // (2+4)/2
  CHECK(d(1, 0, 0) == 6.0);
  CHECK(d(1, 0, 1) == 7.0);

  CHECK_THROWS_AS(downsample_z(v, 3), DimensionError);
  CHECK_THROWS_AS(downsample_z(v, 0), ParameterError);
  const Volume same = downsample_z(v, 1);
  CHECK((same.data() == v.data()).all());
}

TEST_CASE("replicate_z is an exact right inverse of downsample_z") {
  NormalStream rng(75, 0);
  Volume y(3, 8, 8);
  rng.fill(y.data());
  for (Index k : {2, 5}) {
    const Volume up = replicate_z(y, k);
    CHECK(up.slices() == 3 * k);
    const Volume round = downsample_z(up, k);
    CHECK((round.data() - y.data()).abs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("z-downsampling operator interface and adjoint") {
  const Dims dd{10, 6, 6};
  const ZDownsampleOperator A(dd, 5);
  CHECK(A.range_dims() == Dims{2, 6, 6});

  NormalStream rng(76, 0);
  Volume x(dd);
  rng.fill(x.data());
  Volume y(A.range_dims());
  rng.fill(y.data());
  const Volume ax = A.apply(x);
  const Volume aty = A.adjoint(y);
  const double lhs = (ax.data() * y.data()).sum();
  const double rhs = (x.data() * aty.data()).sum();
  CHECK(std::abs(lhs - rhs) / std::abs(lhs) < 1e-13);

  // pinv: A A+ = I exactly (up to the k-term mean rounding)
  const Volume back = A.apply(A.pinv(y));
  CHECK((back.data() - y.data()).abs().maxCoeff() < 1e-14);

  CHECK_THROWS_AS(ZDownsampleOperator(Dims{10, 6, 6}, 3), DimensionError);
}

TEST_CASE("radon operator matches the free functions") {
  const TomoGeometry g = sparse_view_geometry(32, 32, 10);
  const RadonOperator A(g, 2, 15);
  CHECK(A.domain_dims() == Dims{2, 32, 32});
  CHECK(A.range_dims() == Dims{2, 10, g.detector_bins});

  NormalStream rng(77, 0);
  Volume x(2, 32, 32);
  rng.fill(x.data());
  const Volume a = A.apply(x);
  const Volume b = radon_apply(g, x);
  // The cached tables hold the same weights and accumulate per bin in the
  // same pixel order, so the forward path agrees bit for bit.
  CHECK((a.data() == b.data()).all());

  // The cached backprojection sums each pixel's contributions directly
  // instead of through per-view partials, so it matches to rounding only.
  Volume y(2, 10, g.detector_bins);
  rng.fill(y.data());
  const Volume bp_op = A.adjoint(y);
  const Volume bp_free = radon_adjoint(g, y);
  CHECK((bp_op.data() - bp_free.data()).abs().maxCoeff() <
        1e-12 * bp_free.data().abs().maxCoeff());
  const Volume pv_op = A.pinv(y);
  const Volume pv_free = sirt_pinv(g, y, 15);
  CHECK((pv_op.data() - pv_free.data()).abs().maxCoeff() <
        1e-10 * pv_free.data().abs().maxCoeff());

  // Same sweeps twice: the cached kernels are deterministic.
  CHECK((A.adjoint(y).data() == bp_op.data()).all());
  CHECK((A.apply(x).data() == a.data()).all());

  Volume wrong(2, 32, 31);
  CHECK_THROWS_AS(A.apply(wrong), DimensionError);
}

TEST_CASE("identity operator") {
  const IdentityOperator A(Dims{2, 4, 4});
  Volume x(2, 4, 4, 1.5);
  CHECK((A.apply(x).data() == x.data()).all());
  CHECK((A.adjoint(x).data() == x.data()).all());
  CHECK((A.pinv(x).data() == x.data()).all());
  Volume wrong(2, 4, 5);
  CHECK_THROWS_AS(A.apply(wrong), DimensionError);
}

TEST_CASE("measurement noise is seeded, scaled, and tagged") {
  NormalStream rng(78, 0);
  Volume data(2, 4, 4, 1.0);
  Measurement m{data, 0.0};

  Measurement clean = m;
  NormalStream r0(78, 0);
  add_measurement_noise(clean, 0.0, r0);
  CHECK((clean.data.data() == 1.0).all());
  CHECK(clean.noise_sigma == 0.0);
  CHECK(r0.position() == 0);  // sigma 0 consumes nothing

  Measurement noisy = m;
  add_measurement_noise(noisy, 0.25, rng);
  CHECK(noisy.noise_sigma == 0.25);
  CHECK(rng.position() == 32);
  NormalStream replay(78, 0);
  for (Index i = 0; i < 32; ++i)
    CHECK(noisy.data.data()(i) == 1.0 + 0.25 * replay.next());

  CHECK_THROWS_AS(add_measurement_noise(noisy, -0.1, rng), ParameterError);
}
