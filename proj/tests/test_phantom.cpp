#include <doctest.h>

#include <cmath>

#include "iscs/metrics.hpp"
#include "iscs/phantom.hpp"

using namespace iscs;

TEST_CASE("varying phantom has the declared shape and value range") {
  const Volume v = generate_phantom(varying_ellipses_spec(48, 64, 64));
  CHECK(v.dims() == Dims{48, 64, 64});
  CHECK(v.data().minCoeff() >= 0.0);
  CHECK(v.data().maxCoeff() <= 1.0);
  CHECK(v.data().maxCoeff() > 0.3);  // features actually present
}

TEST_CASE("phantom generation is deterministic") {
  const Volume a = generate_phantom(varying_ellipses_spec(8, 32, 32));
  const Volume b = generate_phantom(varying_ellipses_spec(8, 32, 32));
  CHECK((a.data() == b.data()).all());
}

TEST_CASE("varying phantom drifts along z, extruded phantom does not") {
  const Volume vary = generate_phantom(varying_ellipses_spec(48, 64, 64));
  const double sd = sdiff(vary);
  CHECK(sd > 5e-4);
  CHECK(sd < 2e-2);
  // ends differ materially
  const Index d = 64 * 64;
  const double end_gap =
      (vary.data().segment(47 * d, d) - vary.data().segment(0, d)).abs().mean();
  CHECK(end_gap > 0.02);

  const Volume fixed = generate_phantom(extruded_ellipses_spec(8, 64, 64));
  CHECK(sdiff(fixed) == 0.0);  // identical slices, bit for bit
}

TEST_CASE("step lesion changes exactly the declared voxels") {
  const Volume base = generate_phantom(extruded_ellipses_spec(12, 32, 32));
  const Volume lesioned = generate_phantom(step_lesion_spec(12, 32, 32));
  Index changed = 0;
  for (Index s = 0; s < 12; ++s)
    for (Index h = 0; h < 32; ++h)
      for (Index w = 0; w < 32; ++w)
        if (lesioned(s, h, w) != base(s, h, w)) {
          ++changed;
          CHECK((s == 5 || s == 6));  // the two central slices
          CHECK(h == 16);
          CHECK((w >= 15 && w <= 17));
          CHECK(lesioned(s, h, w) == base(s, h, w) + 0.45);
        }
  CHECK(changed == 6);  // 3 voxels in each of 2 slices
  CHECK(lesioned.data().maxCoeff() <= 1.0);

  CHECK_THROWS_AS(step_lesion_spec(1, 32, 32), DimensionError);
}

TEST_CASE("phantom spec validation") {
  PhantomSpec spec = varying_ellipses_spec(4, 16, 16);
  spec.tracks[0].start.rx = 0.0;
  CHECK_THROWS_AS(generate_phantom(spec), ParameterError);
  PhantomSpec bad = varying_ellipses_spec(0, 16, 16);
  CHECK_THROWS_AS(generate_phantom(bad), DimensionError);

  // nominal outline crossing the image edge
  PhantomSpec oob = varying_ellipses_spec(4, 16, 16);
  oob.tracks[1].end.cx = 0.9;  // mover ends up 0.9 + 0.2-ish extent > 1
  CHECK_THROWS_AS(generate_phantom(oob), ParameterError);

  // lesion outside the volume
  PhantomSpec lb = step_lesion_spec(4, 16, 16);
  lb.lesions[0].col = 15;  // 3-wide bar starting at the last column
  CHECK_THROWS_AS(generate_phantom(lb), ParameterError);

  // stacked values are clamped into [0, 1]
  PhantomSpec hot = extruded_ellipses_spec(2, 16, 16);
  for (auto& tr : hot.tracks) tr.start.value = tr.end.value = 0.9;
  const Volume v = generate_phantom(hot);
  CHECK(v.data().maxCoeff() == 1.0);
}

TEST_CASE("ellipse track interpolation is linear in the slice fraction") {
  EllipseTrack tr{Ellipse{0.2, -0.4, 0.0, 0.1, 0.1, 0.0},
                  Ellipse{0.4, 0.4, 0.2, 0.3, 0.1, 90.0}};
  const Ellipse mid = tr.at(0.5);
  CHECK(mid.value == doctest::Approx(0.3));
  CHECK(mid.cx == doctest::Approx(0.0));
  CHECK(mid.cy == doctest::Approx(0.1));
  CHECK(mid.rx == doctest::Approx(0.2));
  CHECK(mid.rot_deg == doctest::Approx(45.0));
}

TEST_CASE("gaussian disk is radially symmetric on the grid") {
  const ImageXd d = gaussian_disk(64, 64, 12.0, 1.5);
  // grid center sits between pixels; symmetric pixel pairs must match
  CHECK(d(31, 40) == doctest::Approx(d(40, 31)).epsilon(1e-12));
  CHECK(d(31, 40) == doctest::Approx(d(32, 23)).epsilon(1e-12));  // mirrored
  CHECK(d(31, 31) > 0.99);   // deep interior
  CHECK(d(0, 0) < 1e-6);     // far corner
  CHECK_THROWS_AS(gaussian_disk(0, 64, 12.0, 1.5), DimensionError);
  CHECK_THROWS_AS(gaussian_disk(64, 64, -1.0, 1.5), ParameterError);
}

TEST_CASE("preset lookup") {
  CHECK_NOTHROW(phantom_preset("varying_ellipses", 4, 16, 16));
  CHECK_NOTHROW(phantom_preset("extruded_ellipses", 4, 16, 16));
  CHECK_NOTHROW(phantom_preset("step_lesion", 4, 16, 16));
  CHECK_THROWS_AS(phantom_preset("nope", 4, 16, 16), ParameterError);
}
