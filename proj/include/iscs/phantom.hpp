#pragma once

// Synthetic test volumes.
//
// A phantom is a stack of soft-edged ellipse compositions whose parameters
// drift linearly along z, so adjacent slices differ by a small, controlled
// amount — the anatomy analog the inter-slice metrics are designed around.
// All values stay in [0, 1]; generation is a pure function of the spec.

#include <cmath>
#include <string>
#include <vector>

#include "iscs/core.hpp"
#include "iscs/volume.hpp"

namespace iscs {

// Ellipse in normalized coordinates: the image spans [-1, 1] in both axes;
// cx, cy, rx, ry are fractions of the half-extent. Painted additively with a
// ~1 px smooth edge so projections and gradients stay well behaved.
struct Ellipse {
  double value = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  double rx = 0.0;
  double ry = 0.0;
  double rot_deg = 0.0;
};

// Linear interpolation between two ellipse states across the slice range.
struct EllipseTrack {
  Ellipse start;
  Ellipse end;

  Ellipse at(double f) const {
    auto lerp = [f](double a, double b) { return a + f * (b - a); };
    Ellipse e;
    e.value = lerp(start.value, end.value);
    e.cx = lerp(start.cx, end.cx);
    e.cy = lerp(start.cy, end.cy);
    e.rx = lerp(start.rx, end.rx);
    e.ry = lerp(start.ry, end.ry);
    e.rot_deg = lerp(start.rot_deg, end.rot_deg);
    return e;
  }
};

// Hard-edged box of voxels stamped into a contiguous run of slices. Unlike
// the soft ellipses this changes an exactly countable set of voxels, which is
// what lesion-persistence checks need.
struct Lesion {
  double value = 0.0;
  Index row = 0, col = 0;    // top-left voxel in every affected slice
  Index rows = 1, cols = 1;  // footprint extent
  Index slice_begin = 0;
  Index slice_count = 1;
};

// The nominal (q <= 1) outline must stay inside the [-1, 1]^2 image square;
// the soft edge beyond it decays within a couple of pixels.
inline void check_ellipse_in_bounds(const Ellipse& e) {
  if (!(e.rx > 0.0 && e.ry > 0.0))
    throw ParameterError("PhantomSpec: ellipse radii must be positive");
  const double phi = e.rot_deg * std::numbers::pi / 180.0;
  const double cp = std::cos(phi), sp = std::sin(phi);
  const double ext_x = std::hypot(e.rx * cp, e.ry * sp);
  const double ext_y = std::hypot(e.rx * sp, e.ry * cp);
  if (std::abs(e.cx) + ext_x > 1.0 || std::abs(e.cy) + ext_y > 1.0)
    throw ParameterError("PhantomSpec: ellipse exceeds image bounds");
}

struct PhantomSpec {
  Index slices = 0;
  Index height = 0;
  Index width = 0;
  double background = 0.0;
  double edge_px = 0.8;  // soft-edge width in pixels
  std::vector<EllipseTrack> tracks;
  std::vector<Lesion> lesions;

  void validate() const {
    if (slices <= 0 || height <= 0 || width <= 0)
      throw DimensionError("PhantomSpec: dimensions must be positive");
    if (!(edge_px > 0.0)) throw ParameterError("PhantomSpec: edge width must be positive");
    for (const auto& tr : tracks)
      for (const Ellipse* e : {&tr.start, &tr.end}) check_ellipse_in_bounds(*e);
    for (const auto& l : lesions) {
      if (l.rows < 1 || l.cols < 1 || l.slice_count < 1)
        throw ParameterError("PhantomSpec: lesion extents must be positive");
      if (l.row < 0 || l.col < 0 || l.row + l.rows > height || l.col + l.cols > width ||
          l.slice_begin < 0 || l.slice_begin + l.slice_count > slices)
        throw ParameterError("PhantomSpec: lesion exceeds volume bounds");
    }
  }
};

namespace detail {

inline void paint_ellipse(Eigen::Ref<ImageXd> img, const Ellipse& e, double edge_px) {
  const Index h = img.rows(), w = img.cols();
  const double half_w = 0.5 * static_cast<double>(w - 1);
  const double half_h = 0.5 * static_cast<double>(h - 1);
  const double rx_px = e.rx * half_w;
  const double ry_px = e.ry * half_h;
  const double phi = e.rot_deg * std::numbers::pi / 180.0;
  const double cp = std::cos(phi), sp = std::sin(phi);
  const double min_r = std::min(rx_px, ry_px);

  for (Index r = 0; r < h; ++r) {
    const double yn = (static_cast<double>(r) - half_h) / half_h - e.cy;
    for (Index c = 0; c < w; ++c) {
      const double xn = (static_cast<double>(c) - half_w) / half_w - e.cx;
      // rotate into the ellipse frame (normalized coords)
      const double xr = xn * cp + yn * sp;
      const double yr = -xn * sp + yn * cp;
      const double q = std::sqrt((xr / e.rx) * (xr / e.rx) + (yr / e.ry) * (yr / e.ry));
      // signed distance to the boundary, approximately in pixels
      const double sd = (q - 1.0) * min_r;
      const double alpha = 0.5 * (1.0 - std::tanh(sd / edge_px));
      img(r, c) += e.value * alpha;
    }
  }
}

}  // namespace detail

inline Volume generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  Volume v(spec.slices, spec.height, spec.width, spec.background);
  for (Index s = 0; s < spec.slices; ++s) {
    const double f =
        spec.slices > 1 ? static_cast<double>(s) / static_cast<double>(spec.slices - 1) : 0.0;
    auto img = v.slice(s);
    for (const auto& tr : spec.tracks) {
      const Ellipse e = tr.at(f);
      check_ellipse_in_bounds(e);  // interpolated states must stay inside too
      detail::paint_ellipse(img, e, spec.edge_px);
    }
  }
  for (const auto& l : spec.lesions)
    for (Index s = l.slice_begin; s < l.slice_begin + l.slice_count; ++s)
      for (Index r = l.row; r < l.row + l.rows; ++r)
        for (Index c = l.col; c < l.col + l.cols; ++c) v(s, r, c) += l.value;
  // Overlapping features may stack past the nominal range; the contract is
  // values in [0, 1].
  v.data() = v.data().cwiseMax(0.0).cwiseMin(1.0);
  return v;
}

// Default experiment phantom: a static body outline plus three interior
// features that drift along z — one moves, one grows, one brightens — so the
// ground truth has a definite, nonzero inter-slice roughness.
inline PhantomSpec varying_ellipses_spec(Index slices = 48, Index height = 64,
                                         Index width = 64) {
  PhantomSpec spec;
  spec.slices = slices;
  spec.height = height;
  spec.width = width;
  spec.background = 0.0;

  auto fixed = [](Ellipse e) { return EllipseTrack{e, e}; };

  // body outline, static
  spec.tracks.push_back(fixed({0.30, 0.0, 0.0, 0.82, 0.74, 0.0}));
  // mover: travels left to right across the upper half
  spec.tracks.push_back(
      {Ellipse{0.35, -0.34, -0.26, 0.20, 0.16, 15.0}, Ellipse{0.35, 0.18, -0.22, 0.20, 0.16, 15.0}});
  // grower: fixed center, radius swells
  spec.tracks.push_back(
      {Ellipse{0.25, 0.30, 0.22, 0.12, 0.10, 0.0}, Ellipse{0.25, 0.30, 0.22, 0.30, 0.24, 0.0}});
  // brightener: value ramps up, slight drift
  spec.tracks.push_back(
      {Ellipse{0.18, -0.22, 0.32, 0.14, 0.12, -20.0}, Ellipse{0.42, -0.16, 0.34, 0.14, 0.12, -20.0}});
  return spec;
}

// z-constant variant of the same scene: every track frozen at its start
// state, so all slices are identical and the ground truth has zero
// inter-slice roughness.
inline PhantomSpec extruded_ellipses_spec(Index slices = 48, Index height = 64,
                                          Index width = 64) {
  PhantomSpec spec = varying_ellipses_spec(slices, height, width);
  for (auto& tr : spec.tracks) tr.end = tr.start;
  return spec;
}

// Extruded scene plus a 3-voxel bar in the two central slices: a minimal
// lesion whose voxel count is exact, for checking that reconstructions keep
// (or lose) small z-localized features.
inline PhantomSpec step_lesion_spec(Index slices = 48, Index height = 64, Index width = 64) {
  if (slices < 2) throw DimensionError("step_lesion_spec: need at least two slices");
  PhantomSpec spec = extruded_ellipses_spec(slices, height, width);
  Lesion l;
  l.value = 0.45;
  l.rows = 1;
  l.cols = 3;
  l.row = height / 2;
  l.col = width / 2 - 1;
  l.slice_begin = slices / 2 - 1;
  l.slice_count = 2;
  spec.lesions.push_back(l);
  return spec;
}

// Radially symmetric, very smooth test image: flat disk with a logistic
// falloff, support clipped to the circle inscribed in the image so the
// square domain never truncates the tail anisotropically. Its projections
// are analytically angle-independent, which makes it the reference object
// for rotational-consistency checks of the projector.
inline ImageXd gaussian_disk(Index h, Index w, double radius_px, double edge_px) {
  if (h <= 0 || w <= 0) throw DimensionError("gaussian_disk: dimensions must be positive");
  if (!(radius_px > 0.0) || !(edge_px > 0.0))
    throw ParameterError("gaussian_disk: radius and edge must be positive");
  ImageXd img(h, w);
  const double cx = 0.5 * static_cast<double>(w - 1);
  const double cy = 0.5 * static_cast<double>(h - 1);
  const double r_win = 0.5 * static_cast<double>(std::min(h, w)) - 1.0;
  const double floor_val = 1.0 / (1.0 + std::exp((r_win - radius_px) / edge_px));
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c) {
      const double dx = static_cast<double>(c) - cx;
      const double dy = static_cast<double>(r) - cy;
      const double rad = std::sqrt(dx * dx + dy * dy);
      const double s = 1.0 / (1.0 + std::exp((rad - radius_px) / edge_px));
      img(r, c) = std::max(0.0, (s - floor_val) / (1.0 - floor_val));
    }
  return img;
}

inline PhantomSpec phantom_preset(const std::string& name, Index slices, Index height,
                                  Index width) {
  if (name == "varying_ellipses") return varying_ellipses_spec(slices, height, width);
  if (name == "extruded_ellipses") return extruded_ellipses_spec(slices, height, width);
  if (name == "step_lesion") return step_lesion_spec(slices, height, width);
  throw ParameterError("phantom_preset: unknown preset '" + name + "'");
}

}  // namespace iscs
