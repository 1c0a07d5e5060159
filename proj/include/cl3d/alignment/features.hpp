#pragma once

#include <cmath>

#include <Eigen/Core>

#include "cl3d/alignment/shape_net.hpp"
#include "cl3d/detector/encode.hpp"
#include "cl3d/detector/grid.hpp"
#include "cl3d/error.hpp"
#include "cl3d/pointops/boxops.hpp"
#include "cl3d/types.hpp"

namespace cl3d {

// Points kept per object by farthest point sampling.
constexpr int kShapePoints = 16;
// Fewer interior points than this and the object has no usable shape.
constexpr int kMinShapePoints = 4;

// Bilinear sample of a channels x cells map at metric (x, y). Grid nodes sit
// at cell centers; border cells replicate outward. Throws "out-of-extent"
// when the location is off the grid.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> bilinear_sample(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& map, const BevGrid& grid,
    double x, double y) {
  if (!grid.cell_index(x, y)) throw Error("out-of-extent", "sample location off the grid");
  const double cs = grid.cell_size();
  const double gx = (x + grid.extent) / cs - 0.5;
  const double gy = (y + grid.extent) / cs - 0.5;
  const int x0 = static_cast<int>(std::floor(gx));
  const int y0 = static_cast<int>(std::floor(gy));
  const double wx = gx - x0;
  const double wy = gy - y0;
  const auto clamp = [&](int v) { return std::min(grid.resolution - 1, std::max(0, v)); };
  const int xa = clamp(x0), xb = clamp(x0 + 1);
  const int ya = clamp(y0), yb = clamp(y0 + 1);
  const auto col = [&](int ix, int iy) { return map.col(iy * grid.resolution + ix); };
  const Scalar w00 = static_cast<Scalar>((1 - wx) * (1 - wy));
  const Scalar w10 = static_cast<Scalar>(wx * (1 - wy));
  const Scalar w01 = static_cast<Scalar>((1 - wx) * wy);
  const Scalar w11 = static_cast<Scalar>(wx * wy);
  return col(xa, ya) * w00 + col(xb, ya) * w10 + col(xa, yb) * w01 + col(xb, yb) * w11;
}

template <typename Scalar>
struct GeoFeature {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Vec f_local;   // shape perceptron output, max-pooled
  Vec f_global;  // backbone map sampled at the box center
  Vec f_geo;     // f_local followed by f_global
};

// Local shape branch (crop -> FPS -> self frame -> perceptron -> max) plus
// the global context sampled from the backbone map at the box center.
template <typename Scalar>
GeoFeature<Scalar> extract_geo(const PointMatrix& frame_points, const Box3D& box,
                               const FeatureMaps<Scalar>& maps, const BevGrid& grid,
                               const DetectorParams<Scalar>& p, double crop_margin = 0.1) {
  const auto sample = sample_shape(frame_points, box, kShapePoints, crop_margin,
                                   kMinShapePoints);
  GeoFeature<Scalar> out;
  out.f_local = shape_forward(sample.points, p).f_local;
  out.f_global = bilinear_sample(maps.f, grid, box.center.x(), box.center.y());
  out.f_geo.resize(out.f_local.size() + out.f_global.size());
  out.f_geo << out.f_local, out.f_global;
  return out;
}

// Motion branch: the penultimate motion map sampled at the box center.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> extract_motion(const Box3D& box,
                                                        const FeatureMaps<Scalar>& maps,
                                                        const BevGrid& grid) {
  return bilinear_sample(maps.m, grid, box.center.x(), box.center.y());
}

template <typename Scalar>
struct FusionFeature {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> vector;  // unit norm
  Scalar d = 1;                                     // confidence
  int class_id = 0;
};

// Concatenates the geometry and motion branches and L2-normalizes, so cosine
// similarity against prototypes reduces to a dot product. The confidence d
// rides alongside; it weights prototype aggregation, not the vector itself.
template <typename Scalar>
FusionFeature<Scalar> fuse(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& f_geo,
                           const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& f_mo, Scalar d,
                           int class_id) {
  FusionFeature<Scalar> out;
  out.vector.resize(f_geo.size() + f_mo.size());
  out.vector << f_geo, f_mo;
  const Scalar norm = out.vector.norm();
  if (norm == Scalar(0)) throw Error("null-feature", "fusion vector has zero norm");
  out.vector /= norm;
  out.d = d;
  out.class_id = class_id;
  return out;
}

}  // namespace cl3d
