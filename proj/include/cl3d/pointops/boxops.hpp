#pragma once

#include <vector>

#include "cl3d/types.hpp"

namespace cl3d {

// Points of `frame` whose box-frame coordinates lie within size/2 + margin
// on every axis. Returns row indices into frame.points.
std::vector<int> crop_indices_in_box(const PointMatrix& points, const Box3D& box, double margin);

PointMatrix gather_rows(const PointMatrix& points, const std::vector<int>& indices);

// LiDAR frame -> box self-coordinates: R(-yaw) * (p - center). Metric extent
// is preserved; no rescaling by box size.
PointMatrix normalize_to_self(const PointMatrix& points, const Box3D& box);

// Inverse of normalize_to_self.
PointMatrix self_to_lidar(const PointMatrix& points, const Box3D& box);

// K self-coordinate points summarizing one object's shape.
struct ShapeSample {
  PointMatrix points;      // K x 3, box frame
  Box3D source_box;
  int source_count = 0;    // in-box point count before sampling
  bool padded = false;     // fewer than K distinct points were available
};

// crop -> FPS-K (started at the point nearest the box center) -> self frame.
// Throws Error("degenerate-shape") when fewer than `min_points` fall inside.
ShapeSample sample_shape(const PointMatrix& points, const Box3D& box, int k, double margin,
                         int min_points);

}  // namespace cl3d
