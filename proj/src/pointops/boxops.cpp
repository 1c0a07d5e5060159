#include "cl3d/pointops/boxops.hpp"

#include <cmath>

#include "cl3d/error.hpp"
#include "cl3d/pointops/fps.hpp"

namespace cl3d {

std::vector<int> crop_indices_in_box(const PointMatrix& points, const Box3D& box, double margin) {
  const double c = std::cos(-box.yaw), s = std::sin(-box.yaw);
  const Eigen::Vector3d half = box.size * 0.5 + Eigen::Vector3d::Constant(margin);
  std::vector<int> out;
  for (int i = 0; i < points.rows(); ++i) {
    const double px = points(i, 0) - box.center.x();
    const double py = points(i, 1) - box.center.y();
    const double pz = points(i, 2) - box.center.z();
    const double bx = c * px - s * py;
    const double by = s * px + c * py;
    if (std::abs(bx) <= half.x() && std::abs(by) <= half.y() && std::abs(pz) <= half.z())
      out.push_back(i);
  }
  return out;
}

PointMatrix gather_rows(const PointMatrix& points, const std::vector<int>& indices) {
  PointMatrix out(static_cast<int>(indices.size()), 3);
  for (int i = 0; i < static_cast<int>(indices.size()); ++i) out.row(i) = points.row(indices[i]);
  return out;
}

PointMatrix normalize_to_self(const PointMatrix& points, const Box3D& box) {
  if (!std::isfinite(box.yaw)) throw Error("degenerate-shape", "non-finite yaw");
  const double c = std::cos(-box.yaw), s = std::sin(-box.yaw);
  PointMatrix out(points.rows(), 3);
  for (int i = 0; i < points.rows(); ++i) {
    const double px = points(i, 0) - box.center.x();
    const double py = points(i, 1) - box.center.y();
    out(i, 0) = c * px - s * py;
    out(i, 1) = s * px + c * py;
    out(i, 2) = points(i, 2) - box.center.z();
  }
  return out;
}

PointMatrix self_to_lidar(const PointMatrix& points, const Box3D& box) {
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  PointMatrix out(points.rows(), 3);
  for (int i = 0; i < points.rows(); ++i) {
    out(i, 0) = c * points(i, 0) - s * points(i, 1) + box.center.x();
    out(i, 1) = s * points(i, 0) + c * points(i, 1) + box.center.y();
    out(i, 2) = points(i, 2) + box.center.z();
  }
  return out;
}

ShapeSample sample_shape(const PointMatrix& points, const Box3D& box, int k, double margin,
                         int min_points) {
  const auto idx = crop_indices_in_box(points, box, margin);
  if (static_cast<int>(idx.size()) < min_points)
    throw Error("degenerate-shape",
                "only " + std::to_string(idx.size()) + " points inside box");
  const PointMatrix in_box = gather_rows(points, idx);
  const int start = nearest_point_index(in_box, box.center);
  const FpsResult fps = farthest_point_sample(in_box, k, start);

  ShapeSample sample;
  sample.source_box = box;
  sample.source_count = static_cast<int>(in_box.rows());
  sample.padded = fps.padded;
  sample.points = normalize_to_self(gather_rows(in_box, fps.indices), box);
  return sample;
}

}  // namespace cl3d
