#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "cl3d/detector/grid.hpp"
#include "cl3d/detector/params.hpp"
#include "cl3d/types.hpp"

namespace cl3d {

// Gaussian splat radius (in cells) guaranteeing IoU >= min_overlap between
// the true footprint and any box whose corners shift by r; the corrected
// minimum over the three quadratic cases.
inline double gaussian_radius(double width_cells, double length_cells,
                              double min_overlap = 0.7) {
  const double w = width_cells, h = length_cells, o = min_overlap;

  const double b1 = h + w;
  const double c1 = w * h * (1.0 - o) / (1.0 + o);
  const double r1 = (b1 - std::sqrt(std::max(0.0, b1 * b1 - 4.0 * c1))) / 2.0;

  const double b2 = 2.0 * (h + w);
  const double c2 = (1.0 - o) * w * h;
  const double r2 = (b2 - std::sqrt(std::max(0.0, b2 * b2 - 16.0 * c2))) / 8.0;

  const double b3 = -2.0 * o * (h + w);
  const double c3 = (o - 1.0) * w * h;
  const double r3 = (b3 + std::sqrt(std::max(0.0, b3 * b3 - 16.0 * o * c3))) / (8.0 * o);

  return std::min({r1, r2, r3});
}

// Kernel used by the splatter; d2 in squared cells.
inline double target_kernel(double d2_cells, double sigma_cells) {
  return std::exp(-d2_cells / (2.0 * sigma_cells * sigma_cells));
}

inline double target_sigma(const Box3D& box, const BevGrid& grid) {
  const double cs = grid.cell_size();
  const double r = gaussian_radius(box.size.y() / cs, box.size.x() / cs);
  return std::max(r / 3.0, 0.5);
}

// Per-label regression targets at the label's center cell.
struct CellTarget {
  int cell = 0;
  int class_id = 0;
  Eigen::Matrix<double, kBoxDim, 1> box;       // [dx, dy, log w, log l, sin, cos]
  Eigen::Matrix<double, kMotionDim, 1> motion;  // [vx, vy]
};

template <typename Scalar>
struct TrainTargets {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Mat heat;  // classes x cells
  std::vector<CellTarget> cells;
  int num_pos = 1;  // max(1, kept labels)
};

// Splats one Gaussian per label into its class channel, centered on the
// label's integer cell (the center cell renders exactly 1); overlapping
// kernels take the per-cell max. Labels outside the grid are skipped.
template <typename Scalar>
TrainTargets<Scalar> render_targets(const std::vector<ObjectLabel>& labels, const BevGrid& grid,
                                    int classes) {
  TrainTargets<Scalar> t;
  t.heat.setZero(classes, grid.cells());

  for (const auto& label : labels) {
    const auto center = grid.cell_index(label.box.center.x(), label.box.center.y());
    if (!center || label.class_id < 0 || label.class_id >= classes) continue;
    const int cx = *center % grid.resolution;
    const int cy = *center / grid.resolution;

    const double sigma = target_sigma(label.box, grid);
    const int reach = static_cast<int>(std::ceil(3.0 * sigma));
    for (int dy = -reach; dy <= reach; ++dy) {
      const int iy = cy + dy;
      if (iy < 0 || iy >= grid.resolution) continue;
      for (int dx = -reach; dx <= reach; ++dx) {
        const int ix = cx + dx;
        if (ix < 0 || ix >= grid.resolution) continue;
        const double v =
            target_kernel(static_cast<double>(dx * dx + dy * dy), sigma);
        auto& cell = t.heat(label.class_id, iy * grid.resolution + ix);
        cell = std::max(cell, static_cast<Scalar>(v));
      }
    }

    CellTarget ct;
    ct.cell = *center;
    ct.class_id = label.class_id;
    ct.box[0] = label.box.center.x() - grid.cell_center_x(*center);
    ct.box[1] = label.box.center.y() - grid.cell_center_y(*center);
    ct.box[2] = std::log(label.box.size.y());
    ct.box[3] = std::log(label.box.size.x());
    ct.box[4] = std::sin(label.box.yaw);
    ct.box[5] = std::cos(label.box.yaw);
    ct.motion[0] = label.velocity.x();
    ct.motion[1] = label.velocity.y();
    t.cells.push_back(ct);
  }
  t.num_pos = std::max(1, static_cast<int>(t.cells.size()));
  return t;
}

}  // namespace cl3d
