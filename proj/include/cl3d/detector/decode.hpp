#pragma once

#include <cmath>
#include <vector>

#include "cl3d/detector/encode.hpp"
#include "cl3d/detector/grid.hpp"
#include "cl3d/types.hpp"

namespace cl3d {

// Turns head outputs into detections: a cell fires when its heatmap logit is
// a 3x3 local maximum (>= every in-grid neighbor) and its sigmoid score
// clears `score_floor`. Output is ordered by class, then by cell index.
template <typename Scalar>
std::vector<Detection> decode_detections(const FeatureMaps<Scalar>& fwd, const BevGrid& grid,
                                         double score_floor) {
  std::vector<Detection> dets;
  const int classes = static_cast<int>(fwd.heat.rows());
  const int res = grid.resolution;
  for (int c = 0; c < classes; ++c) {
    for (int iy = 0; iy < res; ++iy) {
      for (int ix = 0; ix < res; ++ix) {
        const int cell = iy * res + ix;
        const double logit = static_cast<double>(fwd.heat(c, cell));
        const double score = 1.0 / (1.0 + std::exp(-logit));
        if (score < score_floor) continue;
        bool peak = true;
        for (int dy = -1; dy <= 1 && peak; ++dy) {
          for (int dx = -1; dx <= 1 && peak; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const int nx = ix + dx, ny = iy + dy;
            if (nx < 0 || nx >= res || ny < 0 || ny >= res) continue;
            if (static_cast<double>(fwd.heat(c, ny * res + nx)) > logit) peak = false;
          }
        }
        if (!peak) continue;
        Detection d;
        d.class_id = c;
        d.score = score;
        d.center.x() = grid.cell_center_x(cell) + static_cast<double>(fwd.box(0, cell));
        d.center.y() = grid.cell_center_y(cell) + static_cast<double>(fwd.box(1, cell));
        d.size_wl.x() = std::exp(static_cast<double>(fwd.box(2, cell)));
        d.size_wl.y() = std::exp(static_cast<double>(fwd.box(3, cell)));
        d.yaw = std::atan2(static_cast<double>(fwd.box(4, cell)),
                           static_cast<double>(fwd.box(5, cell)));
        d.velocity.x() = static_cast<double>(fwd.motion(0, cell));
        d.velocity.y() = static_cast<double>(fwd.motion(1, cell));
        dets.push_back(d);
      }
    }
  }
  return dets;
}

// Detection -> label, for pseudo-label files and target rendering. Height and
// vertical position are not predicted; they get neutral values that no
// downstream consumer reads.
inline ObjectLabel detection_to_label(const Detection& d, std::int64_t id) {
  ObjectLabel lab;
  lab.id = id;
  lab.class_id = d.class_id;
  lab.box.center = Eigen::Vector3d(d.center.x(), d.center.y(), 0.0);
  lab.box.size = Eigen::Vector3d(d.size_wl.y(), d.size_wl.x(), 1.0);
  lab.box.yaw = d.yaw;
  lab.velocity = d.velocity;
  lab.confidence = d.score;
  return lab;
}

}  // namespace cl3d
