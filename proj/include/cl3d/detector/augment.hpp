#pragma once

#include <vector>

#include <Eigen/Core>

#include "cl3d/rng.hpp"
#include "cl3d/types.hpp"

namespace cl3d {

// One training sample: a consecutive frame pair plus the labels of the
// current frame.
struct TrainSample {
  PointMatrix current;
  PointMatrix previous;
  std::vector<ObjectLabel> labels;
};

struct AugmentOptions {
  bool flip = true;      // mirror across the x axis with probability 1/2
  bool rotate = true;    // global yaw in [-rotate_max, rotate_max]
  bool scale = true;     // global scale in [scale_min, scale_max]
  double rotate_max = kPi / 8.0;
  double scale_min = 0.95;
  double scale_max = 1.05;

  bool any() const { return flip || rotate || scale; }
};

namespace detail {

inline void mirror_y(TrainSample& s) {
  s.current.col(1) = -s.current.col(1);
  s.previous.col(1) = -s.previous.col(1);
  for (auto& lab : s.labels) {
    lab.box.center.y() = -lab.box.center.y();
    lab.box.yaw = wrap_angle(-lab.box.yaw);
    lab.velocity.y() = -lab.velocity.y();
  }
}

inline void rotate_z(TrainSample& s, double theta) {
  Eigen::Matrix2d rot;
  rot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  s.current.leftCols(2) = (s.current.leftCols(2) * rot.transpose()).eval();
  s.previous.leftCols(2) = (s.previous.leftCols(2) * rot.transpose()).eval();
  for (auto& lab : s.labels) {
    lab.box.center.head<2>() = rot * lab.box.center.head<2>();
    lab.box.yaw = wrap_angle(lab.box.yaw + theta);
    lab.velocity = rot * lab.velocity;
  }
}

inline void scale_world(TrainSample& s, double k) {
  s.current *= k;
  s.previous *= k;
  for (auto& lab : s.labels) {
    lab.box.center *= k;
    lab.box.size *= k;
    lab.velocity *= k;
  }
}

}  // namespace detail

// Draws one flip/rotation/scale triple and applies it to both frames, the
// labels and the velocities, keeping the sample geometrically consistent.
inline void apply_augmentation(TrainSample& sample, const AugmentOptions& opt, Rng& rng) {
  if (opt.flip && rng.bernoulli(0.5)) detail::mirror_y(sample);
  if (opt.rotate) detail::rotate_z(sample, rng.uniform(-opt.rotate_max, opt.rotate_max));
  if (opt.scale) detail::scale_world(sample, rng.uniform(opt.scale_min, opt.scale_max));
}

}  // namespace cl3d
