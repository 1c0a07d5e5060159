#pragma once

#include <vector>

#include "cl3d/types.hpp"

namespace cl3d {

struct LabeledFrame {
  PointFrame frame;
  std::vector<ObjectLabel> labels;
};

// Rigid translation by -midpoint(range_interval) along the forward axis,
// applied identically to points and box centers; yaw and velocities are
// untouched. A device already centered on the origin passes through
// unchanged, and the stored interval is re-centered so the op is idempotent.
LabeledFrame range_normalize(const LabeledFrame& in);

// Completes a solid-state fan by point-mirroring it through the sensor
// origin (x,y -> -x,-y). Labels are duplicated with mirrored centers,
// yaw + pi, and negated velocity. Throws Error("not-a-fan") on mechanical
// frames. The output frame's range interval becomes symmetric; the fov
// fields keep describing the source fan.
LabeledFrame range_symmetrize(const LabeledFrame& in);

struct SplitFan {
  PointFrame frame;
  std::vector<ObjectLabel> labels;
  double rotation_rad = 0.0;  // rotation that carried original coords into this fan
};

// Partitions a mechanical 360 deg disc into ceil(360/60) = 6 fans of 60 deg,
// each rotated into the canonical forward fan (azimuth 0). Fan k covers
// azimuth [60k, 60k+60) degrees; labels belong to the fan containing their
// center. Throws Error("not-a-disc") on solid-state frames.
std::vector<SplitFan> range_split(const LabeledFrame& in);

}  // namespace cl3d
