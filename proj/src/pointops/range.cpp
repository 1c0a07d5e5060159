#include "cl3d/pointops/range.hpp"

#include <cmath>

#include "cl3d/error.hpp"

namespace cl3d {

LabeledFrame range_normalize(const LabeledFrame& in) {
  const double shift = -in.frame.device.range_midpoint();
  LabeledFrame out = in;
  if (shift == 0.0) return out;
  out.frame.points.col(0).array() += shift;
  out.frame.device.range_interval_near += shift;
  out.frame.device.range_interval_far += shift;
  for (auto& label : out.labels) label.box.center.x() += shift;
  return out;
}

LabeledFrame range_symmetrize(const LabeledFrame& in) {
  if (in.frame.device.kind != DeviceKind::SolidState)
    throw Error("not-a-fan", "range_symmetrize expects a solid-state frame");

  LabeledFrame out = in;
  const auto n = in.frame.points.rows();
  out.frame.points.conservativeResize(2 * n, 3);
  out.frame.points.block(n, 0, n, 1) = -in.frame.points.col(0);
  out.frame.points.block(n, 1, n, 1) = -in.frame.points.col(1);
  out.frame.points.block(n, 2, n, 1) = in.frame.points.col(2);

  out.labels.reserve(2 * in.labels.size());
  for (const auto& label : in.labels) {
    ObjectLabel mirrored = label;
    mirrored.box.center.x() = -label.box.center.x();
    mirrored.box.center.y() = -label.box.center.y();
    mirrored.box.yaw = wrap_angle(label.box.yaw + kPi);
    mirrored.velocity = -label.velocity;
    out.labels.push_back(mirrored);
  }

  const double far = std::max(std::abs(in.frame.device.range_interval_near),
                              std::abs(in.frame.device.range_interval_far));
  out.frame.device.range_interval_near = -far;
  out.frame.device.range_interval_far = far;
  return out;
}

namespace {

constexpr int kFanCount = 6;
constexpr double kFanWidthDeg = 60.0;

// azimuth in [0, 360)
double azimuth_deg(double x, double y) {
  double a = std::atan2(y, x) * 180.0 / kPi;
  if (a < 0) a += 360.0;
  if (a >= 360.0) a = 0.0;
  return a;
}

int fan_of(double az_deg) {
  int k = static_cast<int>(az_deg / kFanWidthDeg);
  return std::min(k, kFanCount - 1);
}

}  // namespace

std::vector<SplitFan> range_split(const LabeledFrame& in) {
  if (in.frame.device.kind != DeviceKind::Mechanical)
    throw Error("not-a-disc", "range_split expects a mechanical frame");

  std::vector<std::vector<int>> point_bins(kFanCount);
  for (int i = 0; i < in.frame.points.rows(); ++i)
    point_bins[fan_of(azimuth_deg(in.frame.points(i, 0), in.frame.points(i, 1)))].push_back(i);

  std::vector<std::vector<int>> label_bins(kFanCount);
  for (int i = 0; i < static_cast<int>(in.labels.size()); ++i) {
    const auto& c = in.labels[i].box.center;
    label_bins[fan_of(azimuth_deg(c.x(), c.y()))].push_back(i);
  }

  DeviceModel fan_device = in.frame.device;
  fan_device.kind = DeviceKind::SolidState;
  fan_device.horizontal_fov_min_deg = -30.0;
  fan_device.horizontal_fov_max_deg = 30.0;
  fan_device.range_interval_near = 0.0;
  fan_device.range_interval_far = in.frame.device.max_range;

  std::vector<SplitFan> out(kFanCount);
  for (int k = 0; k < kFanCount; ++k) {
    // rotate fan center (60k + 30 deg) onto azimuth 0
    const double rot = -(kFanWidthDeg * k + kFanWidthDeg / 2.0) * kPi / 180.0;
    const double c = std::cos(rot), s = std::sin(rot);

    SplitFan& fan = out[k];
    fan.rotation_rad = rot;
    fan.frame.timestamp = in.frame.timestamp;
    fan.frame.frame_index = in.frame.frame_index;
    fan.frame.device = fan_device;

    fan.frame.points.resize(static_cast<int>(point_bins[k].size()), 3);
    for (int j = 0; j < static_cast<int>(point_bins[k].size()); ++j) {
      const auto row = in.frame.points.row(point_bins[k][j]);
      fan.frame.points(j, 0) = c * row.x() - s * row.y();
      fan.frame.points(j, 1) = s * row.x() + c * row.y();
      fan.frame.points(j, 2) = row.z();
    }

    for (int li : label_bins[k]) {
      ObjectLabel label = in.labels[li];
      const Eigen::Vector3d p = label.box.center;
      label.box.center.x() = c * p.x() - s * p.y();
      label.box.center.y() = s * p.x() + c * p.y();
      label.box.yaw = wrap_angle(label.box.yaw + rot);
      const Eigen::Vector2d v = label.velocity;
      label.velocity.x() = c * v.x() - s * v.y();
      label.velocity.y() = s * v.x() + c * v.y();
      fan.labels.push_back(label);
    }
  }
  return out;
}

}  // namespace cl3d
