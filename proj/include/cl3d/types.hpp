#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace cl3d {

using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3>;  // one point per row

constexpr double kPi = 3.141592653589793238462643383279502884;

// wrap angle to [-pi, pi)
inline double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a < 0) a += 2.0 * kPi;
  return a - kPi;
}

enum class DeviceKind : std::uint8_t { Mechanical = 0, SolidState = 1 };

// Sensor model. Mechanical devices sweep a full 360 deg ring lattice with
// `num_beams` elevation rows; solid-state devices raster a forward fan with
// fixed angular steps on both axes.
struct DeviceModel {
  DeviceKind kind = DeviceKind::Mechanical;
  int num_beams = 32;              // mechanical only
  double vertical_fov_min_deg = -30.0;
  double vertical_fov_max_deg = 10.0;
  double horizontal_fov_min_deg = -180.0;
  double horizontal_fov_max_deg = 180.0;
  double azimuth_step_deg = 0.4;
  double elevation_step_deg = 0.1;  // solid-state raster rows
  double max_range = 50.0;
  double range_interval_near = -50.0;  // perception interval on the forward axis
  double range_interval_far = 50.0;
  double dropout_prob = 0.0;
  double range_noise_sigma = 0.02;

  bool valid() const {
    const double hw = horizontal_fov_max_deg - horizontal_fov_min_deg;
    const bool fov_ok = (kind == DeviceKind::Mechanical) ? std::abs(hw - 360.0) < 1e-9
                                                         : hw < 360.0 - 1e-9;
    return fov_ok && range_interval_near >= -max_range - 1e-9 &&
           range_interval_far <= max_range + 1e-9 && range_interval_near < range_interval_far &&
           dropout_prob >= 0.0 && dropout_prob <= 1.0 && max_range > 0.0;
  }

  double range_midpoint() const { return 0.5 * (range_interval_near + range_interval_far); }
};

// 32-beam ring scanner, disc of radius 50 m.
inline DeviceModel mechanical32_preset() {
  DeviceModel d;
  d.kind = DeviceKind::Mechanical;
  d.num_beams = 32;
  d.vertical_fov_min_deg = -30.0;
  d.vertical_fov_max_deg = 10.0;
  d.horizontal_fov_min_deg = -180.0;
  d.horizontal_fov_max_deg = 180.0;
  d.azimuth_step_deg = 0.4;
  d.max_range = 50.0;
  d.range_interval_near = -50.0;
  d.range_interval_far = 50.0;
  d.range_noise_sigma = 0.02;
  return d;
}

// Forward 60 deg raster fan, 100 m reach.
inline DeviceModel solidstate_preset() {
  DeviceModel d;
  d.kind = DeviceKind::SolidState;
  d.num_beams = 0;
  d.vertical_fov_min_deg = -10.0;
  d.vertical_fov_max_deg = 2.0;
  d.horizontal_fov_min_deg = -30.0;
  d.horizontal_fov_max_deg = 30.0;
  d.azimuth_step_deg = 0.1;
  d.elevation_step_deg = 0.1;
  d.max_range = 100.0;
  d.range_interval_near = 0.0;
  d.range_interval_far = 100.0;
  d.range_noise_sigma = 0.02;
  return d;
}

struct Box3D {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d size = Eigen::Vector3d::Ones();  // length (along yaw), width, height
  double yaw = 0.0;

  double length() const { return size.x(); }
  double width() const { return size.y(); }
  double height() const { return size.z(); }
};

struct ObjectLabel {
  std::int64_t id = -1;
  int class_id = 0;
  Box3D box;
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();  // vx, vy
  double confidence = 1.0;  // 1.0 ground truth; detector score for pseudo-labels
};

struct WorldObject {
  std::int64_t id = 0;
  int class_id = 0;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d size = Eigen::Vector3d::Ones();
  double yaw = 0.0;
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();
  double yaw_rate = 0.0;  // rad/s drift
};

struct WorldState {
  std::vector<WorldObject> objects;
  double ground_plane_z = -1.7;
  std::uint64_t rng_seed = 0;
};

struct PointFrame {
  PointMatrix points;  // Nx3, sensor at origin
  double timestamp = 0.0;
  DeviceModel device;
  int frame_index = 0;
};

struct Detection {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();   // x, y meters
  Eigen::Vector2d size_wl = Eigen::Vector2d::Ones();  // width, length
  double yaw = 0.0;
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();
  int class_id = 0;
  double score = 0.0;
};

// Class ids used by the synthetic benchmark.
constexpr int kClassCar = 0;
constexpr int kClassBarrier = 1;

inline const char* class_name(int class_id) {
  switch (class_id) {
    case kClassCar: return "car";
    case kClassBarrier: return "barrier";
    default: return "unknown";
  }
}

}  // namespace cl3d
