#include "cl3d/sim/render.hpp"

#include <cmath>
#include <limits>

#include "cl3d/error.hpp"
#include "cl3d/rng.hpp"

namespace cl3d {

std::optional<double> ray_box_intersection(const Eigen::Vector3d& origin,
                                           const Eigen::Vector3d& dir, const Box3D& box) {
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  const Eigen::Vector3d rel = origin - box.center;
  // box frame: rotate by -yaw about z
  const Eigen::Vector3d o(c * rel.x() + s * rel.y(), -s * rel.x() + c * rel.y(), rel.z());
  const Eigen::Vector3d d(c * dir.x() + s * dir.y(), -s * dir.x() + c * dir.y(), dir.z());

  double tmin = 0.0;
  double tmax = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double half = box.size[a] / 2.0;
    if (std::abs(d[a]) < 1e-12) {
      if (o[a] < -half || o[a] > half) return std::nullopt;
      continue;
    }
    double t0 = (-half - o[a]) / d[a];
    double t1 = (half - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return std::nullopt;
  }
  if (tmin <= 1e-9) return std::nullopt;  // origin inside or behind
  return tmin;
}

namespace {

struct Ray {
  Eigen::Vector3d dir;
};

std::vector<Ray> device_rays(const DeviceModel& device) {
  std::vector<Ray> rays;
  const double deg = kPi / 180.0;
  if (device.kind == DeviceKind::Mechanical) {
    const int beams = device.num_beams;
    const int n_az = static_cast<int>(std::floor(
        (device.horizontal_fov_max_deg - device.horizontal_fov_min_deg) / device.azimuth_step_deg +
        1e-9));
    rays.reserve(static_cast<std::size_t>(beams) * n_az);
    for (int i = 0; i < beams; ++i) {
      const double el =
          beams == 1 ? 0.5 * (device.vertical_fov_min_deg + device.vertical_fov_max_deg)
                     : device.vertical_fov_min_deg + (device.vertical_fov_max_deg -
                                                      device.vertical_fov_min_deg) *
                                                         i / (beams - 1.0);
      const double ce = std::cos(el * deg), se = std::sin(el * deg);
      for (int j = 0; j < n_az; ++j) {
        const double az = (device.horizontal_fov_min_deg + j * device.azimuth_step_deg) * deg;
        rays.push_back({{ce * std::cos(az), ce * std::sin(az), se}});
      }
    }
  } else {
    const int n_el = static_cast<int>(std::floor(
        (device.vertical_fov_max_deg - device.vertical_fov_min_deg) / device.elevation_step_deg +
        1e-9));
    const int n_az = static_cast<int>(std::floor(
        (device.horizontal_fov_max_deg - device.horizontal_fov_min_deg) / device.azimuth_step_deg +
        1e-9));
    rays.reserve(static_cast<std::size_t>(n_el) * n_az);
    for (int i = 0; i < n_el; ++i) {
      const double el = (device.vertical_fov_min_deg + i * device.elevation_step_deg) * deg;
      const double ce = std::cos(el), se = std::sin(el);
      for (int j = 0; j < n_az; ++j) {
        const double az = (device.horizontal_fov_min_deg + j * device.azimuth_step_deg) * deg;
        rays.push_back({{ce * std::cos(az), ce * std::sin(az), se}});
      }
    }
  }
  return rays;
}

}  // namespace

RenderedFrame render_frame(const WorldState& world, const DeviceModel& device,
                           std::uint64_t seed) {
  if (!device.valid()) throw Error("bad-value", "invalid device model");
  if (world.objects.empty()) throw Error("bad-value", "empty world");

  const auto rays = device_rays(device);
  Rng rng(mix_seed({seed, 0x72656e64ULL}));  // render stream

  struct Hit {
    Eigen::Vector3d point;
    std::int64_t object_id;
  };
  std::vector<Hit> hits;
  hits.reserve(rays.size());
  std::vector<int> returns_per_object(world.objects.size(), 0);

  const Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  for (const auto& ray : rays) {
    double t_best = std::numeric_limits<double>::infinity();
    int best = -1;  // -1 ground, >= 0 object index

    if (ray.dir.z() < -1e-12) {
      const double t = world.ground_plane_z / ray.dir.z();
      if (t > 1e-9) {
        t_best = t;
        best = -1;
      }
    }
    for (int i = 0; i < static_cast<int>(world.objects.size()); ++i) {
      const auto& obj = world.objects[i];
      Box3D box{obj.center, obj.size, obj.yaw};
      if (auto t = ray_box_intersection(origin, ray.dir, box); t && *t < t_best) {
        t_best = *t;
        best = i;
      }
    }
    if (!std::isfinite(t_best) || t_best > device.max_range) continue;
    if (best < 0 && ray.dir.z() >= -1e-12) continue;

    if (device.dropout_prob > 0.0 && rng.bernoulli(device.dropout_prob)) continue;
    double t = t_best;
    if (device.range_noise_sigma > 0.0) {
      t = rng.normal(t_best, device.range_noise_sigma);
      if (t <= 1e-6 || t > device.max_range) continue;
    }
    hits.push_back({t * ray.dir, best >= 0 ? world.objects[best].id : -1});
    if (best >= 0) ++returns_per_object[best];
  }

  RenderedFrame out;
  out.frame.device = device;
  out.frame.points.resize(static_cast<int>(hits.size()), 3);
  out.point_object.resize(hits.size());
  for (int i = 0; i < static_cast<int>(hits.size()); ++i) {
    out.frame.points.row(i) = hits[i].point.transpose();
    out.point_object[i] = hits[i].object_id;
  }

  for (int i = 0; i < static_cast<int>(world.objects.size()); ++i) {
    if (returns_per_object[i] == 0) continue;
    const auto& obj = world.objects[i];
    ObjectLabel label;
    label.id = obj.id;
    label.class_id = obj.class_id;
    label.box = Box3D{obj.center, obj.size, obj.yaw};
    label.velocity = obj.velocity;
    label.confidence = 1.0;
    out.labels.push_back(label);
  }
  return out;
}

}  // namespace cl3d
