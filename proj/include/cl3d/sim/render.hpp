#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cl3d/types.hpp"

namespace cl3d {

// Rendered frame plus per-point provenance: object id of the surface each
// point came from, -1 for the ground plane.
struct RenderedFrame {
  PointFrame frame;
  std::vector<ObjectLabel> labels;  // objects with >= 1 surviving return, world order
  std::vector<std::int64_t> point_object;
};

// Slab test of a ray against a yaw-rotated cuboid. Returns the entry distance
// when the ray starts outside the box and hits it, otherwise nullopt.
std::optional<double> ray_box_intersection(const Eigen::Vector3d& origin,
                                           const Eigen::Vector3d& dir, const Box3D& box);

// Casts the device's beam/azimuth lattice against object boxes and the ground
// plane; nearest hit wins. Gaussian range noise and Bernoulli dropout are
// applied per returned ray, both seeded by `seed` alone.
RenderedFrame render_frame(const WorldState& world, const DeviceModel& device, std::uint64_t seed);

}  // namespace cl3d
