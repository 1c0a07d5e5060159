#pragma once

#include <cstdint>
#include <vector>

#include "cl3d/types.hpp"

namespace cl3d {

// Scene generation parameters. Objects are cuboids resting on the ground
// plane: moving cars plus static barriers as hard negatives. Placement is an
// azimuth/range annulus sector so the same config type covers full-disc and
// forward-wedge scenes.
struct SimConfig {
  int num_cars = 10;
  int num_barriers = 6;
  int frames_per_sequence = 2;
  double frame_period = 0.1;  // seconds
  double car_speed_min = 3.0;
  double car_speed_max = 10.0;
  double yaw_drift_sigma = 0.0;  // rad/s, per-object constant rate
  Eigen::Vector3d car_size{4.6, 1.9, 1.6};
  Eigen::Vector3d barrier_size{3.4, 0.8, 0.9};
  double size_jitter = 0.15;  // +/- fraction per axis
  double place_azimuth_min_deg = -180.0;
  double place_azimuth_max_deg = 180.0;
  double place_range_min = 8.0;
  double place_range_max = 45.0;
  double ground_plane_z = -1.7;

  // throws Error("bad-value") on nonsense
  void validate() const;
};

// Constant-velocity step: centers shift by velocity * dt, yaw integrates the
// per-object drift rate. Pure; sizes, ids and velocities are unchanged.
WorldState advance_world(const WorldState& state, double dt);

// Deterministic scene sequence: samples objects once from `seed`, then
// advances `config.frames_per_sequence - 1` times by `config.frame_period`.
std::vector<WorldState> make_world(const SimConfig& config, std::uint64_t seed);

}  // namespace cl3d
