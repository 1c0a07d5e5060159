#include "cl3d/sim/world.hpp"

#include <cmath>

#include "cl3d/error.hpp"
#include "cl3d/rng.hpp"

namespace cl3d {

void SimConfig::validate() const {
  if (num_cars < 0 || num_barriers < 0)
    throw Error("bad-value", "object counts must be non-negative");
  if (num_cars + num_barriers == 0) throw Error("bad-value", "no objects configured");
  if (frames_per_sequence < 2) throw Error("bad-value", "need at least 2 frames per sequence");
  if (frame_period <= 0.0) throw Error("bad-value", "frame period must be positive");
  if (car_speed_min < 0.0 || car_speed_max < car_speed_min)
    throw Error("bad-value", "car speed range invalid");
  if (yaw_drift_sigma < 0.0) throw Error("bad-value", "yaw drift sigma must be non-negative");
  if (car_size.minCoeff() <= 0.0 || barrier_size.minCoeff() <= 0.0)
    throw Error("bad-value", "object sizes must be positive");
  if (size_jitter < 0.0 || size_jitter >= 1.0)
    throw Error("bad-value", "size jitter must lie in [0,1)");
  if (place_range_min < 0.0 || place_range_max < place_range_min)
    throw Error("bad-value", "placement range invalid");
  if (place_azimuth_max_deg < place_azimuth_min_deg)
    throw Error("bad-value", "placement azimuth invalid");
}

WorldState advance_world(const WorldState& state, double dt) {
  WorldState next = state;
  for (auto& obj : next.objects) {
    obj.center.x() += obj.velocity.x() * dt;
    obj.center.y() += obj.velocity.y() * dt;
    obj.yaw = wrap_angle(obj.yaw + obj.yaw_rate * dt);
  }
  return next;
}

namespace {

WorldObject sample_object(const SimConfig& config, Rng& rng, std::int64_t id, int class_id) {
  WorldObject obj;
  obj.id = id;
  obj.class_id = class_id;

  const double az =
      rng.uniform(config.place_azimuth_min_deg, config.place_azimuth_max_deg) * kPi / 180.0;
  const double r = rng.uniform(config.place_range_min, config.place_range_max);
  const Eigen::Vector3d base = class_id == kClassCar ? config.car_size : config.barrier_size;
  for (int a = 0; a < 3; ++a)
    obj.size[a] = base[a] * (1.0 + rng.uniform(-config.size_jitter, config.size_jitter));
  obj.center = {r * std::cos(az), r * std::sin(az), config.ground_plane_z + obj.size.z() / 2.0};

  if (class_id == kClassCar) {
    const double heading = rng.uniform(-kPi, kPi);
    const double speed = rng.uniform(config.car_speed_min, config.car_speed_max);
    obj.yaw = wrap_angle(heading);
    obj.velocity = {speed * std::cos(heading), speed * std::sin(heading)};
    obj.yaw_rate = config.yaw_drift_sigma > 0.0 ? rng.normal(0.0, config.yaw_drift_sigma) : 0.0;
  } else {
    obj.yaw = wrap_angle(rng.uniform(-kPi, kPi));
  }
  return obj;
}

}  // namespace

std::vector<WorldState> make_world(const SimConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(mix_seed({seed, 0x776f726cULL}));  // world stream

  WorldState state;
  state.ground_plane_z = config.ground_plane_z;
  state.rng_seed = seed;
  std::int64_t id = 0;
  for (int i = 0; i < config.num_cars; ++i)
    state.objects.push_back(sample_object(config, rng, id++, kClassCar));
  for (int i = 0; i < config.num_barriers; ++i)
    state.objects.push_back(sample_object(config, rng, id++, kClassBarrier));

  std::vector<WorldState> sequence;
  sequence.reserve(config.frames_per_sequence);
  sequence.push_back(state);
  for (int f = 1; f < config.frames_per_sequence; ++f)
    sequence.push_back(advance_world(sequence.back(), config.frame_period));
  return sequence;
}

}  // namespace cl3d
