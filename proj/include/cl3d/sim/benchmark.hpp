#pragma once

#include <cstdint>
#include <vector>

#include "cl3d/sim/render.hpp"
#include "cl3d/sim/world.hpp"
#include "cl3d/types.hpp"

namespace cl3d {

// Ground-truth labels behind an access audit. The adaptation pipeline must
// never consume target-train labels; read() records the access so tests can
// assert it stayed untouched, while for_verification() serves metrics and
// tests without tripping the audit.
class LabelStore {
 public:
  LabelStore() = default;
  explicit LabelStore(std::vector<ObjectLabel> labels) : labels_(std::move(labels)) {}

  const std::vector<ObjectLabel>& read() const {
    accessed_ = true;
    return labels_;
  }
  const std::vector<ObjectLabel>& for_verification() const { return labels_; }
  bool accessed() const { return accessed_; }
  void reset_audit() const { accessed_ = false; }

 private:
  std::vector<ObjectLabel> labels_;
  mutable bool accessed_ = false;
};

struct SimFrame {
  PointFrame cloud;
  LabelStore labels;
  std::vector<std::int64_t> point_object;  // per-point source object id, -1 ground
};

// Consecutive frames of one world, all rendered by the same device.
struct SimSequence {
  std::vector<SimFrame> frames;
  std::uint64_t world_seed = 0;
};

struct BenchmarkConfig {
  SimConfig source_sim;
  SimConfig target_sim;
  DeviceModel source_device = mechanical32_preset();
  DeviceModel target_device = solidstate_preset();
  int source_sequences = 50;
  int target_train_sequences = 50;
  int target_eval_sequences = 32;
  std::uint64_t seed = 1;
};

struct Benchmark {
  std::vector<SimSequence> source;
  std::vector<SimSequence> target_train;  // labels withheld from the pipeline
  std::vector<SimSequence> target_eval;
  DeviceModel source_device;
  DeviceModel target_device;
};

// Renders the three splits with disjoint per-sequence world seeds.
Benchmark make_benchmark(const BenchmarkConfig& config);

}  // namespace cl3d
