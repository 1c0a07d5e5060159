#include "cl3d/sim/benchmark.hpp"

#include "cl3d/error.hpp"
#include "cl3d/rng.hpp"

namespace cl3d {

namespace {

std::vector<SimSequence> render_split(const SimConfig& sim, const DeviceModel& device,
                                      int sequences, std::uint64_t base_seed,
                                      std::uint64_t split_tag) {
  std::vector<SimSequence> split;
  split.reserve(sequences);
  for (int s = 0; s < sequences; ++s) {
    SimSequence seq;
    seq.world_seed = mix_seed({base_seed, split_tag, static_cast<std::uint64_t>(s)});
    const auto states = make_world(sim, seq.world_seed);
    seq.frames.reserve(states.size());
    for (int f = 0; f < static_cast<int>(states.size()); ++f) {
      auto rendered =
          render_frame(states[f], device, mix_seed({seq.world_seed, 0x6672616dULL,
                                                    static_cast<std::uint64_t>(f)}));
      rendered.frame.frame_index = f;
      rendered.frame.timestamp = f * sim.frame_period;
      SimFrame frame;
      frame.cloud = std::move(rendered.frame);
      frame.labels = LabelStore(std::move(rendered.labels));
      frame.point_object = std::move(rendered.point_object);
      seq.frames.push_back(std::move(frame));
    }
    split.push_back(std::move(seq));
  }
  return split;
}

}  // namespace

Benchmark make_benchmark(const BenchmarkConfig& config) {
  config.source_sim.validate();
  config.target_sim.validate();
  if (config.source_sim.frames_per_sequence < 2 || config.target_sim.frames_per_sequence < 2)
    throw Error("bad-value", "need at least 2 frames per sequence");
  if (!config.source_device.valid() || !config.target_device.valid())
    throw Error("bad-value", "invalid device preset");
  if (config.source_sequences < 1 || config.target_train_sequences < 1 ||
      config.target_eval_sequences < 1)
    throw Error("bad-value", "each split needs at least one sequence");

  Benchmark bench;
  bench.source_device = config.source_device;
  bench.target_device = config.target_device;
  bench.source = render_split(config.source_sim, config.source_device, config.source_sequences,
                              config.seed, 1);
  bench.target_train = render_split(config.target_sim, config.target_device,
                                    config.target_train_sequences, config.seed, 2);
  bench.target_eval = render_split(config.target_sim, config.target_device,
                                   config.target_eval_sequences, config.seed, 3);
  return bench;
}

}  // namespace cl3d
