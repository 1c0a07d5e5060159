#include "cl3d/pipeline/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>
#include <utility>

#include <json.hpp>

#include "cl3d/alignment/features.hpp"
#include "cl3d/detector/checkpoint.hpp"
#include "cl3d/detector/decode.hpp"
#include "cl3d/io_util.hpp"
#include "cl3d/pointops/range.hpp"

namespace cl3d {

namespace {

namespace fs = std::filesystem;
using MatF = Eigen::MatrixXf;
using VecF = Eigen::VectorXf;

// Deterministic regardless of scheduling: results must be stored by index.
void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, n));
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// Last consecutive pair of a sequence; sequences are validated to hold >= 2.
const PointFrame& cur_frame(const SimSequence& seq) { return seq.frames.back().cloud; }
const PointFrame& prev_frame(const SimSequence& seq) {
  return seq.frames[seq.frames.size() - 2].cloud;
}
const SimFrame& cur_sim(const SimSequence& seq) { return seq.frames.back(); }

TrainSample pair_sample(const PointFrame& prev, const PointFrame& cur,
                        std::vector<ObjectLabel> labels, RangeStrategy strategy) {
  switch (strategy) {
    case RangeStrategy::RN: {
      auto c = range_normalize({cur, std::move(labels)});
      auto p = range_normalize({prev, {}});
      return {std::move(c.frame.points), std::move(p.frame.points), std::move(c.labels)};
    }
    case RangeStrategy::RSym: {
      auto c = range_symmetrize({cur, std::move(labels)});
      auto p = range_symmetrize({prev, {}});
      return {std::move(c.frame.points), std::move(p.frame.points), std::move(c.labels)};
    }
    default:
      return {cur.points, prev.points, std::move(labels)};
  }
}

// Source pairs with ground truth. RSym and RSp shape only the target side /
// the fan schedule, so the plain frames are used here.
std::vector<TrainSample> source_samples(const Benchmark& bench, RangeStrategy strategy) {
  const RangeStrategy s = strategy == RangeStrategy::RN ? RangeStrategy::RN : RangeStrategy::None;
  std::vector<TrainSample> out;
  out.reserve(bench.source.size());
  for (const auto& seq : bench.source)
    out.push_back(pair_sample(prev_frame(seq), cur_frame(seq), cur_sim(seq).labels.read(), s));
  return out;
}

// Per sequence, the 6 fans of its frame pair, rotated onto the forward axis.
std::vector<std::vector<TrainSample>> source_fan_samples(const Benchmark& bench) {
  std::vector<std::vector<TrainSample>> out;
  out.reserve(bench.source.size());
  for (const auto& seq : bench.source) {
    auto cur_fans = range_split({cur_frame(seq), cur_sim(seq).labels.read()});
    auto prev_fans = range_split({prev_frame(seq), {}});
    std::vector<TrainSample> fans;
    fans.reserve(cur_fans.size());
    for (std::size_t k = 0; k < cur_fans.size(); ++k)
      fans.push_back({std::move(cur_fans[k].frame.points), std::move(prev_fans[k].frame.points),
                      std::move(cur_fans[k].labels)});
    out.push_back(std::move(fans));
  }
  return out;
}

// Unlabeled target-train pairs in the strategy's training coordinates.
std::vector<TrainSample> target_train_samples(const Benchmark& bench, RangeStrategy strategy) {
  const RangeStrategy s = strategy == RangeStrategy::RSp ? RangeStrategy::None : strategy;
  std::vector<TrainSample> out;
  out.reserve(bench.target_train.size());
  for (const auto& seq : bench.target_train)
    out.push_back(pair_sample(prev_frame(seq), cur_frame(seq), {}, s));
  return out;
}

// Withheld target-train ground truth in the same coordinates as the pseudo
// labels; verification only, does not trip the label audit.
std::vector<std::vector<ObjectLabel>> target_train_truth(const Benchmark& bench,
                                                         RangeStrategy strategy) {
  std::vector<std::vector<ObjectLabel>> out;
  out.reserve(bench.target_train.size());
  for (const auto& seq : bench.target_train) {
    std::vector<ObjectLabel> labels = cur_sim(seq).labels.for_verification();
    switch (strategy) {
      case RangeStrategy::RN:
        out.push_back(range_normalize({cur_frame(seq), std::move(labels)}).labels);
        break;
      case RangeStrategy::RSym:
        out.push_back(range_symmetrize({cur_frame(seq), std::move(labels)}).labels);
        break;
      default:
        out.push_back(std::move(labels));
    }
  }
  return out;
}

struct EvalSample {
  TrainSample sample;
  std::vector<ObjectLabel> truth;
};

// Evaluation stays in plain target coordinates except under RN, where the
// recentering is part of the deployed representation (points and ground
// truth shift together, so distances are unaffected).
std::vector<EvalSample> eval_samples(const Benchmark& bench, RangeStrategy strategy) {
  const RangeStrategy s =
      strategy == RangeStrategy::RN ? RangeStrategy::RN : RangeStrategy::None;
  std::vector<EvalSample> out;
  out.reserve(bench.target_eval.size());
  for (const auto& seq : bench.target_eval) {
    EvalSample e;
    e.sample = pair_sample(prev_frame(seq), cur_frame(seq),
                           cur_sim(seq).labels.for_verification(), s);
    e.truth = std::move(e.sample.labels);
    e.sample.labels.clear();
    out.push_back(std::move(e));
  }
  return out;
}

// Cross-entropy on the shape branch over the sample's boxes, averaged over
// the boxes with enough interior points.
AuxLossFn<float> shape_aux(const ExperimentConfig& cfg) {
  const float weight = static_cast<float>(cfg.shape_aux_weight);
  const double margin = cfg.crop_margin;
  if (weight == 0.0f) return {};
  return [weight, margin](const TrainSample& s, const DetectorParams<float>& p,
                          DetectorParams<float>& g) -> float {
    std::vector<ShapeSample> shapes;
    std::vector<int> class_ids;
    for (const auto& label : s.labels) {
      try {
        shapes.push_back(sample_shape(s.current, label.box, kShapePoints, margin,
                                      kMinShapePoints));
        class_ids.push_back(label.class_id);
      } catch (const Error&) {
        // too few interior points; no shape to learn from
      }
    }
    if (shapes.empty()) return 0.0f;
    const float scale = weight / static_cast<float>(shapes.size());
    float total = 0.0f;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      const auto fwd = shape_forward(shapes[i].points, p);
      total += shape_class_loss(fwd, class_ids[i], p, &g, scale);
    }
    return total;
  };
}

std::uint64_t stage_seed(std::uint64_t seed, std::uint64_t stage_tag, std::uint64_t a,
                         std::uint64_t b = 0) {
  return mix_seed({seed, stage_tag, a, b});
}

constexpr std::uint64_t kSourceStage = 0x737263;  // source epochs
constexpr std::uint64_t kTargetStage = 0x746774;  // adaptation epochs
constexpr std::uint64_t kOracleStage = 0x6f7263;  // oracle epochs

void log_epoch(const char* stage, int epoch, int total, const LossTerms<float>& t) {
  std::fprintf(stderr, "[%s] epoch %d/%d loss %.4f (cls %.4f box %.4f motion %.4f aux %.4f)\n",
               stage, epoch + 1, total, static_cast<double>(t.total + t.aux),
               static_cast<double>(t.cls), static_cast<double>(t.box),
               static_cast<double>(t.motion), static_cast<double>(t.aux));
}

void atomic_text(const std::string& path, const std::string& text) {
  io::AtomicFile file(path);
  file.stream() << text;
  file.commit();
}

std::string format_double(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

std::string threshold_key(double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", t);
  return buf;
}

}  // namespace

const char* mode_name(Mode mode) {
  switch (mode) {
    case Mode::DT: return "dt";
    case Mode::ST: return "st";
    case Mode::CL3D: return "cl3d";
    case Mode::Oracle: return "oracle";
  }
  return "?";
}

const char* strategy_name(RangeStrategy strategy) {
  switch (strategy) {
    case RangeStrategy::None: return "none";
    case RangeStrategy::RN: return "rn";
    case RangeStrategy::RSym: return "rsym";
    case RangeStrategy::RSp: return "rsp";
  }
  return "?";
}

Mode parse_mode(const std::string& text) {
  if (text == "dt") return Mode::DT;
  if (text == "st") return Mode::ST;
  if (text == "cl3d") return Mode::CL3D;
  if (text == "oracle") return Mode::Oracle;
  throw Error("bad-value", "run.mode must be dt|st|cl3d|oracle, got '" + text + "'");
}

RangeStrategy parse_strategy(const std::string& text) {
  if (text == "none") return RangeStrategy::None;
  if (text == "rn") return RangeStrategy::RN;
  if (text == "rsym") return RangeStrategy::RSym;
  if (text == "rsp") return RangeStrategy::RSp;
  throw Error("bad-value", "run.range_strategy must be none|rn|rsym|rsp, got '" + text + "'");
}

std::string ExperimentConfig::method() const {
  std::string m = mode_name(mode);
  if (range_strategy != RangeStrategy::None) m += std::string("+") + strategy_name(range_strategy);
  if (mode == Mode::CL3D) {
    if (!use_sga && !use_tma) {
      m += "-sga-tma";
    } else if (!use_sga) {
      m += "-sga";
    } else if (!use_tma) {
      m += "-tma";
    }
  }
  return m;
}

ExperimentConfig experiment_from_config(const KeyValueConfig& cfg) {
  ExperimentConfig e;
  e.mode = parse_mode(cfg.get_string("run.mode", "cl3d"));
  e.range_strategy = parse_strategy(cfg.get_string("run.range_strategy", "rn"));
  e.seed = static_cast<std::uint64_t>(cfg.get_int64("run.seed", 1));
  e.epochs_source = cfg.get_int("run.epochs_source", 20);
  e.epochs_target = cfg.get_int("run.epochs_target", 1);
  e.rounds = cfg.get_int("run.rounds", 1);
  e.score_floor = cfg.get_double("run.score_floor", 0.2);
  e.threads = cfg.get_int("run.threads", 0);

  e.grid = BevGrid(cfg.get_double("grid.extent", 50.0), cfg.get_int("grid.resolution", 128));

  e.dims.hidden = cfg.get_int("detector.hidden", 32);
  e.dims.classes = cfg.get_int("detector.classes", 2);

  e.train.adam.lr = static_cast<float>(cfg.get_double("train.lr", 1e-3));
  e.train.batch_size = cfg.get_int("train.batch", 4);
  e.train.augment = cfg.get_bool("train.augment", true);
  e.train.augment_options.flip = cfg.get_bool("train.flip", true);
  e.train.augment_options.rotate = cfg.get_bool("train.rotate", true);
  e.train.augment_options.scale = cfg.get_bool("train.scale", true);

  e.use_sga = cfg.get_bool("alignment.use_sga", true);
  e.use_tma = cfg.get_bool("alignment.use_tma", true);
  e.crop_margin = cfg.get_double("alignment.crop_margin", 0.1);
  e.shape_aux_weight = cfg.get_double("alignment.shape_aux_weight", 1.0);

  e.ema_alpha = cfg.get_double("proto.alpha", 0.99);
  e.w_bg = cfg.get_double("proto.w_bg", 0.1);

  e.bench.seed = static_cast<std::uint64_t>(cfg.get_int64("bench.seed", 1));
  e.bench.source_sequences = cfg.get_int("bench.source_sequences", 50);
  e.bench.target_train_sequences = cfg.get_int("bench.target_train_sequences", 50);
  e.bench.target_eval_sequences = cfg.get_int("bench.target_eval_sequences", 32);
  const int cars = cfg.get_int("bench.cars", 10);
  const int barriers = cfg.get_int("bench.barriers", 6);
  const int frames = cfg.get_int("bench.frames", 2);
  const double dropout = cfg.get_double("bench.dropout", 0.0);
  for (SimConfig* sim : {&e.bench.source_sim, &e.bench.target_sim}) {
    sim->num_cars = cars;
    sim->num_barriers = barriers;
    sim->frames_per_sequence = frames;
  }
  // target objects live in the solid-state sensor's forward wedge
  e.bench.target_sim.place_azimuth_min_deg = -25.0;
  e.bench.target_sim.place_azimuth_max_deg = 25.0;
  e.bench.target_sim.place_range_min = 10.0;
  e.bench.target_sim.place_range_max = 90.0;
  e.bench.source_device.dropout_prob = dropout;
  e.bench.target_device.dropout_prob = dropout;

  e.match.thresholds = cfg.get_double_list("eval.thresholds", {0.5, 1.0, 2.0, 4.0});

  if (e.epochs_source < 0 || e.epochs_target < 0)
    throw Error("bad-value", "epoch counts must be nonnegative");
  if (e.rounds < 1) throw Error("bad-value", "run.rounds must be at least 1");
  if (e.score_floor < 0.0 || e.score_floor > 1.0)
    throw Error("bad-value", "run.score_floor must lie in [0,1]");
  if (e.w_bg < 0.0 || e.w_bg > 1.0) throw Error("bad-value", "proto.w_bg must lie in [0,1]");
  if (e.ema_alpha <= 0.0 || e.ema_alpha > 1.0)
    throw Error("bad-value", "proto.alpha must lie in (0,1]");
  if (e.crop_margin < 0.0) throw Error("bad-value", "alignment.crop_margin must be nonnegative");
  if (e.dims.hidden < 1 || e.dims.classes < 1)
    throw Error("bad-value", "detector.hidden and detector.classes must be positive");
  if (e.train.batch_size < 1) throw Error("bad-value", "train.batch must be positive");
  if (frames < 2)
    throw Error("bad-value", "bench.frames must be at least 2 (consecutive pairs needed)");
  if (!e.match.valid())
    throw Error("bad-value", "eval.thresholds must be positive and strictly increasing");
  e.bench.source_sim.validate();
  e.bench.target_sim.validate();
  return e;
}

DetectorState<float> pretrain_source(const ExperimentConfig& cfg, const Benchmark& bench) {
  auto state = DetectorState<float>::initial(cfg.dims, cfg.seed);
  const auto aux = shape_aux(cfg);
  if (cfg.range_strategy == RangeStrategy::RSp) {
    const auto fans = source_fan_samples(bench);
    for (int epoch = 0; epoch < cfg.epochs_source; ++epoch) {
      // round-robin: each sequence contributes a different fan every epoch
      std::vector<TrainSample> data;
      data.reserve(fans.size());
      for (std::size_t i = 0; i < fans.size(); ++i)
        data.push_back(fans[i][(i + epoch) % fans[i].size()]);
      const auto terms = train_epoch(state, data, cfg.grid, cfg.train,
                                     stage_seed(cfg.seed, kSourceStage, epoch), {}, aux);
      log_epoch("source", epoch, cfg.epochs_source, terms);
    }
    return state;
  }
  const auto data = source_samples(bench, cfg.range_strategy);
  for (int epoch = 0; epoch < cfg.epochs_source; ++epoch) {
    const auto terms = train_epoch(state, data, cfg.grid, cfg.train,
                                   stage_seed(cfg.seed, kSourceStage, epoch), {}, aux);
    log_epoch("source", epoch, cfg.epochs_source, terms);
  }
  return state;
}

std::vector<std::vector<ObjectLabel>> generate_pseudo_labels(const DetectorState<float>& state,
                                                             const ExperimentConfig& cfg,
                                                             const Benchmark& bench) {
  const auto data = target_train_samples(bench, cfg.range_strategy);
  std::vector<std::vector<ObjectLabel>> out(data.size());
  const double ground_z = cfg.bench.target_sim.ground_plane_z;
  parallel_for(static_cast<int>(data.size()), cfg.threads, [&](int i) {
    const auto fwd = encode(data[i].current, data[i].previous, cfg.grid, state.params);
    const auto detections = decode_detections(fwd, cfg.grid, cfg.score_floor);
    std::vector<ObjectLabel> labels;
    labels.reserve(detections.size());
    for (std::size_t j = 0; j < detections.size(); ++j) {
      ObjectLabel lab = detection_to_label(detections[j], static_cast<std::int64_t>(j));
      // detectors predict no vertical extent; class-nominal values keep the
      // boxes croppable for shape extraction
      const double height = lab.class_id == kClassCar ? cfg.bench.target_sim.car_size.z()
                                                      : cfg.bench.target_sim.barrier_size.z();
      lab.box.size.z() = height;
      lab.box.center.z() = ground_z + height / 2.0;
      labels.push_back(std::move(lab));
    }
    out[i] = std::move(labels);
  });
  return out;
}

void seed_prototypes(PrototypeStore<float>& store, const DetectorState<float>& state,
                     const ExperimentConfig& cfg, const Benchmark& bench) {
  const RangeStrategy s =
      cfg.range_strategy == RangeStrategy::RSp ? RangeStrategy::None : cfg.range_strategy;
  const auto data = source_samples(bench, s);
  const int classes = cfg.dims.classes;
  const int geo_dim = 2 * cfg.dims.hidden;
  const int mo_dim = cfg.dims.hidden;
  std::vector<std::vector<std::optional<VecF>>> aggregates(
      data.size(), std::vector<std::optional<VecF>>(classes));
  parallel_for(static_cast<int>(data.size()), cfg.threads, [&](int i) {
    const auto fwd = encode(data[i].current, data[i].previous, cfg.grid, state.params);
    std::vector<FusionFeature<float>> features;
    for (const auto& label : data[i].labels) {
      try {
        VecF geo = VecF::Zero(geo_dim);
        VecF mo = VecF::Zero(mo_dim);
        if (cfg.use_sga)
          geo = extract_geo(data[i].current, label.box, fwd, cfg.grid, state.params,
                            cfg.crop_margin)
                    .f_geo;
        if (cfg.use_tma) mo = extract_motion(label.box, fwd, cfg.grid);
        features.push_back(fuse<float>(geo, mo, 1.0f, label.class_id));
      } catch (const Error&) {
        // degenerate shape or off-grid center; the object contributes nothing
      }
    }
    for (int c = 0; c < classes; ++c) aggregates[i][c] = aggregate_batch(features, c);
  });
  for (std::size_t i = 0; i < aggregates.size(); ++i)
    for (int c = 0; c < classes; ++c)
      if (aggregates[i][c])
        ema_update(store, c, *aggregates[i][c], static_cast<float>(cfg.ema_alpha));
}

DetectorState<float> self_train(DetectorState<float> state, const ExperimentConfig& cfg,
                                const Benchmark& bench,
                                const std::vector<std::vector<ObjectLabel>>& pseudo,
                                PrototypeStore<float>* store, int round) {
  auto data = target_train_samples(bench, cfg.range_strategy);
  if (pseudo.size() != data.size())
    throw Error("shape-mismatch", "one pseudo-label set per target-train sequence required");
  for (std::size_t i = 0; i < data.size(); ++i) data[i].labels = pseudo[i];

  TrainOptions<float> opt = cfg.train;
  opt.use_motion = false;  // no trustworthy velocity supervision on the target side

  const bool with_modules = cfg.mode == Mode::CL3D && (cfg.use_sga || cfg.use_tma);
  const int classes = cfg.dims.classes;
  const int cells = cfg.grid.cells();
  WeightFn<float> weight_fn;
  if (with_modules) {
    if (!store) throw Error("bad-value", "prototype store required for CL3D self-training");
    const int geo_dim = 2 * cfg.dims.hidden;
    const int mo_dim = cfg.dims.hidden;
    weight_fn = [&params = state.params, store, &cfg, geo_dim, mo_dim, classes](
                    const TrainSample& s, const FeatureMaps<float>& fwd) -> MatF {
      const int n = static_cast<int>(s.labels.size());
      std::vector<std::optional<FusionFeature<float>>> per_label(n);
      std::vector<FusionFeature<float>> valid;
      for (int i = 0; i < n; ++i) {
        const auto& label = s.labels[i];
        try {
          VecF geo = VecF::Zero(geo_dim);
          VecF mo = VecF::Zero(mo_dim);
          if (cfg.use_sga)
            geo = extract_geo(s.current, label.box, fwd, cfg.grid, params, cfg.crop_margin).f_geo;
          if (cfg.use_tma) mo = extract_motion(label.box, fwd, cfg.grid);
          auto f = fuse<float>(geo, mo, static_cast<float>(label.confidence), label.class_id);
          per_label[i] = f;
          valid.push_back(std::move(f));
        } catch (const Error&) {
          // degenerate shape / off-grid center / null feature: fall back below
        }
      }
      for (int c = 0; c < classes; ++c)
        if (auto agg = aggregate_batch(valid, c))
          ema_update(*store, c, *agg, static_cast<float>(cfg.ema_alpha));
      std::vector<float> similarities(n);
      for (int i = 0; i < n; ++i) {
        if (cfg.force_unit_similarity) {
          similarities[i] = 1.0f;
          continue;
        }
        if (!per_label[i]) {
          similarities[i] = static_cast<float>(s.labels[i].confidence);
          continue;
        }
        try {
          similarities[i] = similarity(per_label[i]->vector, *store, s.labels[i].class_id);
        } catch (const Error&) {
          // cold prototype: confidence stands in for this iteration
          similarities[i] = static_cast<float>(s.labels[i].confidence);
        }
      }
      MatF w = build_reweight_map(s.labels, similarities, cfg.grid, classes);
      const float floor = cfg.force_unit_similarity ? 1.0f : static_cast<float>(cfg.w_bg);
      return w.cwiseMax(floor);
    };
  } else {
    // ST and the no-module arm: unit weight everywhere
    weight_fn = [classes, cells](const TrainSample&, const FeatureMaps<float>&) -> MatF {
      return MatF::Ones(classes, cells);
    };
  }

  for (int epoch = 0; epoch < cfg.epochs_target; ++epoch) {
    const auto terms =
        train_epoch(state, data, cfg.grid, opt,
                    stage_seed(cfg.seed, kTargetStage, static_cast<std::uint64_t>(round), epoch),
                    weight_fn, {});
    log_epoch("adapt", epoch, cfg.epochs_target, terms);
  }
  return state;
}

DetectorState<float> train_oracle(const ExperimentConfig& cfg, const Benchmark& bench) {
  const RangeStrategy s =
      cfg.range_strategy == RangeStrategy::RSp ? RangeStrategy::None : cfg.range_strategy;
  std::vector<TrainSample> data;
  data.reserve(bench.target_train.size());
  for (const auto& seq : bench.target_train)
    data.push_back(pair_sample(prev_frame(seq), cur_frame(seq), cur_sim(seq).labels.read(), s));
  auto state = DetectorState<float>::initial(cfg.dims, cfg.seed);
  const auto aux = shape_aux(cfg);
  for (int epoch = 0; epoch < cfg.epochs_source; ++epoch) {
    const auto terms = train_epoch(state, data, cfg.grid, cfg.train,
                                   stage_seed(cfg.seed, kOracleStage, epoch), {}, aux);
    log_epoch("oracle", epoch, cfg.epochs_source, terms);
  }
  return state;
}

EvalSummary evaluate_target(const DetectorState<float>& state, const ExperimentConfig& cfg,
                            const Benchmark& bench) {
  const auto samples = eval_samples(bench, cfg.range_strategy);
  std::vector<EvalFrame> frames(samples.size());
  parallel_for(static_cast<int>(samples.size()), cfg.threads, [&](int i) {
    const auto fwd =
        encode(samples[i].sample.current, samples[i].sample.previous, cfg.grid, state.params);
    frames[i].detections = decode_detections(fwd, cfg.grid, cfg.score_floor);
    frames[i].ground_truth = samples[i].truth;
  });

  EvalSummary summary;
  int defined = 0;
  for (int c = 0; c < cfg.dims.classes; ++c) {
    const auto record = mean_ap(frames, c, cfg.match);
    if (!record.defined) continue;
    ++defined;
    summary.per_class[class_name(c)] = record.map;
    summary.map += record.map;
    for (const auto& [threshold, ap] : record.ap_per_threshold)
      summary.ap_per_threshold[threshold] += ap;
  }
  if (defined > 0) {
    summary.map /= defined;
    for (auto& [threshold, ap] : summary.ap_per_threshold) ap /= defined;
  }
  return summary;
}

double pseudo_label_recall(const std::vector<std::vector<ObjectLabel>>& pseudo,
                           const ExperimentConfig& cfg, const Benchmark& bench, double distance) {
  const auto truth = target_train_truth(bench, cfg.range_strategy);
  const std::size_t n = std::min(truth.size(), pseudo.size());
  int total = 0;
  int covered = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& gt : truth[i]) {
      if (!cfg.grid.cell_index(gt.box.center.x(), gt.box.center.y())) continue;
      ++total;
      for (const auto& p : pseudo[i]) {
        if (p.class_id != gt.class_id) continue;
        const double dx = p.box.center.x() - gt.box.center.x();
        const double dy = p.box.center.y() - gt.box.center.y();
        if (dx * dx + dy * dy <= distance * distance) {
          ++covered;
          break;
        }
      }
    }
  }
  return total > 0 ? static_cast<double>(covered) / total : 0.0;
}

void write_pseudo_labels(const std::string& path,
                         const std::vector<std::vector<ObjectLabel>>& per_sequence) {
  io::AtomicFile file(path);
  auto& out = file.stream();
  for (std::size_t i = 0; i < per_sequence.size(); ++i) {
    for (const auto& label : per_sequence[i]) {
      nlohmann::json j;
      j["sequence"] = i;
      j["id"] = label.id;
      j["class"] = label.class_id;
      j["center"] = {label.box.center.x(), label.box.center.y(), label.box.center.z()};
      j["size"] = {label.box.size.x(), label.box.size.y(), label.box.size.z()};
      j["yaw"] = label.box.yaw;
      j["velocity"] = {label.velocity.x(), label.velocity.y()};
      j["confidence"] = label.confidence;
      out << j.dump() << '\n';
    }
  }
  file.commit();
}

std::vector<std::vector<ObjectLabel>> read_pseudo_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io-error", "cannot open " + path);
  std::vector<std::vector<ObjectLabel>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw Error("bad-file", "invalid JSON line in " + path);
    const std::size_t seq = j.at("sequence").get<std::size_t>();
    if (seq >= out.size()) out.resize(seq + 1);
    ObjectLabel label;
    label.id = j.at("id").get<std::int64_t>();
    label.class_id = j.at("class").get<int>();
    const auto& c = j.at("center");
    label.box.center = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()};
    const auto& s = j.at("size");
    label.box.size = {s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>()};
    label.box.yaw = j.at("yaw").get<double>();
    const auto& v = j.at("velocity");
    label.velocity = {v.at(0).get<double>(), v.at(1).get<double>()};
    label.confidence = j.at("confidence").get<double>();
    out[seq].push_back(label);
  }
  return out;
}

void write_metrics_files(const std::string& run_dir, const RunArtifacts& artifacts,
                         const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["method"] = artifacts.method;
  j["mode"] = mode_name(cfg.mode);
  j["range_strategy"] = strategy_name(cfg.range_strategy);
  j["seed"] = cfg.seed;
  j["map"] = artifacts.metrics.map;
  nlohmann::json per_class = nlohmann::json::object();
  for (const auto& [name, value] : artifacts.metrics.per_class) per_class[name] = value;
  j["per_class"] = per_class;
  nlohmann::json per_threshold = nlohmann::json::object();
  for (const auto& [threshold, ap] : artifacts.metrics.ap_per_threshold)
    per_threshold[threshold_key(threshold)] = ap;
  j["ap_per_threshold"] = per_threshold;
  if (artifacts.metrics.closed_gap_percent)
    j["closed_gap_percent"] = *artifacts.metrics.closed_gap_percent;
  else
    j["closed_gap_percent"] = nullptr;
  std::size_t count = 0;
  for (const auto& set : artifacts.pseudo_labels) count += set.size();
  j["pseudo_label_count"] = count;
  j["pseudo_recall_2m"] = artifacts.pseudo_recall_2m;
  j["target_labels_accessed"] = artifacts.target_labels_accessed;
  atomic_text((fs::path(run_dir) / "metrics.json").string(), j.dump(2) + "\n");

  std::string csv = "method,mAP,closed_gap\n";
  csv += artifacts.method + "," + format_double(artifacts.metrics.map, 4) + ",";
  csv += artifacts.metrics.closed_gap_percent
             ? format_double(*artifacts.metrics.closed_gap_percent, 2) + "%"
             : std::string("n/a");
  csv += "\n";
  atomic_text((fs::path(run_dir) / "metrics.csv").string(), csv);
}

RunArtifacts run_experiment(const ExperimentConfig& cfg, const KeyValueConfig& resolved,
                            const std::string& run_dir, const Benchmark& bench,
                            const DetectorState<float>* pretrained, const GapRefs& refs) {
  fs::create_directories(run_dir);
  for (const auto& seq : bench.target_train)
    for (const auto& frame : seq.frames) frame.labels.reset_audit();

  atomic_text((fs::path(run_dir) / "config.resolved.cfg").string(), resolved.resolved_text());

  RunArtifacts artifacts;
  artifacts.run_dir = run_dir;
  artifacts.method = cfg.method();

  DetectorState<float> state = pretrained ? *pretrained : pretrain_source(cfg, bench);
  save_checkpoint((fs::path(run_dir) / "source.clds").string(), state.params);

  if (cfg.mode == Mode::Oracle) {
    state = train_oracle(cfg, bench);
  } else if (cfg.mode == Mode::ST || cfg.mode == Mode::CL3D) {
    const bool with_modules = cfg.mode == Mode::CL3D && (cfg.use_sga || cfg.use_tma);
    PrototypeStore<float> store(3 * cfg.dims.hidden, cfg.dims.classes);
    if (with_modules) seed_prototypes(store, state, cfg, bench);
    for (int round = 0; round < cfg.rounds; ++round) {
      artifacts.pseudo_labels = generate_pseudo_labels(state, cfg, bench);
      state = self_train(std::move(state), cfg, bench, artifacts.pseudo_labels,
                         with_modules ? &store : nullptr, round);
    }
    write_pseudo_labels((fs::path(run_dir) / "pseudo_labels.jsonl").string(),
                        artifacts.pseudo_labels);
    artifacts.pseudo_recall_2m = pseudo_label_recall(artifacts.pseudo_labels, cfg, bench, 2.0);
    if (with_modules) save_prototypes((fs::path(run_dir) / "prototypes.clpr").string(), store);
  }

  save_checkpoint((fs::path(run_dir) / "final.clds").string(), state.params);
  artifacts.metrics = evaluate_target(state, cfg, bench);
  if (refs.dt_map && refs.oracle_map)
    artifacts.metrics.closed_gap_percent =
        closed_gap(artifacts.metrics.map, *refs.dt_map, *refs.oracle_map);

  for (const auto& seq : bench.target_train)
    for (const auto& frame : seq.frames)
      if (frame.labels.accessed()) artifacts.target_labels_accessed = true;

  write_metrics_files(run_dir, artifacts, cfg);
  std::fprintf(stderr, "[run] %s mAP %.4f (%s)\n", artifacts.method.c_str(),
               artifacts.metrics.map, run_dir.c_str());
  return artifacts;
}

}  // namespace cl3d
