#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cl3d/alignment/features.hpp"
#include "cl3d/detector/grid.hpp"
#include "cl3d/detector/target.hpp"
#include "cl3d/error.hpp"
#include "cl3d/io_util.hpp"
#include "cl3d/types.hpp"

namespace cl3d {

// One exponentially averaged feature vector per class. Uninitialized classes
// are never consulted for similarity.
template <typename Scalar>
struct PrototypeStore {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Mat vectors;  // dim x classes
  std::vector<std::uint8_t> initialized;
  std::vector<std::int64_t> counts;

  PrototypeStore() = default;
  PrototypeStore(int dim, int classes)
      : vectors(Mat::Zero(dim, classes)), initialized(classes, 0), counts(classes, 0) {}

  int dim() const { return static_cast<int>(vectors.rows()); }
  int classes() const { return static_cast<int>(vectors.cols()); }
};

// Confidence-weighted mean (1/N) sum d_i * v_i over the batch features of
// one class; deliberately not renormalized. Empty class -> nullopt.
template <typename Scalar>
std::optional<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> aggregate_batch(
    const std::vector<FusionFeature<Scalar>>& features, int class_id) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sum;
  int n = 0;
  for (const auto& f : features) {
    if (f.class_id != class_id) continue;
    if (n == 0) sum = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(f.vector.size());
    sum += f.d * f.vector;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<Scalar>(n);
}

// First update adopts the vector; later ones blend with weight 1 - alpha.
// Non-finite inputs are rejected and leave the prototype untouched.
template <typename Scalar>
bool ema_update(PrototypeStore<Scalar>& store, int class_id,
                const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& f_fusion,
                Scalar alpha = Scalar(0.99)) {
  if (!f_fusion.allFinite()) return false;
  if (store.initialized[class_id]) {
    store.vectors.col(class_id) =
        alpha * store.vectors.col(class_id) + (Scalar(1) - alpha) * f_fusion;
  } else {
    store.vectors.col(class_id) = f_fusion;
    store.initialized[class_id] = 1;
  }
  ++store.counts[class_id];
  return true;
}

// Cosine similarity clamped to [0,1] so the reweight map stays a weight.
template <typename Scalar>
Scalar similarity(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& vector,
                  const PrototypeStore<Scalar>& store, int class_id) {
  if (!store.initialized[class_id]) throw Error("cold-prototype", "class has no prototype yet");
  const Scalar na = vector.norm();
  const Scalar nb = store.vectors.col(class_id).norm();
  if (na == Scalar(0) || nb == Scalar(0)) return Scalar(0);
  const Scalar cosine = vector.dot(store.vectors.col(class_id)) / (na * nb);
  return std::min(Scalar(1), std::max(Scalar(0), cosine));
}

// Per label, splats an s_p-scaled Gaussian into the label's class channel,
// using the same integer-cell geometry, size-adaptive sigma, truncation
// radius and per-cell max as the target-heatmap renderer, so W and Y share
// kernel support. Cells under no kernel stay 0.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> build_reweight_map(
    const std::vector<ObjectLabel>& labels, const std::vector<Scalar>& similarities,
    const BevGrid& grid, int classes) {
  if (labels.size() != similarities.size())
    throw Error("shape-mismatch", "one similarity per label required");
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> w =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(classes, grid.cells());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& label = labels[i];
    const auto center = grid.cell_index(label.box.center.x(), label.box.center.y());
    if (!center || label.class_id < 0 || label.class_id >= classes) {
      // augmented rotations push border labels off-grid routinely; warn once
      static bool warned = false;
      if (!warned) {
        warned = true;
        std::cerr << "warning: pseudo-label outside grid skipped in reweight map"
                     " (further occurrences suppressed)\n";
      }
      continue;
    }
    const int cx = *center % grid.resolution;
    const int cy = *center / grid.resolution;
    const double sigma = target_sigma(label.box, grid);
    const int reach = static_cast<int>(std::ceil(3.0 * sigma));
    for (int dy = -reach; dy <= reach; ++dy) {
      const int iy = cy + dy;
      if (iy < 0 || iy >= grid.resolution) continue;
      for (int dx = -reach; dx <= reach; ++dx) {
        const int ix = cx + dx;
        if (ix < 0 || ix >= grid.resolution) continue;
        const Scalar v = static_cast<Scalar>(
            static_cast<double>(similarities[i]) *
            target_kernel(static_cast<double>(dx * dx + dy * dy), sigma));
        auto& cell = w(label.class_id, iy * grid.resolution + ix);
        cell = std::max(cell, v);
      }
    }
  }
  return w;
}

// CLPR prototype snapshot: {magic, version u32, classes u32, dim u32}, then
// per class {initialized u8, count i64, dim float32 values}.
template <typename Scalar>
void save_prototypes(const std::string& path, const PrototypeStore<Scalar>& store) {
  io::AtomicFile file(path);
  auto& out = file.stream();
  out.write("CLPR", 4);
  io::put<std::uint32_t>(out, 1);
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(store.classes()));
  io::put<std::uint32_t>(out, static_cast<std::uint32_t>(store.dim()));
  for (int c = 0; c < store.classes(); ++c) {
    io::put<std::uint8_t>(out, store.initialized[c]);
    io::put<std::int64_t>(out, store.counts[c]);
    for (int j = 0; j < store.dim(); ++j)
      io::put<float>(out, static_cast<float>(store.vectors(j, c)));
  }
  file.commit();
}

template <typename Scalar>
PrototypeStore<Scalar> load_prototypes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io-error", "cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "CLPR")
    throw Error("bad-file", "not a CLPR prototype file: " + path);
  if (io::take<std::uint32_t>(in, path) != 1)
    throw Error("bad-file", "unsupported prototype version in " + path);
  const auto classes = io::take<std::uint32_t>(in, path);
  const auto dim = io::take<std::uint32_t>(in, path);
  PrototypeStore<Scalar> store(static_cast<int>(dim), static_cast<int>(classes));
  for (std::uint32_t c = 0; c < classes; ++c) {
    store.initialized[c] = io::take<std::uint8_t>(in, path);
    store.counts[c] = io::take<std::int64_t>(in, path);
    for (std::uint32_t j = 0; j < dim; ++j)
      store.vectors(j, c) = static_cast<Scalar>(io::take<float>(in, path));
  }
  return store;
}

}  // namespace cl3d
