#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "cl3d/detector/augment.hpp"
#include "cl3d/detector/encode.hpp"
#include "cl3d/detector/loss.hpp"
#include "cl3d/detector/target.hpp"
#include "cl3d/error.hpp"
#include "cl3d/rng.hpp"

namespace cl3d {

template <typename Scalar>
struct AdamOptions {
  Scalar lr = Scalar(1e-3);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);
};

// Bias-corrected adaptive-moment update over all tensors in declared order.
template <typename Scalar>
void adam_step(DetectorState<Scalar>& state, const DetectorParams<Scalar>& grad,
               const AdamOptions<Scalar>& opt) {
  ++state.step;
  const Scalar bc1 = Scalar(1) - std::pow(opt.beta1, static_cast<Scalar>(state.step));
  const Scalar bc2 = Scalar(1) - std::pow(opt.beta2, static_cast<Scalar>(state.step));
  auto ps = state.params.tensors();
  auto ms = state.m.tensors();
  auto vs = state.v.tensors();
  std::vector<const Scalar*> gs;
  grad.visit([&](const char*, const auto& m) { gs.push_back(m.data()); });
  using Arr = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    Eigen::Map<Arr> p(ps[i].data, ps[i].size());
    Eigen::Map<Arr> m(ms[i].data, ms[i].size());
    Eigen::Map<Arr> v(vs[i].data, vs[i].size());
    Eigen::Map<const Arr> g(gs[i], ps[i].size());
    m = opt.beta1 * m + (Scalar(1) - opt.beta1) * g;
    v = opt.beta2 * v + (Scalar(1) - opt.beta2) * g.square();
    p -= opt.lr * (m / bc1) / ((v / bc2).sqrt() + opt.eps);
  }
}

template <typename Scalar>
struct TrainOptions {
  AdamOptions<Scalar> adam;
  int batch_size = 4;
  bool use_motion = true;
  bool augment = true;
  AugmentOptions augment_options;
};

// Per-sample classification weight map (classes x cells); an empty return
// means weight 1 everywhere. Called after the forward pass so the provider
// can read the current feature maps.
template <typename Scalar>
using WeightFn = std::function<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>(
    const TrainSample&, const FeatureMaps<Scalar>&)>;

// Additional loss hooked into the same batch (returns its value, accumulates
// its parameter gradients).
template <typename Scalar>
using AuxLossFn = std::function<Scalar(const TrainSample&, const DetectorParams<Scalar>&,
                                       DetectorParams<Scalar>&)>;

// One pass over the dataset in a seeded shuffled order: per batch, gradients
// of all samples are accumulated in order, averaged, then applied with one
// optimizer step. Returns the per-sample mean of the loss terms.
template <typename Scalar>
LossTerms<Scalar> train_epoch(DetectorState<Scalar>& state, const std::vector<TrainSample>& dataset,
                              const BevGrid& grid, const TrainOptions<Scalar>& opt,
                              std::uint64_t seed, const WeightFn<Scalar>& weight_fn = {},
                              const AuxLossFn<Scalar>& aux_fn = {}) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  LossTerms<Scalar> sums;
  const int n = static_cast<int>(dataset.size());
  if (n == 0) return sums;

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(mix_seed({seed, 0x73687566ULL}));
  for (int i = n - 1; i > 0; --i)
    std::swap(order[i], order[static_cast<int>(shuffle_rng.below(i + 1))]);

  DetectorParams<Scalar> grad;
  grad.set_shapes(state.params.dims);
  for (int start = 0; start < n; start += opt.batch_size) {
    const int batch = std::min(opt.batch_size, n - start);
    grad.set_zero();
    for (int k = 0; k < batch; ++k) {
      const int pos = start + k;
      TrainSample sample = dataset[order[pos]];
      if (opt.augment && opt.augment_options.any()) {
        Rng aug_rng(mix_seed({seed, 0x617567ULL, static_cast<std::uint64_t>(pos)}));
        apply_augmentation(sample, opt.augment_options, aug_rng);
      }
      const auto fwd = encode(sample.current, sample.previous, grid, state.params);
      const auto targets = render_targets<Scalar>(sample.labels, grid, state.params.dims.classes);
      Mat w;
      if (weight_fn) w = weight_fn(sample, fwd);
      LossOptions<Scalar> lo;
      lo.use_motion = opt.use_motion;
      lo.reweight = w.size() ? &w : nullptr;
      auto terms = detector_loss(fwd, targets, state.params, grid, lo, &grad);
      if (aux_fn) terms.aux = aux_fn(sample, state.params, grad);
      if (!std::isfinite(static_cast<double>(terms.total + terms.aux)))
        throw Error("non-finite-loss", "loss diverged during training epoch");
      sums.total += terms.total;
      sums.cls += terms.cls;
      sums.box += terms.box;
      sums.motion += terms.motion;
      sums.aux += terms.aux;
    }
    const Scalar inv = Scalar(1) / static_cast<Scalar>(batch);
    grad.visit([&](const char*, auto& m) { m *= inv; });
    adam_step(state, grad, opt.adam);
  }

  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);
  sums.total *= inv_n;
  sums.cls *= inv_n;
  sums.box *= inv_n;
  sums.motion *= inv_n;
  sums.aux *= inv_n;
  return sums;
}

}  // namespace cl3d
