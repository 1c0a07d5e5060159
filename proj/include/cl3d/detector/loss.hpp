#pragma once

#include <cmath>
#include <utility>

#include <Eigen/Core>

#include "cl3d/detector/encode.hpp"
#include "cl3d/detector/target.hpp"
#include "cl3d/error.hpp"

namespace cl3d {

template <typename Scalar>
struct LossTerms {
  Scalar total = 0;
  Scalar cls = 0;
  Scalar box = 0;
  Scalar motion = 0;
  Scalar aux = 0;  // auxiliary shape-classifier term, filled by the trainer
};

namespace detail {

template <typename Scalar>
Scalar softplus(Scalar x) {
  return std::max(x, Scalar(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename Scalar>
Scalar smooth_l1(Scalar e) {
  const Scalar a = std::abs(e);
  return a < Scalar(1) ? Scalar(0.5) * e * e : a - Scalar(0.5);
}

template <typename Scalar>
Scalar smooth_l1_grad(Scalar e) {
  if (e > Scalar(1)) return Scalar(1);
  if (e < Scalar(-1)) return Scalar(-1);
  return e;
}

}  // namespace detail

template <typename Scalar>
struct LossOptions {
  bool use_motion = true;
  // Optional classes x cells weight on the classification term. Null means
  // weight 1 everywhere; the multiply still happens so both paths compute
  // bit-identical results.
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>* reweight = nullptr;
};

// Gradients of the loss with respect to the head outputs.
template <typename Scalar>
struct HeadGradients {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Mat d_heat;
  Mat d_box;
  Mat d_motion;
};

// Penalty-reduced focal loss on the heatmap plus smooth-L1 on box (and
// optionally motion) outputs at label cells, normalized by the label count.
// When `grads` is non-null, parameter gradients are accumulated into it;
// `head_grads` (optional) receives the per-output gradients.
template <typename Scalar>
LossTerms<Scalar> detector_loss(const FeatureMaps<Scalar>& fwd, const TrainTargets<Scalar>& targets,
                                const DetectorParams<Scalar>& p, const BevGrid& grid,
                                const LossOptions<Scalar>& opt = {},
                                DetectorParams<Scalar>* grads = nullptr,
                                HeadGradients<Scalar>* head_grads = nullptr) {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const int classes = static_cast<int>(fwd.heat.rows());
  const int cells = static_cast<int>(fwd.heat.cols());
  if (targets.heat.rows() != classes || targets.heat.cols() != cells)
    throw Error("shape-mismatch", "target heatmap does not match detector output");
  if (opt.reweight &&
      (opt.reweight->rows() != classes || opt.reweight->cols() != cells))
    throw Error("shape-mismatch", "reweight map does not match heatmap shape");

  const Scalar inv_npos = Scalar(1) / static_cast<Scalar>(targets.num_pos);
  LossTerms<Scalar> out;
  const bool want_grads = grads != nullptr || head_grads != nullptr;

  Mat d_heat;
  if (want_grads) d_heat.setZero(classes, cells);
  for (int c = 0; c < classes; ++c) {
    for (int cell = 0; cell < cells; ++cell) {
      const Scalar h = fwd.heat(c, cell);
      const Scalar y = targets.heat(c, cell);
      const Scalar w = opt.reweight ? (*opt.reweight)(c, cell) : Scalar(1);
      const Scalar prob = Scalar(1) / (Scalar(1) + std::exp(-h));
      const Scalar log_p = -detail::softplus(-h);
      const Scalar log_1p = -detail::softplus(h);
      const Scalar q = Scalar(1) - prob;
      Scalar term, grad;
      if (y == Scalar(1)) {
        term = -q * q * log_p;
        grad = Scalar(2) * prob * q * q * log_p - q * q * q;
      } else {
        const Scalar damp = std::pow(Scalar(1) - y, Scalar(4));
        term = -damp * prob * prob * log_1p;
        grad = damp * (prob * prob * prob - Scalar(2) * prob * prob * q * log_1p);
      }
      out.cls += w * inv_npos * term;
      if (want_grads) d_heat(c, cell) = w * inv_npos * grad;
    }
  }

  Mat d_box, d_motion;
  if (want_grads) {
    d_box.setZero(fwd.box.rows(), cells);
    d_motion.setZero(fwd.motion.rows(), cells);
  }
  for (const auto& ct : targets.cells) {
    for (int k = 0; k < kBoxDim; ++k) {
      const Scalar e = fwd.box(k, ct.cell) - static_cast<Scalar>(ct.box[k]);
      out.box += inv_npos * detail::smooth_l1(e);
      if (want_grads) d_box(k, ct.cell) += inv_npos * detail::smooth_l1_grad(e);
    }
    if (opt.use_motion) {
      for (int k = 0; k < kMotionDim; ++k) {
        const Scalar e = fwd.motion(k, ct.cell) - static_cast<Scalar>(ct.motion[k]);
        out.motion += inv_npos * detail::smooth_l1(e);
        if (want_grads) d_motion(k, ct.cell) += inv_npos * detail::smooth_l1_grad(e);
      }
    }
  }

  out.total = out.cls + out.box + out.motion;
  if (grads) encode_backward(fwd, p, d_heat, d_box, d_motion, grid, *grads);
  if (head_grads) {
    head_grads->d_heat = std::move(d_heat);
    head_grads->d_box = std::move(d_box);
    head_grads->d_motion = std::move(d_motion);
  }
  return out;
}

}  // namespace cl3d
