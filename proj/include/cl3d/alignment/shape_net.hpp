#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "cl3d/detector/params.hpp"
#include "cl3d/types.hpp"

namespace cl3d {

// Forward record of the object-shape perceptron: per-point 3 -> hidden ->
// hidden (tanh) followed by an elementwise max over the K points.
template <typename Scalar>
struct ShapeForward {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Mat x;                   // 3 x K, box self-frame coordinates
  Mat h1, h2;              // hidden x K
  Vec f_local;             // hidden
  std::vector<int> argmax; // winning point per feature dimension
};

template <typename Scalar>
ShapeForward<Scalar> shape_forward(const PointMatrix& self_points,
                                   const DetectorParams<Scalar>& p) {
  ShapeForward<Scalar> out;
  out.x = self_points.transpose().cast<Scalar>();
  out.h1 = ((p.w_shape1 * out.x).colwise() + p.b_shape1).array().tanh();
  out.h2 = ((p.w_shape2 * out.h1).colwise() + p.b_shape2).array().tanh();
  const int hidden = static_cast<int>(out.h2.rows());
  out.f_local.resize(hidden);
  out.argmax.assign(hidden, 0);
  for (int j = 0; j < hidden; ++j) {
    Eigen::Index col;
    out.f_local(j) = out.h2.row(j).maxCoeff(&col);
    out.argmax[j] = static_cast<int>(col);
  }
  return out;
}

// Routes each feature dimension's gradient to the point that won the max,
// then back through both perceptron layers.
template <typename Scalar>
void shape_backward(const ShapeForward<Scalar>& fwd, const DetectorParams<Scalar>& p,
                    const typename ShapeForward<Scalar>::Vec& d_flocal,
                    DetectorParams<Scalar>& g) {
  using Mat = typename ShapeForward<Scalar>::Mat;
  Mat d_h2 = Mat::Zero(fwd.h2.rows(), fwd.h2.cols());
  for (int j = 0; j < fwd.h2.rows(); ++j) d_h2(j, fwd.argmax[j]) = d_flocal(j);
  d_h2.array() *= 1 - fwd.h2.array().square();
  g.w_shape2.noalias() += d_h2 * fwd.h1.transpose();
  g.b_shape2.noalias() += d_h2.rowwise().sum();
  Mat d_h1 = (p.w_shape2.transpose() * d_h2).array() * (1 - fwd.h1.array().square());
  g.w_shape1.noalias() += d_h1 * fwd.x.transpose();
  g.b_shape1.noalias() += d_h1.rowwise().sum();
}

// Cross-entropy of the auxiliary linear classifier on f_local against the
// object class; trains the shape perceptron during source pretraining.
// `weight` scales loss and gradients alike.
template <typename Scalar>
Scalar shape_class_loss(const ShapeForward<Scalar>& fwd, int class_id,
                        const DetectorParams<Scalar>& p, DetectorParams<Scalar>* g,
                        Scalar weight = Scalar(1)) {
  using Vec = typename ShapeForward<Scalar>::Vec;
  Vec logits = p.w_shape_cls * fwd.f_local + p.b_shape_cls;
  const Scalar zmax = logits.maxCoeff();
  Vec ex = (logits.array() - zmax).exp();
  const Scalar denom = ex.sum();
  const Scalar loss = -(logits(class_id) - zmax - std::log(denom));
  if (g) {
    Vec d_logits = weight * ex / denom;
    d_logits(class_id) -= weight;
    g->w_shape_cls.noalias() += d_logits * fwd.f_local.transpose();
    g->b_shape_cls.noalias() += d_logits;
    shape_backward(fwd, p, Vec(p.w_shape_cls.transpose() * d_logits), *g);
  }
  return weight * loss;
}

}  // namespace cl3d
