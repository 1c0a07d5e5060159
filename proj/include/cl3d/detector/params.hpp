#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "cl3d/error.hpp"
#include "cl3d/rng.hpp"

namespace cl3d {

// Fixed architecture widths that are not free parameters.
constexpr int kPointFeatureDim = 7;  // [x-cx, y-cy, z, r, d_occ, 1, t]
constexpr int kShapeInputDim = 3;    // self-frame xyz
constexpr int kBoxDim = 6;           // [dx, dy, log w, log l, sin yaw, cos yaw]
constexpr int kMotionDim = 2;        // [vx, vy]

struct DetectorDims {
  int hidden = 32;
  int classes = 2;

  bool operator==(const DetectorDims&) const = default;
};

template <typename Scalar>
struct DetectorParams {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  DetectorDims dims;

  // per-point encoder, 7 -> hidden -> hidden, tanh
  Mat w1;
  Vec b1;
  Mat w2;
  Vec b2;
  // 3x3 backbone convolution as 9 taps, row-major over (dy, dx) in {-1,0,1}
  std::array<Mat, 9> conv;
  Vec bconv;
  // 1x1 heads on the backbone map
  Mat w_heat;
  Vec b_heat;
  Mat w_box;
  Vec b_box;
  Mat w_motion1;  // motion hidden layer; its tanh output is the motion map M
  Vec b_motion1;
  Mat w_motion2;
  Vec b_motion2;
  // object shape perceptron, 3 -> hidden -> hidden, tanh, max-pooled over K
  // points, plus the auxiliary class head that trains it on source labels
  Mat w_shape1;
  Vec b_shape1;
  Mat w_shape2;
  Vec b_shape2;
  Mat w_shape_cls;
  Vec b_shape_cls;

  // Declared order: checkpoint layout, optimizer traversal and the
  // finite-difference enumeration all follow this sequence.
  template <typename F>
  void visit(F&& f) {
    f("w1", w1);
    f("b1", b1);
    f("w2", w2);
    f("b2", b2);
    for (int t = 0; t < 9; ++t) f(tap_name(t), conv[t]);
    f("bconv", bconv);
    f("w_heat", w_heat);
    f("b_heat", b_heat);
    f("w_box", w_box);
    f("b_box", b_box);
    f("w_motion1", w_motion1);
    f("b_motion1", b_motion1);
    f("w_motion2", w_motion2);
    f("b_motion2", b_motion2);
    f("w_shape1", w_shape1);
    f("b_shape1", b_shape1);
    f("w_shape2", w_shape2);
    f("b_shape2", b_shape2);
    f("w_shape_cls", w_shape_cls);
    f("b_shape_cls", b_shape_cls);
  }

  template <typename F>
  void visit(F&& f) const {
    const_cast<DetectorParams*>(this)->visit(
        [&](const char* name, const auto& m) { f(name, m); });
  }

  static const char* tap_name(int t) {
    static const char* names[9] = {"conv0", "conv1", "conv2", "conv3", "conv4",
                                   "conv5", "conv6", "conv7", "conv8"};
    return names[t];
  }

  void set_shapes(const DetectorDims& d) {
    dims = d;
    const int h = d.hidden;
    w1.setZero(h, kPointFeatureDim);
    b1.setZero(h);
    w2.setZero(h, h);
    b2.setZero(h);
    for (auto& m : conv) m.setZero(h, h);
    bconv.setZero(h);
    w_heat.setZero(d.classes, h);
    b_heat.setZero(d.classes);
    w_box.setZero(kBoxDim, h);
    b_box.setZero(kBoxDim);
    w_motion1.setZero(h, h);
    b_motion1.setZero(h);
    w_motion2.setZero(kMotionDim, h);
    b_motion2.setZero(kMotionDim);
    w_shape1.setZero(h, kShapeInputDim);
    b_shape1.setZero(h);
    w_shape2.setZero(h, h);
    b_shape2.setZero(h);
    w_shape_cls.setZero(d.classes, h);
    b_shape_cls.setZero(d.classes);
  }

  // Flat view over all tensors in declared order.
  struct TensorRef {
    const char* name;
    Scalar* data;
    Eigen::Index rows;
    Eigen::Index cols;
    Eigen::Index size() const { return rows * cols; }
  };

  std::vector<TensorRef> tensors() {
    std::vector<TensorRef> out;
    visit([&](const char* name, auto& m) {
      out.push_back(TensorRef{name, m.data(), m.rows(), m.cols()});
    });
    return out;
  }

  Eigen::Index total_size() const {
    Eigen::Index n = 0;
    visit([&](const char*, const auto& m) { n += m.size(); });
    return n;
  }

  void set_zero() {
    visit([](const char*, auto& m) { m.setZero(); });
  }
};

// Uniform(+-sqrt(1/fan_in)) weights, zero biases; the heatmap bias starts at
// -2.19 so the initial sigmoid sits near the 0.1 background prior.
template <typename Scalar>
DetectorParams<Scalar> init_params(const DetectorDims& dims, std::uint64_t seed) {
  DetectorParams<Scalar> p;
  p.set_shapes(dims);
  Rng rng(mix_seed({seed, 0x706172ULL}));
  p.visit([&](const char* name, auto& m) {
    if (m.cols() == 1) return;  // biases stay zero
    const double bound = std::sqrt(1.0 / static_cast<double>(m.cols()));
    for (int c = 0; c < m.cols(); ++c)
      for (int r = 0; r < m.rows(); ++r)
        m(r, c) = static_cast<Scalar>(rng.uniform(-bound, bound));
  });
  p.b_heat.setConstant(static_cast<Scalar>(-2.19));
  return p;
}

// Optimizer state: first/second moment estimates in parameter shape.
template <typename Scalar>
struct DetectorState {
  DetectorParams<Scalar> params;
  DetectorParams<Scalar> m;
  DetectorParams<Scalar> v;
  std::int64_t step = 0;

  static DetectorState initial(const DetectorDims& dims, std::uint64_t seed) {
    DetectorState s;
    s.params = init_params<Scalar>(dims, seed);
    s.m.set_shapes(dims);
    s.v.set_shapes(dims);
    return s;
  }
};

}  // namespace cl3d
