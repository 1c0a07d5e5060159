#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "cl3d/detector/grid.hpp"
#include "cl3d/detector/params.hpp"
#include "cl3d/types.hpp"

namespace cl3d {

// Full forward record: every activation the backward pass needs. N counts
// the in-extent points of both frames (previous frame first).
template <typename Scalar>
struct FeatureMaps {
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Mat x;                        // 7 x N point features
  Mat h1, h2;                   // hidden x N perceptron activations
  std::vector<int> point_cell;  // N
  std::vector<int> cell_count;  // cells
  Mat pooled;                   // hidden x cells, per-cell mean of h2
  Mat f_pre, f;                 // backbone map (pre/post tanh)
  Mat m_pre, m;                 // motion hidden map M (pre/post tanh)
  Mat heat;                     // classes x cells, logits
  Mat box;                      // 6 x cells
  Mat motion;                   // 2 x cells
};

namespace detail {

// Iterates the valid column spans of a 3x3 tap: output cells (ix,iy) whose
// source (ix+dx, iy+dy) stays on the grid. Row-major cells make each span
// contiguous in x.
template <typename F>
void conv_spans(int res, int tap, F&& body) {
  const int dy = tap / 3 - 1;
  const int dx = tap % 3 - 1;
  const int x_dst = std::max(0, -dx);
  const int x_src = std::max(0, dx);
  const int len = res - std::abs(dx);
  for (int iy = std::max(0, -dy); iy < res - std::max(0, dy); ++iy)
    body(iy * res + x_dst, (iy + dy) * res + x_src, len);
}

}  // namespace detail

template <typename Scalar>
FeatureMaps<Scalar> encode(const PointMatrix& current, const PointMatrix& previous,
                           const BevGrid& grid, const DetectorParams<Scalar>& p) {
  using Mat = typename FeatureMaps<Scalar>::Mat;
  const int cells = grid.cells();
  const int hidden = p.dims.hidden;

  struct Entry {
    int cell;
    double x, y, z;
    Scalar t;
  };
  std::vector<Entry> entries;
  entries.reserve(previous.rows() + current.rows());
  std::vector<std::uint8_t> occ_prev(cells, 0), occ_cur(cells, 0);

  const PointMatrix* frames[2] = {&previous, &current};
  std::vector<std::uint8_t>* occs[2] = {&occ_prev, &occ_cur};
  for (int f = 0; f < 2; ++f) {
    const auto& pts = *frames[f];
    for (int i = 0; i < pts.rows(); ++i) {
      const auto cell = grid.cell_index(pts(i, 0), pts(i, 1));
      if (!cell) continue;
      (*occs[f])[*cell] = 1;
      entries.push_back({*cell, pts(i, 0), pts(i, 1), pts(i, 2), static_cast<Scalar>(f)});
    }
  }

  FeatureMaps<Scalar> out;
  const int n = static_cast<int>(entries.size());
  out.x.resize(kPointFeatureDim, n);
  out.point_cell.resize(n);
  out.cell_count.assign(cells, 0);
  for (int i = 0; i < n; ++i) {
    const auto& e = entries[i];
    out.point_cell[i] = e.cell;
    ++out.cell_count[e.cell];
    out.x(0, i) = static_cast<Scalar>(e.x - grid.cell_center_x(e.cell));
    out.x(1, i) = static_cast<Scalar>(e.y - grid.cell_center_y(e.cell));
    out.x(2, i) = static_cast<Scalar>(e.z);
    out.x(3, i) = static_cast<Scalar>(std::sqrt(e.x * e.x + e.y * e.y));
    out.x(4, i) = static_cast<Scalar>(static_cast<int>(occ_cur[e.cell]) -
                                      static_cast<int>(occ_prev[e.cell]));
    out.x(5, i) = Scalar(1);
    out.x(6, i) = e.t;
  }

  out.h1 = ((p.w1 * out.x).colwise() + p.b1).array().tanh();
  out.h2 = ((p.w2 * out.h1).colwise() + p.b2).array().tanh();

  out.pooled.setZero(hidden, cells);
  for (int i = 0; i < n; ++i) out.pooled.col(out.point_cell[i]) += out.h2.col(i);
  for (int c = 0; c < cells; ++c)
    if (out.cell_count[c] > 1) out.pooled.col(c) /= static_cast<Scalar>(out.cell_count[c]);

  out.f_pre = Mat::Zero(hidden, cells);
  out.f_pre.colwise() += p.bconv;
  for (int tap = 0; tap < 9; ++tap)
    detail::conv_spans(grid.resolution, tap, [&](int dst, int src, int len) {
      out.f_pre.middleCols(dst, len).noalias() += p.conv[tap] * out.pooled.middleCols(src, len);
    });
  out.f = out.f_pre.array().tanh();

  out.heat = (p.w_heat * out.f).colwise() + p.b_heat;
  out.box = (p.w_box * out.f).colwise() + p.b_box;
  out.m_pre = (p.w_motion1 * out.f).colwise() + p.b_motion1;
  out.m = out.m_pre.array().tanh();
  out.motion = (p.w_motion2 * out.m).colwise() + p.b_motion2;
  return out;
}

// Backpropagates head-output gradients through the whole stack, accumulating
// parameter gradients into `g` (which must already have the right shapes).
template <typename Scalar>
void encode_backward(const FeatureMaps<Scalar>& fwd, const DetectorParams<Scalar>& p,
                     const typename FeatureMaps<Scalar>::Mat& d_heat,
                     const typename FeatureMaps<Scalar>::Mat& d_box,
                     const typename FeatureMaps<Scalar>::Mat& d_motion, const BevGrid& grid,
                     DetectorParams<Scalar>& g) {
  using Mat = typename FeatureMaps<Scalar>::Mat;

  g.w_heat.noalias() += d_heat * fwd.f.transpose();
  g.b_heat.noalias() += d_heat.rowwise().sum();
  g.w_box.noalias() += d_box * fwd.f.transpose();
  g.b_box.noalias() += d_box.rowwise().sum();
  g.w_motion2.noalias() += d_motion * fwd.m.transpose();
  g.b_motion2.noalias() += d_motion.rowwise().sum();

  Mat d_m_pre = (p.w_motion2.transpose() * d_motion).array() * (1 - fwd.m.array().square());
  g.w_motion1.noalias() += d_m_pre * fwd.f.transpose();
  g.b_motion1.noalias() += d_m_pre.rowwise().sum();

  Mat d_f = p.w_heat.transpose() * d_heat;
  d_f.noalias() += p.w_box.transpose() * d_box;
  d_f.noalias() += p.w_motion1.transpose() * d_m_pre;

  Mat d_f_pre = d_f.array() * (1 - fwd.f.array().square());
  g.bconv.noalias() += d_f_pre.rowwise().sum();

  Mat d_pooled = Mat::Zero(fwd.pooled.rows(), fwd.pooled.cols());
  for (int tap = 0; tap < 9; ++tap)
    detail::conv_spans(grid.resolution, tap, [&](int dst, int src, int len) {
      g.conv[tap].noalias() +=
          d_f_pre.middleCols(dst, len) * fwd.pooled.middleCols(src, len).transpose();
      d_pooled.middleCols(src, len).noalias() +=
          p.conv[tap].transpose() * d_f_pre.middleCols(dst, len);
    });

  const int n = static_cast<int>(fwd.point_cell.size());
  if (n == 0) return;
  Mat d_h2(fwd.h2.rows(), n);
  for (int i = 0; i < n; ++i) {
    const int cell = fwd.point_cell[i];
    d_h2.col(i) = d_pooled.col(cell) / static_cast<Scalar>(fwd.cell_count[cell]);
  }
  d_h2.array() *= 1 - fwd.h2.array().square();
  g.w2.noalias() += d_h2 * fwd.h1.transpose();
  g.b2.noalias() += d_h2.rowwise().sum();

  Mat d_h1 = (p.w2.transpose() * d_h2).array() * (1 - fwd.h1.array().square());
  g.w1.noalias() += d_h1 * fwd.x.transpose();
  g.b1.noalias() += d_h1.rowwise().sum();
}

}  // namespace cl3d
