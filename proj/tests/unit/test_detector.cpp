#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <doctest.h>

#include "cl3d/detector/augment.hpp"
#include "cl3d/detector/checkpoint.hpp"
#include "cl3d/detector/decode.hpp"
#include "cl3d/detector/encode.hpp"
#include "cl3d/detector/loss.hpp"
#include "cl3d/detector/target.hpp"
#include "cl3d/detector/train.hpp"
#include "cl3d/rng.hpp"

using namespace cl3d;

namespace {

PointMatrix no_points() { return PointMatrix(0, 3); }

ObjectLabel label_at(double x, double y, int class_id, double yaw = 0.0,
                     Eigen::Vector2d vel = {0, 0}) {
  ObjectLabel lab;
  lab.class_id = class_id;
  lab.box.center = {x, y, -0.9};
  lab.box.size = {4.6, 1.9, 1.6};
  lab.box.yaw = yaw;
  lab.velocity = vel;
  return lab;
}

TrainSample random_sample(Rng& rng, double extent, int labels) {
  TrainSample s;
  s.current.resize(40, 3);
  s.previous.resize(40, 3);
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 3; ++j) {
      s.current(i, j) = rng.uniform(-extent, extent);
      s.previous(i, j) = rng.uniform(-extent, extent);
    }
  for (int k = 0; k < labels; ++k) {
    auto lab = label_at(rng.uniform(-extent * 0.7, extent * 0.7),
                        rng.uniform(-extent * 0.7, extent * 0.7), static_cast<int>(rng.below(2)),
                        rng.uniform(-kPi, kPi), {rng.uniform(-3, 3), rng.uniform(-3, 3)});
    s.labels.push_back(lab);
  }
  return s;
}

template <typename Scalar>
std::vector<Scalar> flatten(const DetectorParams<Scalar>& p) {
  std::vector<Scalar> out;
  p.visit([&](const char*, const auto& m) {
    out.insert(out.end(), m.data(), m.data() + m.size());
  });
  return out;
}

template <typename Scalar>
bool params_equal(const DetectorParams<Scalar>& a, const DetectorParams<Scalar>& b) {
  return flatten(a) == flatten(b);
}

}  // namespace

TEST_SUITE("detector") {
  TEST_CASE("grid indexing round-trips and rejects out-of-extent points") {
    BevGrid grid(50.0, 128);
    CHECK(grid.cell_size() == doctest::Approx(0.78125));
    CHECK(grid.cells() == 128 * 128);
    const auto idx = grid.cell_index(0.0, 0.0);
    REQUIRE(idx.has_value());
    CHECK(grid.cell_center_x(*idx) == doctest::Approx(0.390625));
    CHECK(std::abs(grid.cell_center_x(*idx)) < grid.cell_size());
    CHECK(grid.cell_index(-50.0, 0.0).has_value());
    CHECK_FALSE(grid.cell_index(50.0, 0.0).has_value());
    CHECK_FALSE(grid.cell_index(0.0, -50.001).has_value());
    // center of every cell maps back to that cell
    for (int c : {0, 77, 128 * 64 + 3, 128 * 128 - 1}) {
      const auto back = grid.cell_index(grid.cell_center_x(c), grid.cell_center_y(c));
      REQUIRE(back.has_value());
      CHECK(*back == c);
    }
    CHECK_THROWS_AS(BevGrid(0.0, 128), Error);
  }

  TEST_CASE("empty scene produces the bias-only response everywhere") {
    DetectorDims dims;
    dims.hidden = 8;
    BevGrid grid(10.0, 16);
    auto p = init_params<double>(dims, 5);
    const auto fwd = encode(no_points(), no_points(), grid, p);
    CHECK(fwd.x.cols() == 0);
    CHECK(fwd.pooled.isZero(0.0));
    CHECK(fwd.f.isZero(0.0));
    CHECK(fwd.m.isZero(0.0));
    for (int c = 0; c < grid.cells(); ++c) {
      CHECK(fwd.heat(0, c) == doctest::Approx(-2.19));
      CHECK(fwd.heat(1, c) == doctest::Approx(-2.19));
    }
    // sigmoid of the heat bias sits near the 0.1 background prior
    CHECK(1.0 / (1.0 + std::exp(2.19)) == doctest::Approx(0.1006).epsilon(0.01));
  }

  TEST_CASE("identical consecutive frames give zero occupancy difference") {
    DetectorDims dims;
    dims.hidden = 8;
    BevGrid grid(10.0, 16);
    auto p = init_params<double>(dims, 6);
    Rng rng(7);
    PointMatrix pts(30, 3);
    for (int i = 0; i < 30; ++i)
      for (int j = 0; j < 3; ++j) pts(i, j) = rng.uniform(-9.0, 9.0);
    const auto fwd = encode(pts, pts, grid, p);
    CHECK(fwd.x.cols() == 60);
    CHECK(fwd.x.row(4).isZero(0.0));
    // first half previous frame (t=0), second half current (t=1)
    CHECK(fwd.x.row(6).head(30).isZero(0.0));
    CHECK((fwd.x.row(6).tail(30).array() == 1.0).all());
  }

  TEST_CASE("a single occupied cell spreads exactly to its 3x3 neighborhood") {
    DetectorDims dims;
    dims.hidden = 8;
    BevGrid grid(10.0, 16);
    auto p = init_params<double>(dims, 8);
    PointMatrix pt(1, 3);
    pt << 1.3, -2.4, 0.5;
    const auto fwd = encode(pt, no_points(), grid, p);
    const int cell = *grid.cell_index(1.3, -2.4);
    int pooled_nonzero = 0, f_nonzero = 0;
    for (int c = 0; c < grid.cells(); ++c) {
      if (!fwd.pooled.col(c).isZero(0.0)) ++pooled_nonzero;
      if (!fwd.f.col(c).isZero(0.0)) ++f_nonzero;
    }
    CHECK(pooled_nonzero == 1);
    CHECK_FALSE(fwd.pooled.col(cell).isZero(0.0));
    CHECK(f_nonzero == 9);
    const int cx = cell % 16, cy = cell / 16;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        CHECK_FALSE(fwd.f.col((cy + dy) * 16 + cx + dx).isZero(0.0));
  }

  TEST_CASE("splat kernel hits 1 at the center and 0.5 at sigma sqrt(2 ln 2)") {
    CHECK(target_kernel(0.0, 1.7) == 1.0);
    const double sigma = 1.7;
    const double d = sigma * std::sqrt(2.0 * std::log(2.0));
    CHECK(target_kernel(d * d, sigma) == doctest::Approx(0.5));
  }

  TEST_CASE("gaussian radius matches the three-case hand computation") {
    // 10x10 cells at overlap 0.7: r1=0.92514, r2=0.81670, r3=0.97614
    CHECK(gaussian_radius(10.0, 10.0, 0.7) == doctest::Approx(0.81670).epsilon(1e-4));
    CHECK(gaussian_radius(20.0, 20.0, 0.7) > gaussian_radius(10.0, 10.0, 0.7));
    CHECK(gaussian_radius(2.0, 5.0, 0.7) > 0.0);
  }

  TEST_CASE("sigma never falls below half a cell") {
    BevGrid grid(50.0, 128);
    Box3D tiny;
    tiny.size = {0.4, 0.3, 0.5};
    CHECK(target_sigma(tiny, grid) == 0.5);
  }

  TEST_CASE("target splat: center cell exactly one, overlaps take the max") {
    BevGrid grid(10.0, 32);
    std::vector<ObjectLabel> labels = {label_at(1.0, 1.0, 0), label_at(2.1, 1.0, 0),
                                       label_at(-6.0, -6.0, 1)};
    const auto t = render_targets<double>(labels, grid, 2);
    CHECK(t.num_pos == 3);
    REQUIRE(t.cells.size() == 3);
    for (const auto& ct : t.cells) CHECK(t.heat(ct.class_id, ct.cell) == 1.0);

    // dense oracle: per cell, max over labels of the truncated kernel
    Eigen::MatrixXd oracle = Eigen::MatrixXd::Zero(2, grid.cells());
    for (const auto& lab : labels) {
      const int center = *grid.cell_index(lab.box.center.x(), lab.box.center.y());
      const int cx = center % 32, cy = center / 32;
      const double sigma = target_sigma(lab.box, grid);
      const int reach = static_cast<int>(std::ceil(3.0 * sigma));
      for (int c = 0; c < grid.cells(); ++c) {
        const int dx = c % 32 - cx, dy = c / 32 - cy;
        if (std::abs(dx) > reach || std::abs(dy) > reach) continue;
        oracle(lab.class_id, c) = std::max(
            oracle(lab.class_id, c), target_kernel(double(dx * dx + dy * dy), sigma));
      }
    }
    CHECK((t.heat - oracle).cwiseAbs().maxCoeff() == 0.0);

    // regression targets recorded at the center cell
    const auto& ct = t.cells[0];
    CHECK(ct.box[0] == doctest::Approx(1.0 - grid.cell_center_x(ct.cell)));
    CHECK(ct.box[2] == doctest::Approx(std::log(1.9)));
    CHECK(ct.box[3] == doctest::Approx(std::log(4.6)));
  }

  TEST_CASE("labels off the grid are skipped and num_pos keeps its floor") {
    BevGrid grid(10.0, 32);
    const auto empty = render_targets<double>({}, grid, 2);
    CHECK(empty.num_pos == 1);
    CHECK(empty.heat.isZero(0.0));
    const auto off = render_targets<double>({label_at(99.0, 0.0, 0)}, grid, 2);
    CHECK(off.cells.empty());
    CHECK(off.num_pos == 1);
  }

  TEST_CASE("exact regression outputs zero the regression loss") {
    DetectorDims dims;
    dims.hidden = 6;
    BevGrid grid(8.0, 8);
    auto p = init_params<double>(dims, 3);
    PointMatrix pts(3, 3);
    pts << 1.0, 1.0, 0.0, -2.0, 3.0, 0.2, 4.0, -4.0, -0.5;
    auto fwd = encode(pts, pts, grid, p);
    std::vector<ObjectLabel> labels = {label_at(1.2, -0.7, 1, 0.4, {1.0, -2.0})};
    const auto targets = render_targets<double>(labels, grid, 2);
    for (const auto& ct : targets.cells) {
      for (int k = 0; k < kBoxDim; ++k) fwd.box(k, ct.cell) = ct.box[k];
      for (int k = 0; k < kMotionDim; ++k) fwd.motion(k, ct.cell) = ct.motion[k];
    }
    const auto terms = detector_loss(fwd, targets, p, grid);
    CHECK(terms.box == 0.0);
    CHECK(terms.motion == 0.0);
    CHECK(terms.cls > 0.0);

    // near-perfect heatmap sits at the loss floor
    fwd.heat.setConstant(-20.0);
    for (const auto& ct : targets.cells) fwd.heat(ct.class_id, ct.cell) = 20.0;
    const auto floor_terms = detector_loss(fwd, targets, p, grid);
    CHECK(floor_terms.cls < 1e-6);
    CHECK(floor_terms.total < 1e-6);
  }

  TEST_CASE("zero reweight map kills classification gradients only") {
    DetectorDims dims;
    dims.hidden = 6;
    BevGrid grid(8.0, 8);
    auto p = init_params<double>(dims, 17);
    Rng rng(99);
    PointMatrix cur(6, 3), prev(6, 3);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 3; ++j) {
        cur(i, j) = rng.uniform(-7.0, 7.0);
        prev(i, j) = rng.uniform(-7.0, 7.0);
      }
    const auto fwd = encode(cur, prev, grid, p);
    const auto targets = render_targets<double>({label_at(2.0, 2.0, 0)}, grid, 2);

    DetectorParams<double> g_plain, g_zero;
    g_plain.set_shapes(dims);
    g_zero.set_shapes(dims);
    detector_loss(fwd, targets, p, grid, {}, &g_plain);
    Eigen::MatrixXd zero_w = Eigen::MatrixXd::Zero(2, grid.cells());
    LossOptions<double> opt;
    opt.reweight = &zero_w;
    HeadGradients<double> hg;
    const auto terms = detector_loss(fwd, targets, p, grid, opt, &g_zero, &hg);
    CHECK(terms.cls == 0.0);
    CHECK(hg.d_heat.isZero(0.0));
    CHECK_FALSE(hg.d_box.isZero(0.0));
    CHECK(g_zero.w_heat.isZero(0.0));
    CHECK(g_zero.b_heat.isZero(0.0));
    // box-head gradients identical to the unweighted run
    CHECK((g_zero.w_box - g_plain.w_box).cwiseAbs().maxCoeff() == 0.0);
    CHECK((g_zero.b_box - g_plain.b_box).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("mismatched reweight shape is rejected") {
    DetectorDims dims;
    dims.hidden = 6;
    BevGrid grid(8.0, 8);
    auto p = init_params<double>(dims, 3);
    const auto fwd = encode(no_points(), no_points(), grid, p);
    const auto targets = render_targets<double>({}, grid, 2);
    Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 7);
    LossOptions<double> opt;
    opt.reweight = &bad;
    try {
      detector_loss(fwd, targets, p, grid, opt);
      FAIL("expected shape-mismatch");
    } catch (const Error& e) {
      CHECK(e.code() == "shape-mismatch");
    }
  }

  TEST_CASE("decode finds the splatted peak and reads the regression maps") {
    DetectorDims dims;
    dims.hidden = 4;
    BevGrid grid(10.0, 16);
    FeatureMaps<double> maps;
    maps.heat = Eigen::MatrixXd::Constant(2, grid.cells(), -10.0);
    maps.box = Eigen::MatrixXd::Zero(kBoxDim, grid.cells());
    maps.motion = Eigen::MatrixXd::Zero(kMotionDim, grid.cells());
    const int cell = *grid.cell_index(3.0, -4.0);
    maps.heat(1, cell) = 2.0;
    maps.box(0, cell) = 0.25;   // dx
    maps.box(1, cell) = -0.125; // dy
    maps.box(2, cell) = std::log(1.9);
    maps.box(3, cell) = std::log(4.6);
    maps.box(4, cell) = std::sin(0.6);
    maps.box(5, cell) = std::cos(0.6);
    maps.motion(0, cell) = 1.5;
    maps.motion(1, cell) = -0.5;

    const auto dets = decode_detections(maps, grid, 0.2);
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].class_id == 1);
    CHECK(dets[0].score == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
    CHECK(dets[0].center.x() == doctest::Approx(grid.cell_center_x(cell) + 0.25));
    CHECK(dets[0].center.y() == doctest::Approx(grid.cell_center_y(cell) - 0.125));
    CHECK(dets[0].size_wl.x() == doctest::Approx(1.9));
    CHECK(dets[0].size_wl.y() == doctest::Approx(4.6));
    CHECK(dets[0].yaw == doctest::Approx(0.6));
    CHECK(dets[0].velocity.x() == doctest::Approx(1.5));
    CHECK(dets[0].velocity.y() == doctest::Approx(-0.5));

    // below the floor nothing fires
    CHECK(decode_detections(maps, grid, 0.9).empty());
  }

  TEST_CASE("3x3 suppression keeps only the larger of two adjacent peaks") {
    BevGrid grid(10.0, 16);
    FeatureMaps<double> maps;
    maps.heat = Eigen::MatrixXd::Constant(2, grid.cells(), -10.0);
    maps.box = Eigen::MatrixXd::Zero(kBoxDim, grid.cells());
    maps.motion = Eigen::MatrixXd::Zero(kMotionDim, grid.cells());
    const int cell = 5 * 16 + 5;
    maps.heat(0, cell) = 2.0;
    maps.heat(0, cell + 1) = 1.5;
    auto dets = decode_detections(maps, grid, 0.2);
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].score == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));

    // two cells apart both survive, ordered class-major then cell
    maps.heat(0, cell + 1) = -10.0;
    maps.heat(0, cell + 2) = 1.5;
    maps.heat(1, 3) = 1.0;
    dets = decode_detections(maps, grid, 0.2);
    REQUIRE(dets.size() == 3);
    CHECK(dets[0].class_id == 0);
    CHECK(dets[1].class_id == 0);
    CHECK(dets[2].class_id == 1);
    CHECK(*grid.cell_index(dets[0].center.x(), dets[0].center.y()) == cell);
    CHECK(*grid.cell_index(dets[1].center.x(), dets[1].center.y()) == cell + 2);
  }

  TEST_CASE("decode recovers rendered targets within one cell") {
    BevGrid grid(50.0, 128);
    std::vector<ObjectLabel> labels = {label_at(10.0, 5.0, 0, 0.3), label_at(-20.0, 14.0, 1, -1.2),
                                       label_at(3.0, -30.0, 0, 2.8)};
    const auto t = render_targets<double>(labels, grid, 2);
    FeatureMaps<double> maps;
    maps.heat.resize(2, grid.cells());
    for (int c = 0; c < 2; ++c)
      for (int cell = 0; cell < grid.cells(); ++cell) {
        const double y = std::min(t.heat(c, cell), 1.0 - 1e-9);
        maps.heat(c, cell) = std::log(y / (1.0 - y));
      }
    maps.box = Eigen::MatrixXd::Zero(kBoxDim, grid.cells());
    maps.motion = Eigen::MatrixXd::Zero(kMotionDim, grid.cells());
    for (const auto& ct : t.cells) {
      for (int k = 0; k < kBoxDim; ++k) maps.box(k, ct.cell) = ct.box[k];
    }
    const auto dets = decode_detections(maps, grid, 0.2);
    REQUIRE(dets.size() == labels.size());
    for (const auto& lab : labels) {
      double best = 1e9;
      for (const auto& d : dets) {
        if (d.class_id != lab.class_id) continue;
        best = std::min(best, (d.center - lab.box.center.head<2>()).norm());
      }
      CHECK(best < grid.cell_size());
    }
  }

  TEST_CASE("flip augmentation leaves the loss unchanged for zero heads") {
    DetectorDims dims;
    dims.hidden = 8;
    BevGrid grid(10.0, 32);
    auto p = init_params<double>(dims, 31);
    p.w_heat.setZero();
    p.b_heat.setZero();
    p.w_box.setZero();
    p.b_box.setZero();
    p.w_motion1.setZero();
    p.b_motion1.setZero();
    p.w_motion2.setZero();
    p.b_motion2.setZero();

    Rng rng(55);
    for (int trial = 0; trial < 5; ++trial) {
      auto s = random_sample(rng, 9.0, 2);
      TrainSample flipped = s;
      flipped.current.col(1) = -flipped.current.col(1);
      flipped.previous.col(1) = -flipped.previous.col(1);
      for (auto& lab : flipped.labels) {
        lab.box.center.y() = -lab.box.center.y();
        lab.box.yaw = wrap_angle(-lab.box.yaw);
        lab.velocity.y() = -lab.velocity.y();
      }
      const auto base = detector_loss(encode(s.current, s.previous, grid, p),
                                      render_targets<double>(s.labels, grid, 2), p, grid);
      const auto flip = detector_loss(encode(flipped.current, flipped.previous, grid, p),
                                      render_targets<double>(flipped.labels, grid, 2), p, grid);
      CHECK(std::abs(base.total - flip.total) < 1e-6);
    }
  }

  TEST_CASE("augmentation keeps points and labels consistent") {
    Rng rng(77);
    auto s = random_sample(rng, 9.0, 2);
    const auto before = s;
    AugmentOptions opt;  // all on
    Rng aug(123);
    apply_augmentation(s, opt, aug);
    CHECK(s.current.rows() == before.current.rows());
    // pairwise distances within a frame survive flip+rotation up to scale
    const double d_before = (before.current.row(0) - before.current.row(1)).norm();
    const double d_after = (s.current.row(0) - s.current.row(1)).norm();
    const double ratio = d_after / d_before;
    CHECK(ratio > 0.94);
    CHECK(ratio < 1.06);
    // label-to-point relative geometry preserved under the same transform
    Eigen::Vector2d rel_before =
        before.current.row(0).head<2>().transpose() - before.labels[0].box.center.head<2>();
    Eigen::Vector2d rel_after =
        s.current.row(0).head<2>().transpose() - s.labels[0].box.center.head<2>();
    CHECK(rel_before.norm() * ratio == doctest::Approx(rel_after.norm()).epsilon(1e-9));
  }

  TEST_CASE("zero learning rate leaves parameters bitwise untouched") {
    DetectorDims dims;
    dims.hidden = 6;
    BevGrid grid(8.0, 8);
    Rng rng(12);
    std::vector<TrainSample> data = {random_sample(rng, 7.0, 1), random_sample(rng, 7.0, 2)};
    auto state = DetectorState<double>::initial(dims, 4);
    const auto before = state.params;
    TrainOptions<double> opt;
    opt.adam.lr = 0.0;
    opt.batch_size = 2;
    train_epoch(state, data, grid, opt, 9);
    CHECK(params_equal(state.params, before));
    CHECK(state.step == 1);
  }

  TEST_CASE("training is bit-identical across reruns with the same seed") {
    DetectorDims dims;
    dims.hidden = 6;
    BevGrid grid(8.0, 8);
    Rng rng(13);
    std::vector<TrainSample> data;
    for (int i = 0; i < 5; ++i) data.push_back(random_sample(rng, 7.0, 2));

    auto run = [&](std::uint64_t epoch_seed) {
      auto state = DetectorState<double>::initial(dims, 21);
      TrainOptions<double> opt;
      for (int e = 0; e < 3; ++e)
        train_epoch(state, data, grid, opt, mix_seed({epoch_seed, (std::uint64_t)e}));
      return state.params;
    };
    const auto a = run(100);
    const auto b = run(100);
    CHECK(params_equal(a, b));
    const auto c = run(101);
    CHECK_FALSE(params_equal(a, c));
  }

  TEST_CASE("an explicit all-ones weight map reproduces the unweighted run bitwise") {
    DetectorDims dims;
    dims.hidden = 6;
    BevGrid grid(8.0, 8);
    Rng rng(14);
    std::vector<TrainSample> data;
    for (int i = 0; i < 4; ++i) data.push_back(random_sample(rng, 7.0, 2));

    auto state_a = DetectorState<double>::initial(dims, 8);
    auto state_b = state_a;
    TrainOptions<double> opt;
    train_epoch(state_a, data, grid, opt, 50);
    WeightFn<double> ones = [&](const TrainSample&, const FeatureMaps<double>&) {
      return Eigen::MatrixXd::Ones(dims.classes, grid.cells()).eval();
    };
    train_epoch(state_b, data, grid, opt, 50, ones);
    CHECK(params_equal(state_a.params, state_b.params));
  }

  TEST_CASE("non-finite loss aborts the epoch") {
    DetectorDims dims;
    dims.hidden = 6;
    BevGrid grid(8.0, 8);
    Rng rng(15);
    std::vector<TrainSample> data = {random_sample(rng, 7.0, 1)};
    auto state = DetectorState<double>::initial(dims, 2);
    state.params.w1(0, 0) = std::numeric_limits<double>::quiet_NaN();
    TrainOptions<double> opt;
    try {
      train_epoch(state, data, grid, opt, 1);
      FAIL("expected non-finite-loss");
    } catch (const Error& e) {
      CHECK(e.code() == "non-finite-loss");
    }
  }

  TEST_CASE("adam step matches the hand-evaluated update formula") {
    DetectorDims dims;
    dims.hidden = 2;
    dims.classes = 1;
    auto state = DetectorState<double>::initial(dims, 1);
    const double p0 = state.params.w1(0, 0);
    DetectorParams<double> g;
    g.set_shapes(dims);
    g.visit([](const char*, auto& m) { m.setConstant(0.37); });
    AdamOptions<double> opt;
    adam_step(state, g, opt);
    // bias-corrected first step: p - lr * g / (|g| + eps)
    const double expect = p0 - 1e-3 * 0.37 / (0.37 + 1e-8);
    CHECK(state.params.w1(0, 0) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(state.step == 1);
  }

  TEST_CASE("a tiny instance is learnable") {
    DetectorDims dims;
    dims.hidden = 8;
    BevGrid grid(10.0, 16);
    Rng rng(44);
    std::vector<TrainSample> data = {random_sample(rng, 9.0, 2)};
    auto state = DetectorState<double>::initial(dims, 77);
    TrainOptions<double> opt;
    opt.augment = false;
    opt.adam.lr = 5e-3;
    const auto first = train_epoch(state, data, grid, opt, 0);
    LossTerms<double> last{};
    for (int e = 1; e < 300; ++e) last = train_epoch(state, data, grid, opt, e);
    CHECK(last.total < 0.5 * first.total);
  }

  TEST_CASE("checkpoints round-trip bitwise and reject foreign files") {
    DetectorDims dims;
    dims.hidden = 6;
    auto p = init_params<float>(dims, 123);
    const auto path = std::string("ckpt_test.clds");
    save_checkpoint(path, p);
    const auto q = load_checkpoint<float>(path);
    CHECK(q.dims == dims);
    CHECK(params_equal(p, q));

    {
      std::ofstream bad("bad_test.clds", std::ios::binary);
      bad << "JUNKJUNKJUNK";
    }
    try {
      load_checkpoint<float>("bad_test.clds");
      FAIL("expected bad-file");
    } catch (const Error& e) {
      CHECK(e.code() == "bad-file");
    }
    CHECK_THROWS_AS(load_checkpoint<float>("missing_test.clds"), Error);
    std::remove(path.c_str());
    std::remove("bad_test.clds");
  }
}
