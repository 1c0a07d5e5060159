#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "cl3d/error.hpp"
#include "cl3d/pointops/boxops.hpp"
#include "cl3d/pointops/fps.hpp"
#include "cl3d/rng.hpp"
#include "cl3d/sim/render.hpp"

using namespace cl3d;

namespace {

// Exhaustive greedy maximin: recomputes every candidate's distance to the
// whole selected set at every step. Ties break to the lowest index.
std::vector<int> fps_oracle(const PointMatrix& points, int k, int start) {
  const int n = static_cast<int>(points.rows());
  std::vector<int> selected{start};
  while (static_cast<int>(selected.size()) < std::min(k, n)) {
    int best = -1;
    double best_d = -1.0;
    for (int i = 0; i < n; ++i) {
      double d = std::numeric_limits<double>::infinity();
      for (int j : selected)
        d = std::min(d, (points.row(i) - points.row(j)).norm());
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    selected.push_back(best);
  }
  while (static_cast<int>(selected.size()) < k) selected.push_back(selected.back());
  return selected;
}

PointMatrix random_points(Rng& rng, int n, double extent = 5.0) {
  PointMatrix pts(n, 3);
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < 3; ++a) pts(i, a) = rng.uniform(-extent, extent);
  return pts;
}

double min_pairwise(const PointMatrix& pts, const std::vector<int>& idx) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a + 1; b < idx.size(); ++b)
      m = std::min(m, (pts.row(idx[a]) - pts.row(idx[b])).norm());
  return m;
}

}  // namespace

TEST_SUITE("pointops") {
  TEST_CASE("unit square: second pick is the opposite corner") {
    PointMatrix pts(4, 3);
    pts << 0, 0, 0, 0, 1, 0, 1, 0, 0, 1, 1, 0;
    const auto r = farthest_point_sample(pts, 2, 0);
    REQUIRE(r.indices.size() == 2);
    CHECK(r.indices[0] == 0);
    CHECK(r.indices[1] == 3);
    CHECK_FALSE(r.padded);
  }

  TEST_CASE("k=1 returns the start point") {
    Rng rng(2);
    const auto pts = random_points(rng, 6);
    const auto r = farthest_point_sample(pts, 1, 4);
    CHECK(r.indices == std::vector<int>{4});
  }

  TEST_CASE("short point sets pad by repeating the last pick") {
    PointMatrix pts(2, 3);
    pts << 0, 0, 0, 1, 0, 0;
    const auto r = farthest_point_sample(pts, 5, 0);
    CHECK(r.padded);
    CHECK(r.indices == std::vector<int>{0, 1, 1, 1, 1});
  }

  TEST_CASE("empty and invalid inputs are rejected") {
    PointMatrix empty(0, 3);
    CHECK_THROWS_AS(farthest_point_sample(empty, 2, 0), Error);
    PointMatrix one(1, 3);
    one << 0, 0, 0;
    CHECK_THROWS_AS(farthest_point_sample(one, 0, 0), Error);
    CHECK_THROWS_AS(farthest_point_sample(one, 2, 5), Error);
  }

  TEST_CASE("matches the exhaustive greedy oracle on random sets") {
    Rng rng(31);
    for (int trial = 0; trial < 80; ++trial) {
      const int n = 1 + static_cast<int>(rng.below(10));
      const int k = 1 + static_cast<int>(rng.below(5));
      const int start = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
      const auto pts = random_points(rng, n);
      CHECK(farthest_point_sample(pts, k, start).indices == fps_oracle(pts, k, start));
    }
  }

  TEST_CASE("tie-break is deterministic on a symmetric grid") {
    // 3x3 grid: several equidistant candidates at each step
    PointMatrix pts(9, 3);
    int r = 0;
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 3; ++x) pts.row(r++) << x, y, 0;
    for (int k = 1; k <= 5; ++k)
      CHECK(farthest_point_sample(pts, k, 0).indices == fps_oracle(pts, k, 0));
  }

  TEST_CASE("spreads at least as well as random subsets on a grid") {
    PointMatrix pts(25, 3);
    int r = 0;
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 5; ++x) pts.row(r++) << x, y, 0;
    const auto fps = farthest_point_sample(pts, 4, 0);
    const double fps_spread = min_pairwise(pts, fps.indices);
    Rng rng(9);
    double worst_random = std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < 100; ++trial) {
      std::set<int> pick;
      while (pick.size() < 4) pick.insert(static_cast<int>(rng.below(25)));
      worst_random =
          std::min(worst_random, min_pairwise(pts, std::vector<int>(pick.begin(), pick.end())));
    }
    CHECK(fps_spread >= worst_random);
  }

  TEST_CASE("nearest_point_index takes the lowest index on ties") {
    PointMatrix pts(3, 3);
    pts << 1, 0, 0, -1, 0, 0, 5, 5, 5;
    CHECK(nearest_point_index(pts, Eigen::Vector3d::Zero()) == 0);
  }

  TEST_CASE("crop boundary is inclusive at size/2 + margin") {
    Box3D box;
    box.center = {10, 5, -1};
    box.size = {4, 2, 1.5};
    box.yaw = 0.0;
    PointMatrix pts(4, 3);
    pts.row(0) << 10, 5, -1;                  // center
    pts.row(1) << 12 + 0.1, 5, -1;            // face + margin exactly
    pts.row(2) << 12 + 0.1 + 1e-6, 5, -1;     // face + margin + eps
    pts.row(3) << 10, 5, -1.76;               // within z half + margin
    const auto idx = crop_indices_in_box(pts, box, 0.1);
    CHECK(idx == std::vector<int>{0, 1, 3});
  }

  TEST_CASE("crop respects yaw") {
    Box3D box;
    box.center = {0, 0, 0};
    box.size = {4, 1, 1};
    box.yaw = kPi / 2;  // long axis along y
    PointMatrix pts(2, 3);
    pts.row(0) << 0, 1.8, 0;  // inside along rotated length
    pts.row(1) << 1.8, 0, 0;  // outside along rotated width
    const auto idx = crop_indices_in_box(pts, box, 0.0);
    CHECK(idx == std::vector<int>{0});
  }

  TEST_CASE("crop recovers exactly the renderer's attribution") {
    WorldState world;
    world.ground_plane_z = -1.7;
    WorldObject a;
    a.id = 3;
    a.class_id = kClassCar;
    a.size = {4.6, 1.9, 1.6};
    a.center = {12, 4, world.ground_plane_z + a.size.z() / 2};
    a.yaw = 0.6;
    WorldObject b = a;
    b.id = 8;
    b.center = {-15, -9, world.ground_plane_z + b.size.z() / 2};
    b.yaw = -1.1;
    world.objects = {a, b};

    DeviceModel device = mechanical32_preset();
    device.range_noise_sigma = 0.0;
    device.dropout_prob = 0.0;
    const auto rendered = render_frame(world, device, 99);
    REQUIRE(rendered.labels.size() == 2);

    for (const auto& obj : world.objects) {
      std::vector<int> attributed;
      for (int i = 0; i < static_cast<int>(rendered.point_object.size()); ++i)
        if (rendered.point_object[i] == obj.id) attributed.push_back(i);
      REQUIRE(attributed.size() > 3);
      Box3D box{obj.center, obj.size, obj.yaw};
      const auto cropped = crop_indices_in_box(rendered.frame.points, box, 1e-9);
      CHECK(cropped == attributed);
    }
  }

  TEST_CASE("normalize_to_self sends the center to the origin") {
    Box3D box;
    box.center = {3, -2, 1};
    box.size = {4, 2, 1.5};
    box.yaw = 0.7;
    PointMatrix pts(1, 3);
    pts.row(0) = box.center.transpose();
    const auto out = normalize_to_self(pts, box);
    CHECK(out.row(0).norm() == doctest::Approx(0.0).epsilon(1e-15));
  }

  TEST_CASE("front-center of a quarter-turned box lands at (l/2, 0, 0)") {
    Box3D box;
    box.center = {5, 7, 0};
    box.size = {4.6, 1.9, 1.6};
    box.yaw = kPi / 2;
    PointMatrix pts(1, 3);
    // front direction is +y in world when yaw = pi/2
    pts.row(0) << box.center.x(), box.center.y() + box.length() / 2, box.center.z();
    const auto out = normalize_to_self(pts, box);
    CHECK(out(0, 0) == doctest::Approx(box.length() / 2).epsilon(1e-12));
    CHECK(out(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(out(0, 2) == doctest::Approx(0.0).epsilon(1e-12));
  }

  TEST_CASE("self-frame round trip is the identity within 1e-9") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
      Box3D box;
      box.center = {rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-2, 2)};
      box.size = {rng.uniform(1, 6), rng.uniform(1, 3), rng.uniform(1, 2)};
      box.yaw = rng.uniform(-kPi, kPi);
      const auto pts = random_points(rng, 12, 20.0);
      const auto back = self_to_lidar(normalize_to_self(pts, box), box);
      CHECK((back - pts).cwiseAbs().maxCoeff() < 1e-9);
    }
  }

  TEST_CASE("normalize_to_self is an isometry") {
    Rng rng(23);
    Box3D box;
    box.center = {4, -9, 0.5};
    box.size = {4, 2, 1.5};
    box.yaw = 2.1;
    const auto pts = random_points(rng, 15, 25.0);
    const auto out = normalize_to_self(pts, box);
    for (int i = 0; i < pts.rows(); ++i)
      for (int j = i + 1; j < pts.rows(); ++j) {
        const double before = (pts.row(i) - pts.row(j)).norm();
        const double after = (out.row(i) - out.row(j)).norm();
        CHECK(std::abs(before - after) < 1e-9);
      }
  }

  TEST_CASE("sample_shape returns K self-frame points") {
    Rng rng(41);
    Box3D box;
    box.center = {10, 0, -0.9};
    box.size = {4.6, 1.9, 1.6};
    box.yaw = 0.3;
    // scatter points inside the box
    PointMatrix pts(40, 3);
    for (int i = 0; i < pts.rows(); ++i) {
      PointMatrix self(1, 3);
      self << rng.uniform(-2, 2), rng.uniform(-0.9, 0.9), rng.uniform(-0.7, 0.7);
      pts.row(i) = self_to_lidar(self, box).row(0);
    }
    const auto sample = sample_shape(pts, box, 16, 0.1, 4);
    CHECK(sample.points.rows() == 16);
    CHECK(sample.source_count == 40);
    CHECK_FALSE(sample.padded);
    // all sampled points lie within the box in self coordinates
    for (int i = 0; i < 16; ++i) {
      CHECK(std::abs(sample.points(i, 0)) <= box.size.x() / 2 + 0.1 + 1e-12);
      CHECK(std::abs(sample.points(i, 1)) <= box.size.y() / 2 + 0.1 + 1e-12);
      CHECK(std::abs(sample.points(i, 2)) <= box.size.z() / 2 + 0.1 + 1e-12);
    }
  }

  TEST_CASE("sample_shape pads sparse boxes and flags it") {
    Box3D box;
    box.size = {4, 2, 1.5};
    PointMatrix pts(5, 3);
    pts << 0, 0, 0, 1, 0.2, 0, -1, -0.3, 0.1, 0.5, 0.5, -0.2, -0.5, 0.1, 0.3;
    const auto sample = sample_shape(pts, box, 16, 0.0, 4);
    CHECK(sample.points.rows() == 16);
    CHECK(sample.padded);
    CHECK(sample.source_count == 5);
  }

  TEST_CASE("sample_shape rejects boxes with too few points") {
    Box3D box;
    box.size = {4, 2, 1.5};
    PointMatrix pts(3, 3);
    pts << 0, 0, 0, 1, 0, 0, 0, 1, 0;
    CHECK_THROWS_AS(sample_shape(pts, box, 16, 0.0, 4), Error);
    try {
      sample_shape(pts, box, 16, 0.0, 4);
    } catch (const Error& e) {
      CHECK(e.code() == "degenerate-shape");
    }
  }
}
