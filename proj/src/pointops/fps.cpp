#include "cl3d/pointops/fps.hpp"

#include <limits>

#include "cl3d/error.hpp"

namespace cl3d {

FpsResult farthest_point_sample(const PointMatrix& points, int k, int start) {
  const int n = static_cast<int>(points.rows());
  if (n == 0) throw Error("empty-shape", "farthest_point_sample on empty point set");
  if (k < 1) throw Error("empty-shape", "k must be >= 1");
  if (start < 0 || start >= n) throw Error("empty-shape", "start index out of range");

  FpsResult out;
  out.indices.reserve(k);
  out.indices.push_back(start);

  // min squared distance from each point to the selected set
  Eigen::VectorXd min_d2 =
      (points.rowwise() - points.row(start)).rowwise().squaredNorm();

  const int unique = std::min(k, n);
  for (int step = 1; step < unique; ++step) {
    int best = -1;
    double best_d2 = -1.0;
    for (int i = 0; i < n; ++i) {
      if (min_d2[i] > best_d2) {  // strict: ties keep the lowest index
        best_d2 = min_d2[i];
        best = i;
      }
    }
    out.indices.push_back(best);
    min_d2 = min_d2.cwiseMin(
        (points.rowwise() - points.row(best)).rowwise().squaredNorm());
  }

  if (unique < k) {
    out.padded = true;
    out.indices.resize(k, out.indices.back());
  }
  return out;
}

int nearest_point_index(const PointMatrix& points, const Eigen::Vector3d& anchor) {
  const int n = static_cast<int>(points.rows());
  if (n == 0) throw Error("empty-shape", "nearest_point_index on empty point set");
  int best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double d2 = (points.row(i).transpose() - anchor).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return best;
}

}  // namespace cl3d
