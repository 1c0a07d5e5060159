#pragma once

#include <vector>

#include "cl3d/types.hpp"

namespace cl3d {

struct FpsResult {
  std::vector<int> indices;  // length k
  bool padded = false;       // true when fewer than k distinct points existed
};

// Greedy maximin farthest point sampling. Each pick maximizes the minimum
// Euclidean distance to everything already selected; distance ties break to
// the lowest index. When |points| < k the last selected index is repeated.
FpsResult farthest_point_sample(const PointMatrix& points, int k, int start);

// Index of the point nearest to `anchor` (ties to the lowest index); the
// deterministic start rule used for shape sampling.
int nearest_point_index(const PointMatrix& points, const Eigen::Vector3d& anchor);

}  // namespace cl3d
