#pragma once

#include <cmath>
#include <optional>

#include "cl3d/error.hpp"

namespace cl3d {

// Square BEV raster over [-extent, extent]^2. Cells are indexed row-major as
// iy * resolution + ix; points outside the extent are dropped, never clamped.
struct BevGrid {
  double extent = 50.0;  // half-width, meters
  int resolution = 128;  // cells per side

  BevGrid() = default;
  BevGrid(double extent_, int resolution_) : extent(extent_), resolution(resolution_) {
    if (extent <= 0.0 || resolution <= 0) throw Error("bad-value", "invalid grid");
  }

  double cell_size() const { return 2.0 * extent / resolution; }
  int cells() const { return resolution * resolution; }

  std::optional<int> cell_index(double x, double y) const {
    const double cs = cell_size();
    const int ix = static_cast<int>(std::floor((x + extent) / cs));
    const int iy = static_cast<int>(std::floor((y + extent) / cs));
    if (ix < 0 || ix >= resolution || iy < 0 || iy >= resolution) return std::nullopt;
    return iy * resolution + ix;
  }

  double cell_center_x(int index) const {
    return -extent + (index % resolution + 0.5) * cell_size();
  }
  double cell_center_y(int index) const {
    return -extent + (index / resolution + 0.5) * cell_size();
  }
};

}  // namespace cl3d
