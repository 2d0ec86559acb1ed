#pragma once

#include <array>
#include <utility>

#include "obb/geometry.hpp"

namespace obb {

inline constexpr int kMinLevel = 3;
inline constexpr int kMaxLevel = 7;

/// Pyramid level l with stride 2^l. Production levels are P3..P7; lower
/// levels (down to stride 1) exist only to make hand-checkable fixtures.
class FpnLevel {
 public:
  /// Throws InvalidParams outside [0, 7].
  explicit FpnLevel(int level);

  int level() const noexcept { return level_; }
  int stride() const noexcept { return 1 << level_; }

  friend bool operator==(FpnLevel, FpnLevel) = default;

 private:
  int level_;
};

/// The five production levels P3..P7 in increasing stride order.
std::array<FpnLevel, 5> production_levels();

struct GridShape {
  int rows = 0;
  int cols = 0;
  friend bool operator==(GridShape, GridShape) = default;
};

struct GridLocation {
  FpnLevel level{kMinLevel};
  int x = 0;
  int y = 0;
  Point image_point;
};

/// Stride-normalized corner offsets (x0, y0, ..., x3, y3) relative to a location.
using RegressionTarget = std::array<double, 8>;

/// (ceil(H/s), ceil(W/s)). Throws InvalidImage for non-positive dimensions.
GridShape grid_shape(FpnLevel level, int image_h, int image_w);

/// (ceil(s/2) + x*s, ceil(s/2) + y*s).
Point location_to_image(FpnLevel level, int x, int y);

GridLocation make_location(FpnLevel level, int x, int y);

RegressionTarget encode_target(const Quad& quad, const GridLocation& loc);

/// Inverse of encode_target; keeps vertex order. Throws InvalidQuad when the
/// decoded corners are degenerate or non-convex.
Quad decode_target(const RegressionTarget& t, const GridLocation& loc);

/// Decoded corners without validation, in image coordinates.
Quad::Vertices decode_corners(const RegressionTarget& t, const GridLocation& loc);

}  // namespace obb
