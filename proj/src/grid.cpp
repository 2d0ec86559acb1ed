#include "obb/grid.hpp"

#include "obb/errors.hpp"

namespace obb {

FpnLevel::FpnLevel(int level) : level_(level) {
  if (level < 0 || level > kMaxLevel) throw InvalidParams("FPN level must be in [0, 7]");
}

std::array<FpnLevel, 5> production_levels() {
  return {FpnLevel(3), FpnLevel(4), FpnLevel(5), FpnLevel(6), FpnLevel(7)};
}

GridShape grid_shape(FpnLevel level, int image_h, int image_w) {
  if (image_h <= 0 || image_w <= 0) throw InvalidImage("image dimensions must be positive");
  const int s = level.stride();
  return {(image_h + s - 1) / s, (image_w + s - 1) / s};
}

Point location_to_image(FpnLevel level, int x, int y) {
  const int s = level.stride();
  const int half = (s + 1) / 2;
  return {static_cast<double>(half + x * s), static_cast<double>(half + y * s)};
}

GridLocation make_location(FpnLevel level, int x, int y) {
  return {level, x, y, location_to_image(level, x, y)};
}

RegressionTarget encode_target(const Quad& quad, const GridLocation& loc) {
  const double s = loc.level.stride();
  RegressionTarget t{};
  for (int i = 0; i < 4; ++i) {
    t[2 * i] = (quad[i].x - loc.image_point.x) / s;
    t[2 * i + 1] = (quad[i].y - loc.image_point.y) / s;
  }
  return t;
}

Quad::Vertices decode_corners(const RegressionTarget& t, const GridLocation& loc) {
  const double s = loc.level.stride();
  Quad::Vertices v;
  for (int i = 0; i < 4; ++i) {
    v[i] = {loc.image_point.x + s * t[2 * i], loc.image_point.y + s * t[2 * i + 1]};
  }
  return v;
}

Quad decode_target(const RegressionTarget& t, const GridLocation& loc) {
  return Quad::from_ordered(decode_corners(t, loc));
}

}  // namespace obb
