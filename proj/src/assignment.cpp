#include "obb/assignment.hpp"

#include <algorithm>
#include <cmath>

namespace obb {

GridLocation LevelTargets::location(std::size_t index) const {
  const int x = static_cast<int>(index % static_cast<std::size_t>(shape.cols));
  const int y = static_cast<int>(index / static_cast<std::size_t>(shape.cols));
  return make_location(level, x, y);
}

std::size_t TargetMap::num_locations() const {
  std::size_t n = 0;
  for (const auto& l : levels) n += l.cells.size();
  return n;
}

std::size_t TargetMap::num_positive() const {
  std::size_t n = 0;
  for (const auto& l : levels) {
    n += static_cast<std::size_t>(std::count_if(l.cells.begin(), l.cells.end(), [](const LocationTarget& t) { return t.positive(); }));
  }
  return n;
}

FpnLevel assign_level(const Quad& quad) {
  const Point c = quad.centroid();
  double r = 0.0;
  for (const Point& p : quad.vertices()) r = std::max(r, norm(p - c));
  const double m = 2.0 * r;
  if (m <= 64.0) return FpnLevel(3);
  if (m <= 128.0) return FpnLevel(4);
  if (m <= 256.0) return FpnLevel(5);
  if (m <= 512.0) return FpnLevel(6);
  return FpnLevel(7);
}

TargetMap assign_locations(const AnnotationSet& annotations, int image_h, int image_w, const AssignmentConfig& config) {
  TargetMap map;
  for (FpnLevel level : production_levels()) {
    LevelTargets lt;
    lt.level = level;
    lt.shape = grid_shape(level, image_h, image_w);
    lt.cells.resize(static_cast<std::size_t>(lt.shape.rows) * static_cast<std::size_t>(lt.shape.cols));
    map.levels.push_back(std::move(lt));
  }

  const auto& objects = annotations.objects;
  std::vector<double> areas(objects.size());
  for (std::size_t i = 0; i < objects.size(); ++i) areas[i] = area(objects[i].quad);

  for (std::size_t i = 0; i < objects.size(); ++i) {
    const Quad& quad = objects[i].quad;
    const FpnLevel level = assign_level(quad);
    LevelTargets& lt = map.levels[static_cast<std::size_t>(level.level() - kMinLevel)];
    const int s = level.stride();
    const double half = (s + 1) / 2;
    const auto [x0, y0, x1, y1] = bounds(quad);
    const int cx0 = std::max(0, static_cast<int>(std::floor((x0 - half) / s)));
    const int cy0 = std::max(0, static_cast<int>(std::floor((y0 - half) / s)));
    const int cx1 = std::min(lt.shape.cols - 1, static_cast<int>(std::ceil((x1 - half) / s)));
    const int cy1 = std::min(lt.shape.rows - 1, static_cast<int>(std::ceil((y1 - half) / s)));
    for (int y = cy0; y <= cy1; ++y) {
      for (int x = cx0; x <= cx1; ++x) {
        const Point p = location_to_image(level, x, y);
        if (!strictly_contains(quad, p)) continue;
        LocationTarget& cell = lt.cells[static_cast<std::size_t>(y * lt.shape.cols + x)];
        if (cell.object_index >= 0 && areas[static_cast<std::size_t>(cell.object_index)] <= areas[i]) continue;
        cell.object_index = static_cast<int>(i);
      }
    }
  }

  for (LevelTargets& lt : map.levels) {
    const double s = lt.level.stride();
    for (std::size_t idx = 0; idx < lt.cells.size(); ++idx) {
      LocationTarget& cell = lt.cells[idx];
      if (cell.object_index < 0) continue;
      const Annotation& obj = objects[static_cast<std::size_t>(cell.object_index)];
      const GridLocation loc = lt.location(idx);
      cell.class_id = obj.class_id;
      cell.regression = encode_target(obj.quad, loc);
      cell.centerness = config.centerness == CenternessFunction::Oriented
                            ? oriented_centerness(obj.quad, loc.image_point, config.alpha)
                            : aa_centerness(obj.quad, loc.image_point);
      const Point c = obj.quad.centroid();
      cell.center_offset = std::array<double, 2>{(c.x - loc.image_point.x) / s, (c.y - loc.image_point.y) / s};
    }
  }
  return map;
}

}  // namespace obb
