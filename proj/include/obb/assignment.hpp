#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "obb/data.hpp"
#include "obb/grid.hpp"

namespace obb {

enum class CenternessFunction { Oriented, AxisAligned };

struct AssignmentConfig {
  double alpha = 4.0;
  CenternessFunction centerness = CenternessFunction::Oriented;
};

/// Training target of one grid location. Background has class_id -1 and no
/// regression, center-ness or center values.
struct LocationTarget {
  int class_id = -1;
  std::optional<RegressionTarget> regression;
  std::optional<double> centerness;
  std::optional<std::array<double, 2>> center_offset;
  int object_index = -1;

  bool positive() const noexcept { return class_id >= 0; }
};

struct LevelTargets {
  FpnLevel level{kMinLevel};
  GridShape shape;
  std::vector<LocationTarget> cells;  // row-major, shape.rows * shape.cols

  const LocationTarget& at(int x, int y) const { return cells[static_cast<std::size_t>(y * shape.cols + x)]; }
  GridLocation location(std::size_t index) const;
};

struct TargetMap {
  std::vector<LevelTargets> levels;  // P3..P7

  std::size_t num_locations() const;
  std::size_t num_positive() const;
};

/// Level from the object's extent m = 2 * max |corner - centroid|:
/// (0,64] P3, (64,128] P4, (128,256] P5, (256,512] P6, above P7.
FpnLevel assign_level(const Quad& quad);

/// Marks every location of a quad's level whose image point is strictly
/// inside the quad as positive for it. Overlaps go to the smaller quad,
/// then to the earlier annotation.
TargetMap assign_locations(const AnnotationSet& annotations, int image_h, int image_w,
                           const AssignmentConfig& config = {});

}  // namespace obb
