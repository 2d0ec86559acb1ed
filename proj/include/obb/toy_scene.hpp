#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "obb/data.hpp"
#include "obb/grid.hpp"
#include "obb/raster.hpp"
#include "obb/rng.hpp"

namespace obb {

struct SceneConfig {
  int size = 128;
  int min_objects = 1;
  int max_objects = 3;
  double min_short_side = 10.0;
  double max_short_side = 24.0;
  double max_ratio = 5.0;
  double max_diagonal = 100.0;
  int num_classes = 3;
  double noise = 0.05;
};

/// Square RGB image (row-major, interleaved, values roughly in [0, 1]) with
/// non-overlapping rotated rectangles fully inside it.
struct SyntheticScene {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;
  AnnotationSet annotations;

  float at(int x, int y, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
};

/// Deterministic in the generator state. Class c is drawn uniformly; its fill
/// raises channel c and carries a class-specific texture.
SyntheticScene generate_scene(CounterRng rng, const SceneConfig& config = {});

/// Per-channel clamp to [0, 255].
Raster scene_to_raster(const SyntheticScene& scene);

/// The receptive window of a location: cells x cells square cells of side
/// cell_scale * stride, centred on the location, average-pooled per channel.
struct FeatureConfig {
  int cells = 8;
  double cell_scale = 1.5;
};

inline int feature_width(const FeatureConfig& c) { return c.cells * c.cells * 3; }

/// Dense row-major matrix.
struct FeatureMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(cols); }
  const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(cols); }
};

/// One row per grid location of every production level, in the order of
/// assign_locations (levels P3..P7, cells row-major). Pixels outside the
/// image count as zero; values are centred on the background level.
FeatureMatrix extract_features(const SyntheticScene& scene, const FeatureConfig& config = {});

/// Stacks matrices with equal widths.
FeatureMatrix stack_rows(std::span<const FeatureMatrix> parts);

}  // namespace obb
