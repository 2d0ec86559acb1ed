#include "obb/toy_scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "obb/errors.hpp"

namespace obb {
namespace {

constexpr float kBackground = 0.3f;

struct Placed {
  Quad quad;
  int class_id;
  Point center;
  double angle;
  float brightness;
};

float texture(int class_id, double u, double v) {
  // u runs along the long side, v across it, both in pixels from the centre.
  switch (class_id % 3) {
    case 0: return 0.0f;
    case 1: return (static_cast<int>(std::floor(u / 4.0)) & 1) ? 0.15f : -0.15f;
    default:
      return ((static_cast<int>(std::floor(u / 4.0)) + static_cast<int>(std::floor(v / 4.0))) & 1) ? 0.15f : -0.15f;
  }
}

}  // namespace

SyntheticScene generate_scene(CounterRng rng, const SceneConfig& config) {
  if (config.size <= 0 || config.num_classes <= 0 || config.min_objects < 0 ||
      config.max_objects < config.min_objects || !(config.min_short_side >= 8.0) ||
      config.max_short_side < config.min_short_side || config.max_ratio < 1.0) {
    throw InvalidParams("invalid scene configuration");
  }
  SyntheticScene scene;
  scene.width = scene.height = config.size;
  scene.annotations.width = scene.annotations.height = config.size;

  const int target = config.min_objects +
                     static_cast<int>(rng.below(static_cast<std::uint64_t>(config.max_objects - config.min_objects + 1)));
  std::vector<Placed> placed;
  for (int attempt = 0; attempt < 200 && static_cast<int>(placed.size()) < target; ++attempt) {
    const double short_side = rng.uniform(config.min_short_side, config.max_short_side);
    const double long_side = short_side * rng.uniform(1.0, config.max_ratio);
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const Point center{rng.uniform(0.0, config.size), rng.uniform(0.0, config.size)};
    const int class_id = static_cast<int>(rng.below(static_cast<std::uint64_t>(config.num_classes)));
    const float brightness = static_cast<float>(rng.uniform(-0.08, 0.08));
    if (std::hypot(short_side, long_side) > config.max_diagonal) continue;
    const double c = std::cos(angle), s = std::sin(angle);
    Quad::Vertices v;
    const double hx[4] = {-0.5, 0.5, 0.5, -0.5}, hy[4] = {-0.5, -0.5, 0.5, 0.5};
    for (int k = 0; k < 4; ++k) {
      const double lx = hx[k] * long_side, ly = hy[k] * short_side;
      v[k] = {center.x + c * lx - s * ly, center.y + s * lx + c * ly};
    }
    const Quad quad = Quad::canonicalize(v);
    const auto b = bounds(quad);
    if (b[0] < 0 || b[1] < 0 || b[2] > config.size || b[3] > config.size) continue;
    bool overlaps = false;
    for (const Placed& p : placed) overlaps |= intersection_area(p.quad, quad) > 0.0;
    if (overlaps) continue;
    placed.push_back({quad, class_id, center, angle, brightness});
  }

  scene.pixels.assign(static_cast<std::size_t>(config.size) * config.size * 3, kBackground);
  for (const Placed& p : placed) {
    const auto b = bounds(p.quad);
    const double c = std::cos(p.angle), s = std::sin(p.angle);
    for (int y = std::max(0, static_cast<int>(b[1])); y < std::min(config.size, static_cast<int>(b[3]) + 1); ++y) {
      for (int x = std::max(0, static_cast<int>(b[0])); x < std::min(config.size, static_cast<int>(b[2]) + 1); ++x) {
        const Point q{x + 0.5, y + 0.5};
        if (!contains(p.quad, q)) continue;
        const double dx = q.x - p.center.x, dy = q.y - p.center.y;
        const float t = texture(p.class_id, c * dx + s * dy, -s * dx + c * dy);
        for (int ch = 0; ch < 3; ++ch) {
          const float base = ch == p.class_id % 3 ? 0.85f : 0.45f;
          scene.pixels[(static_cast<std::size_t>(y) * config.size + x) * 3 + ch] = base + p.brightness + t;
        }
      }
    }
    scene.annotations.objects.push_back({p.quad, p.class_id, false});
  }
  for (std::size_t i = 0; i < scene.pixels.size(); i += 2) {
    const auto [a, b] = rng.normal_pair();
    scene.pixels[i] += static_cast<float>(config.noise * a);
    if (i + 1 < scene.pixels.size()) scene.pixels[i + 1] += static_cast<float>(config.noise * b);
  }
  return scene;
}

Raster scene_to_raster(const SyntheticScene& scene) {
  Raster r(scene.width, scene.height, 3);
  for (std::size_t i = 0; i < scene.pixels.size(); ++i) {
    r.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(scene.pixels[i] * 255.0f), 0L, 255L));
  }
  return r;
}

FeatureMatrix extract_features(const SyntheticScene& scene, const FeatureConfig& config) {
  if (config.cells <= 0 || !(config.cell_scale > 0)) throw InvalidParams("invalid feature configuration");
  const int w = scene.width, h = scene.height;
  // Integral image per channel, (w+1) x (h+1), of pixel - background.
  std::vector<double> integral(static_cast<std::size_t>(w + 1) * (h + 1) * 3, 0.0);
  auto I = [&](int x, int y, int c) -> double& {
    return integral[(static_cast<std::size_t>(y) * (w + 1) + x) * 3 + c];
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        I(x + 1, y + 1, c) = (scene.at(x, y, c) - kBackground) + I(x, y + 1, c) + I(x + 1, y, c) - I(x, y, c);
      }
    }
  }

  FeatureMatrix out;
  out.cols = feature_width(config);
  for (FpnLevel level : production_levels()) {
    const GridShape g = grid_shape(level, h, w);
    out.rows += g.rows * g.cols;
  }
  out.data.assign(static_cast<std::size_t>(out.rows) * static_cast<std::size_t>(out.cols), 0.0);

  int r = 0;
  for (FpnLevel level : production_levels()) {
    const GridShape g = grid_shape(level, h, w);
    const double cell = config.cell_scale * level.stride();
    const double area = cell * cell;
    for (int gy = 0; gy < g.rows; ++gy) {
      for (int gx = 0; gx < g.cols; ++gx, ++r) {
        const Point p = location_to_image(level, gx, gy);
        const double x0 = p.x - 0.5 * config.cells * cell, y0 = p.y - 0.5 * config.cells * cell;
        double* f = out.row(r);
        for (int cy = 0; cy < config.cells; ++cy) {
          const int ya = std::clamp(static_cast<int>(std::lround(y0 + cy * cell)), 0, h);
          const int yb = std::clamp(static_cast<int>(std::lround(y0 + (cy + 1) * cell)), 0, h);
          for (int cx = 0; cx < config.cells; ++cx) {
            const int xa = std::clamp(static_cast<int>(std::lround(x0 + cx * cell)), 0, w);
            const int xb = std::clamp(static_cast<int>(std::lround(x0 + (cx + 1) * cell)), 0, w);
            for (int c = 0; c < 3; ++c) {
              const double sum = I(xb, yb, c) - I(xa, yb, c) - I(xb, ya, c) + I(xa, ya, c);
              *f++ = 2.0 * sum / area;
            }
          }
        }
      }
    }
  }
  return out;
}

FeatureMatrix stack_rows(std::span<const FeatureMatrix> parts) {
  FeatureMatrix out;
  if (parts.empty()) return out;
  out.cols = parts[0].cols;
  for (const FeatureMatrix& p : parts) {
    if (p.cols != out.cols) throw InvalidParams("feature widths differ");
    out.rows += p.rows;
    out.data.insert(out.data.end(), p.data.begin(), p.data.end());
  }
  return out;
}

}  // namespace obb
