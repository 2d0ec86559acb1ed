#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "obb/assignment.hpp"
#include "obb/geometry.hpp"

namespace obb {

/// 8-bit interleaved raster (1 channel = greymap, 3 = RGB).
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;

  Raster() = default;
  Raster(int width, int height, int channels);
  std::uint8_t& at(int x, int y, int c = 0) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c = 0) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

struct PnmHeader {
  int width = 0;
  int height = 0;
  int channels = 0;
};

/// Binary P5/P6 with maxval 255. Throws ParseError on malformed input.
std::string encode_pnm(const Raster& raster);
Raster decode_pnm(std::string_view bytes);
PnmHeader read_pnm_header(const std::string& path);

/// Sub-image; the window must lie inside the raster.
Raster crop(const Raster& raster, int x, int y, int width, int height);

/// Real-valued grid sampled at pixel centres of a canvas.
struct ValueGrid {
  int width = 0;
  int height = 0;
  double origin_x = 0.0;  // image coordinate of the canvas' left edge
  double origin_y = 0.0;
  std::vector<double> values;  // row-major

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  Point pixel_center(int x, int y) const { return {origin_x + x + 0.5, origin_y + y + 0.5}; }
};

/// Center-ness of every pixel centre on a canvas covering the quad's
/// axis-aligned hull plus `margin` pixels. Oriented mode is 0 outside the
/// quad; axis-aligned mode is evaluated on the hull and is 0 outside it.
ValueGrid render_centerness(const Quad& quad, CenternessFunction mode, double alpha, int margin = 1);

/// Linear map of [0, 1] to grey levels.
Raster to_greymap(const ValueGrid& grid);

}  // namespace obb
