#include "obb/raster.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "obb/errors.hpp"

namespace obb {

Raster::Raster(int w, int h, int c) : width(w), height(h), channels(c) {
  if (w <= 0 || h <= 0 || (c != 1 && c != 3)) throw InvalidImage("raster needs positive size and 1 or 3 channels");
  pixels.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(c), 0);
}

std::string encode_pnm(const Raster& r) {
  std::string out = (r.channels == 1 ? "P5\n" : "P6\n") + std::to_string(r.width) + " " + std::to_string(r.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(r.pixels.data()), r.pixels.size());
  return out;
}

namespace {

struct HeaderScan {
  PnmHeader header;
  std::size_t data_offset = 0;
};

HeaderScan scan_header(std::string_view bytes) {
  std::size_t pos = 0;
  const auto skip = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  const auto number = [&] {
    skip();
    int v = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + (bytes[pos++] - '0');
      ++digits;
      if (v > 1 << 24) throw ParseError("PNM header value too large", 1, pos);
    }
    if (digits == 0) throw ParseError("malformed PNM header", 1, pos + 1);
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw ParseError("only binary PGM (P5) and PPM (P6) are supported", 1, 1);
  }
  pos = 2;
  HeaderScan s;
  s.header.channels = bytes[1] == '5' ? 1 : 3;
  s.header.width = number();
  s.header.height = number();
  const int maxval = number();
  if (maxval != 255) throw ParseError("only maxval 255 is supported", 1, pos);
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw ParseError("malformed PNM header", 1, pos + 1);
  }
  s.data_offset = pos + 1;
  if (s.header.width <= 0 || s.header.height <= 0) throw ParseError("PNM image has no pixels", 1, 1);
  return s;
}

}  // namespace

Raster decode_pnm(std::string_view bytes) {
  const HeaderScan s = scan_header(bytes);
  Raster r(s.header.width, s.header.height, s.header.channels);
  if (bytes.size() - s.data_offset < r.pixels.size()) throw ParseError("PNM pixel data is truncated", 1, 1);
  std::copy_n(reinterpret_cast<const std::uint8_t*>(bytes.data() + s.data_offset), r.pixels.size(), r.pixels.begin());
  return r;
}

PnmHeader read_pnm_header(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string head(512, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  return scan_header(head).header;
}

Raster crop(const Raster& r, int x, int y, int w, int h) {
  if (x < 0 || y < 0 || w <= 0 || h <= 0 || x + w > r.width || y + h > r.height) {
    throw InvalidParams("crop window outside the raster");
  }
  Raster out(w, h, r.channels);
  const std::size_t row = static_cast<std::size_t>(w) * r.channels;
  for (int j = 0; j < h; ++j) {
    const auto* src = r.pixels.data() + (static_cast<std::size_t>(y + j) * r.width + x) * r.channels;
    std::copy_n(src, row, out.pixels.data() + static_cast<std::size_t>(j) * row);
  }
  return out;
}

ValueGrid render_centerness(const Quad& quad, CenternessFunction mode, double alpha, int margin) {
  if (margin < 0) throw InvalidParams("margin must be non-negative");
  const auto [x0, y0, x1, y1] = bounds(quad);
  ValueGrid g;
  g.origin_x = std::floor(x0) - margin;
  g.origin_y = std::floor(y0) - margin;
  g.width = static_cast<int>(std::ceil(x1) + margin - g.origin_x);
  g.height = static_cast<int>(std::ceil(y1) + margin - g.origin_y);
  g.values.assign(static_cast<std::size_t>(g.width) * static_cast<std::size_t>(g.height), 0.0);
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      const Point p = g.pixel_center(x, y);
      double v = 0.0;
      if (mode == CenternessFunction::Oriented) {
        if (contains(quad, p)) v = oriented_centerness(quad, p, alpha);
      } else if (p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1) {
        v = aa_centerness(quad, p);
      }
      g.values[static_cast<std::size_t>(y) * g.width + x] = v;
    }
  }
  return g;
}

Raster to_greymap(const ValueGrid& grid) {
  Raster r(grid.width, grid.height, 1);
  for (std::size_t i = 0; i < grid.values.size(); ++i) {
    r.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(grid.values[i], 0.0, 1.0) * 255.0));
  }
  return r;
}

}  // namespace obb
