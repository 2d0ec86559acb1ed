#include "obb/data.hpp"

#include <algorithm>
#include <utility>

#include "obb/errors.hpp"
#include "obb/textio.hpp"

namespace obb {

CategoryList::CategoryList(std::vector<std::string> names) : names_(std::move(names)) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i].empty()) throw InvalidParams("empty category name");
    for (std::size_t j = 0; j < i; ++j) {
      if (names_[i] == names_[j]) throw InvalidParams("duplicate category '" + names_[i] + "'");
    }
  }
}

CategoryList CategoryList::dota_v1() {
  return CategoryList({"plane", "baseball-diamond", "bridge", "ground-track-field", "small-vehicle",
                       "large-vehicle", "ship", "tennis-court", "basketball-court", "storage-tank",
                       "soccer-ball-field", "roundabout", "harbor", "swimming-pool", "helicopter"});
}

int CategoryList::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<int>(i);
  }
  throw UnknownClass("unknown class '" + std::string(name) + "'");
}

const std::string& CategoryList::name(int id) const {
  if (id < 0 || id >= size()) throw UnknownClass("class id " + std::to_string(id) + " out of range");
  return names_[static_cast<std::size_t>(id)];
}

AnnotationSet parse_annotations(std::string_view text, const CategoryList& categories, std::string image_id) {
  AnnotationSet set;
  set.image_id = std::move(image_id);
  const auto lines = split_lines(text);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const std::size_t lineno = li + 1;
    const std::string_view line = lines[li];
    const auto tokens = tokenize(line);
    if (tokens.empty()) continue;
    const std::string_view head = tokens[0].text;
    if (head.starts_with("imagesource:") || head.starts_with("gsd:")) continue;
    if (head == "imagesize:") {
      if (tokens.size() != 3) throw ParseError("imagesize header needs width and height", lineno, tokens[0].column);
      set.width = parse_int(tokens[1], lineno);
      set.height = parse_int(tokens[2], lineno);
      if (set.width <= 0 || set.height <= 0) {
        throw ParseError("image size must be positive", lineno, tokens[1].column);
      }
      continue;
    }
    if (tokens.size() != 9 && tokens.size() != 10) {
      // Still report the first non-numeric coordinate if there is one.
      for (std::size_t i = 0; i < std::min<std::size_t>(8, tokens.size()); ++i) parse_real(tokens[i], lineno);
      throw ParseError("expected 8 coordinates, a class name and an optional difficulty flag, got " +
                           std::to_string(tokens.size()) + " fields",
                       lineno, tokens.back().column);
    }
    Quad::Vertices v;
    for (int i = 0; i < 4; ++i) {
      v[i] = {parse_real(tokens[2 * i], lineno), parse_real(tokens[2 * i + 1], lineno)};
    }
    Annotation ann{Quad::axis_aligned(0, 0, 1, 1), 0, false};
    try {
      ann.quad = Quad::repair(v);
    } catch (const InvalidQuad& e) {
      throw ParseError(std::string("invalid quadrilateral: ") + e.what(), lineno, tokens[0].column);
    }
    ann.class_id = categories.index_of(tokens[8].text);
    if (tokens.size() == 10) {
      const int flag = parse_int(tokens[9], lineno);
      if (flag != 0 && flag != 1) throw ParseError("difficulty flag must be 0 or 1", lineno, tokens[9].column);
      ann.difficult = flag == 1;
    }
    set.objects.push_back(ann);
  }
  return set;
}

std::string write_annotations(const AnnotationSet& set, const CategoryList& categories) {
  std::string out;
  if (set.width > 0 && set.height > 0) {
    out += "imagesize: " + std::to_string(set.width) + " " + std::to_string(set.height) + "\n";
  }
  for (const Annotation& a : set.objects) {
    for (const Point& p : a.quad.vertices()) {
      out += format_real(p.x);
      out += ' ';
      out += format_real(p.y);
      out += ' ';
    }
    out += categories.name(a.class_id);
    out += a.difficult ? " 1\n" : " 0\n";
  }
  return out;
}

namespace {

std::vector<int> window_origins(int extent, int size, int step) {
  std::vector<int> origins;
  for (int o = 0;; o += step) {
    if (o + size >= extent) {
      origins.push_back(std::max(0, extent - size));
      break;
    }
    origins.push_back(o);
  }
  return origins;
}

}  // namespace

std::vector<PatchSpec> split_patches(int image_w, int image_h, int size, int overlap) {
  if (image_w <= 0 || image_h <= 0) throw InvalidImage("image dimensions must be positive");
  if (size <= 0 || overlap < 0 || overlap >= size) throw InvalidParams("patching requires 0 <= overlap < size");
  const int step = size - overlap;
  const auto xs = window_origins(image_w, size, step);
  const auto ys = window_origins(image_h, size, step);
  std::vector<PatchSpec> patches;
  patches.reserve(xs.size() * ys.size());
  for (int y : ys) {
    for (int x : xs) {
      patches.push_back({x, y, size, overlap, std::min(size, image_w - x), std::min(size, image_h - y)});
    }
  }
  return patches;
}

AnnotationSet remap_annotations(const AnnotationSet& set, const PatchSpec& patch) {
  AnnotationSet out;
  out.image_id = patch_id(set.image_id, patch.size, patch.x, patch.y);
  out.width = patch.width > 0 ? patch.width : patch.size;
  out.height = patch.height > 0 ? patch.height : patch.size;
  const Point origin{static_cast<double>(patch.x), static_cast<double>(patch.y)};
  for (const Annotation& a : set.objects) {
    const Point c = a.quad.centroid() - origin;
    if (c.x < 0 || c.y < 0 || c.x >= out.width || c.y >= out.height) continue;
    Quad::Vertices v = a.quad.vertices();
    for (Point& p : v) p = p - origin;
    out.objects.push_back({Quad::canonicalize(v), a.class_id, a.difficult});
  }
  return out;
}

Point transform_point(Transform t, Point p, int w, int h) {
  switch (t) {
    case Transform::HFlip: return {w - p.x, p.y};
    case Transform::VFlip: return {p.x, h - p.y};
    case Transform::Rot90: return {p.y, w - p.x};
    case Transform::Rot180: return {w - p.x, h - p.y};
    case Transform::Rot270: return {h - p.y, p.x};
  }
  return p;
}

AnnotationSet augment(Transform t, const AnnotationSet& set) {
  if (set.width <= 0 || set.height <= 0) throw InvalidImage("augmentation needs the image size");
  AnnotationSet out;
  out.image_id = set.image_id;
  const bool swap = t == Transform::Rot90 || t == Transform::Rot270;
  out.width = swap ? set.height : set.width;
  out.height = swap ? set.width : set.height;
  out.objects.reserve(set.objects.size());
  for (const Annotation& a : set.objects) {
    Quad::Vertices v = a.quad.vertices();
    for (Point& p : v) p = transform_point(t, p, set.width, set.height);
    out.objects.push_back({Quad::canonicalize(v), a.class_id, a.difficult});
  }
  return out;
}

std::vector<Detection> merge_patch_detections(std::span<const std::vector<Detection>> per_patch,
                                              std::span<const PatchSpec> patches, double t_nms) {
  if (per_patch.size() != patches.size()) throw InvalidParams("one detection list per patch is required");
  std::vector<Detection> all;
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const Point origin{static_cast<double>(patches[i].x), static_cast<double>(patches[i].y)};
    for (const Detection& d : per_patch[i]) {
      Quad::Vertices v = d.quad.vertices();
      for (Point& p : v) p = p + origin;
      Detection moved = d;
      moved.quad = Quad::from_ordered(v);
      all.push_back(moved);
    }
  }
  return rotated_nms(all, t_nms);
}

std::string patch_id(const std::string& image_id, int size, int x, int y) {
  return image_id + "__" + std::to_string(size) + "__" + std::to_string(x) + "___" + std::to_string(y);
}

std::string write_manifest(std::span<const ManifestRecord> records) {
  std::string out;
  for (const ManifestRecord& r : records) {
    out += r.image_id + " " + std::to_string(r.x) + " " + std::to_string(r.y) + " " + std::to_string(r.size) + "\n";
  }
  return out;
}

std::vector<ManifestRecord> parse_manifest(std::string_view text) {
  std::vector<ManifestRecord> records;
  const auto lines = split_lines(text);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const auto tokens = tokenize(lines[li]);
    if (tokens.empty()) continue;
    if (tokens.size() != 4) throw ParseError("manifest rows are 'image_id x y size'", li + 1, tokens[0].column);
    ManifestRecord r{std::string(tokens[0].text), parse_int(tokens[1], li + 1), parse_int(tokens[2], li + 1),
                     parse_int(tokens[3], li + 1)};
    if (r.x < 0 || r.y < 0 || r.size <= 0) throw ParseError("invalid patch origin or size", li + 1, tokens[1].column);
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace obb
