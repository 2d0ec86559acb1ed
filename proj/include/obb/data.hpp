#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "obb/geometry.hpp"
#include "obb/postprocess.hpp"

namespace obb {

/// Ordered list of category names; class ids are indices into it.
class CategoryList {
 public:
  explicit CategoryList(std::vector<std::string> names);

  /// The fifteen DOTA 1.0 categories.
  static CategoryList dota_v1();

  /// Throws UnknownClass.
  int index_of(std::string_view name) const;
  const std::string& name(int id) const;
  int size() const noexcept { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const noexcept { return names_; }

 private:
  std::vector<std::string> names_;
};

struct Annotation {
  Quad quad;
  int class_id = 0;
  bool difficult = false;
};

/// Ground truth for one image. width/height are 0 when unknown.
struct AnnotationSet {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::vector<Annotation> objects;
};

/// Parses DOTA-style text: "x1 y1 x2 y2 x3 y3 x4 y4 class [difficult]" per line.
/// 'imagesource:' and 'gsd:' header lines are skipped; an 'imagesize: W H'
/// header sets the image size. Quads are repaired onto their convex hull and
/// canonicalized. Throws ParseError (with line and column) or UnknownClass.
AnnotationSet parse_annotations(std::string_view text, const CategoryList& categories,
                                std::string image_id = {});

/// Inverse of parse_annotations; the output re-parses to an identical set.
std::string write_annotations(const AnnotationSet& set, const CategoryList& categories);

struct PatchSpec {
  int x = 0;
  int y = 0;
  int size = 1024;
  int overlap = 200;
  /// Extent clipped to the image; smaller than `size` only for small images.
  int width = 0;
  int height = 0;
};

/// Sliding windows advancing by size - overlap; the last window along each
/// axis is shifted back to end on the image border. Row-major order.
std::vector<PatchSpec> split_patches(int image_w, int image_h, int size = 1024, int overlap = 200);

/// Keeps objects whose centroid lies in the patch, translated to patch
/// coordinates without clipping.
AnnotationSet remap_annotations(const AnnotationSet& set, const PatchSpec& patch);

enum class Transform { HFlip, VFlip, Rot90, Rot180, Rot270 };

/// Image-space map for an image of width w and height h. Rot90 sends
/// (x, y) to (y, w - x); the output image is h wide and w tall.
Point transform_point(Transform t, Point p, int w, int h);

/// Applies the transform to every quad and the image size. Throws
/// InvalidImage when the set has no image size.
AnnotationSet augment(Transform t, const AnnotationSet& set);

/// One row of a patch manifest: "image_id x y size".
struct ManifestRecord {
  std::string image_id;
  int x = 0;
  int y = 0;
  int size = 0;
  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

/// Translates each patch's detections back to source-image coordinates and
/// runs per-class rotated NMS over the union. per_patch[i] belongs to patches[i].
std::vector<Detection> merge_patch_detections(std::span<const std::vector<Detection>> per_patch,
                                              std::span<const PatchSpec> patches, double t_nms = 0.1);

std::string patch_id(const std::string& image_id, int size, int x, int y);
std::string write_manifest(std::span<const ManifestRecord> records);
std::vector<ManifestRecord> parse_manifest(std::string_view text);

}  // namespace obb
