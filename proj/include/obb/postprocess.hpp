#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "obb/geometry.hpp"

namespace obb {

class CategoryList;

struct Detection {
  Quad quad;
  int class_id = 0;
  double confidence = 0.0;  // p
  double centerness = 1.0;  // o
  double score = 0.0;       // s = sqrt(p * o)
};

/// sqrt(p * o). Throws InvalidProbability outside [0, 1].
double adjust_score(double p, double o);

/// Builds a detection with its score already adjusted.
Detection make_detection(const Quad& quad, int class_id, double p, double o);

/// Drops detections with confidence strictly below t; order is preserved.
std::vector<Detection> filter_threshold(std::span<const Detection> dets, double t = 0.05);

/// The k most confident detections, ordered by (confidence desc, class id,
/// input index).
std::vector<Detection> top_k(std::span<const Detection> dets, std::size_t k = 2000);

/// Greedy per-class suppression ranked by (score desc, confidence desc, class
/// id, input index). A detection is removed when its IoU with an already kept
/// detection of the same class is strictly greater than t_nms. Survivors are
/// returned in ranking order.
std::vector<Detection> rotated_nms(std::span<const Detection> dets, double t_nms = 0.1);

struct PostprocessConfig {
  double confidence_threshold = 0.05;
  std::size_t top_k = 2000;
  double nms_threshold = 0.1;
};

/// threshold -> top-k -> rotated NMS.
std::vector<Detection> postprocess(std::span<const Detection> dets, const PostprocessConfig& config = {});

/// One line of a detection dump:
/// "image_id class p o s x0 y0 x1 y1 x2 y2 x3 y3".
struct DetectionRecord {
  std::string image_id;
  Detection det;
};

std::string write_detections(std::span<const DetectionRecord> records, const CategoryList& categories);

/// Throws ParseError / UnknownClass.
std::vector<DetectionRecord> parse_detections(std::string_view text, const CategoryList& categories);

}  // namespace obb
