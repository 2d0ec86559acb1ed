#include "obb/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "obb/data.hpp"
#include "obb/errors.hpp"
#include "obb/textio.hpp"

namespace obb {

double adjust_score(double p, double o) {
  if (!(p >= 0.0 && p <= 1.0) || !(o >= 0.0 && o <= 1.0)) {
    throw InvalidProbability("confidence and center-ness must lie in [0, 1]");
  }
  return std::sqrt(p * o);
}

Detection make_detection(const Quad& quad, int class_id, double p, double o) {
  return {quad, class_id, p, o, adjust_score(p, o)};
}

std::vector<Detection> filter_threshold(std::span<const Detection> dets, double t) {
  std::vector<Detection> out;
  out.reserve(dets.size());
  for (const Detection& d : dets) {
    if (!(d.confidence < t)) out.push_back(d);
  }
  return out;
}

std::vector<Detection> top_k(std::span<const Detection> dets, std::size_t k) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto before = [&](std::size_t i, std::size_t j) {
    if (dets[i].confidence != dets[j].confidence) return dets[i].confidence > dets[j].confidence;
    if (dets[i].class_id != dets[j].class_id) return dets[i].class_id < dets[j].class_id;
    return i < j;
  };
  const std::size_t n = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(), before);
  std::vector<Detection> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(dets[order[i]]);
  return out;
}

std::vector<Detection> rotated_nms(std::span<const Detection> dets, double t_nms) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    const Detection& a = dets[i];
    const Detection& b = dets[j];
    if (a.score != b.score) return a.score > b.score;
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.class_id != b.class_id) return a.class_id < b.class_id;
    return i < j;
  });

  std::vector<std::array<double, 4>> box(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) box[i] = bounds(dets[i].quad);

  // Kept indices per class; within a class suppression is sequential.
  std::vector<std::vector<std::size_t>> kept_by_class;
  std::vector<char> keep(dets.size(), 0);
  for (std::size_t idx : order) {
    const int cls = dets[idx].class_id;
    if (cls < 0) throw InvalidParams("negative class id in NMS input");
    if (static_cast<std::size_t>(cls) >= kept_by_class.size()) kept_by_class.resize(static_cast<std::size_t>(cls) + 1);
    bool suppressed = false;
    for (std::size_t k : kept_by_class[static_cast<std::size_t>(cls)]) {
      const auto& a = box[k];
      const auto& b = box[idx];
      if (a[2] <= b[0] || b[2] <= a[0] || a[3] <= b[1] || b[3] <= a[1]) continue;
      if (iou(dets[k].quad, dets[idx].quad) > t_nms) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) {
      kept_by_class[static_cast<std::size_t>(cls)].push_back(idx);
      keep[idx] = 1;
    }
  }
  std::vector<Detection> out;
  for (std::size_t idx : order) {
    if (keep[idx]) out.push_back(dets[idx]);
  }
  return out;
}

std::vector<Detection> postprocess(std::span<const Detection> dets, const PostprocessConfig& config) {
  const auto kept = filter_threshold(dets, config.confidence_threshold);
  const auto best = top_k(kept, config.top_k);
  return rotated_nms(best, config.nms_threshold);
}

std::string write_detections(std::span<const DetectionRecord> records, const CategoryList& categories) {
  std::string out;
  for (const DetectionRecord& r : records) {
    out += r.image_id;
    out += ' ';
    out += categories.name(r.det.class_id);
    for (double v : {r.det.confidence, r.det.centerness, r.det.score}) {
      out += ' ';
      out += format_real(v);
    }
    for (const Point& p : r.det.quad.vertices()) {
      out += ' ';
      out += format_real(p.x);
      out += ' ';
      out += format_real(p.y);
    }
    out += '\n';
  }
  return out;
}

std::vector<DetectionRecord> parse_detections(std::string_view text, const CategoryList& categories) {
  std::vector<DetectionRecord> records;
  const auto lines = split_lines(text);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const std::size_t lineno = li + 1;
    const auto tokens = tokenize(lines[li]);
    if (tokens.empty()) continue;
    if (tokens.size() != 13) {
      throw ParseError("detection rows have 13 fields, got " + std::to_string(tokens.size()), lineno,
                       tokens.back().column);
    }
    DetectionRecord r{std::string(tokens[0].text), Detection{Quad::axis_aligned(0, 0, 1, 1)}};
    r.det.class_id = categories.index_of(tokens[1].text);
    r.det.confidence = parse_real(tokens[2], lineno);
    r.det.centerness = parse_real(tokens[3], lineno);
    r.det.score = parse_real(tokens[4], lineno);
    for (int k = 2; k <= 4; ++k) {
      const double v = parse_real(tokens[static_cast<std::size_t>(k)], lineno);
      if (v < 0.0 || v > 1.0) throw ParseError("probability outside [0, 1]", lineno, tokens[static_cast<std::size_t>(k)].column);
    }
    Quad::Vertices v;
    for (int i = 0; i < 4; ++i) {
      v[i] = {parse_real(tokens[5 + 2 * i], lineno), parse_real(tokens[6 + 2 * i], lineno)};
    }
    try {
      r.det.quad = Quad::from_ordered(v);
    } catch (const InvalidQuad& e) {
      throw ParseError(std::string("invalid quadrilateral: ") + e.what(), lineno, tokens[5].column);
    }
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace obb
