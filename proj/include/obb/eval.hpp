#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "obb/data.hpp"
#include "obb/postprocess.hpp"

namespace obb {

enum class MatchFlag : std::uint8_t { TruePositive, FalsePositive, Ignored };

/// Greedy matching of one image's detections against its ground truth.
struct MatchResult {
  std::vector<MatchFlag> flags;  // per detection, in input order
  std::vector<double> ious;      // IoU with the matched (or best candidate) GT, 0 if none
  std::vector<int> matched_gt;   // GT index for true positives, else -1
  std::vector<bool> gt_matched;  // per GT

  std::size_t true_positives() const;
};

/// Detections must be sorted by score, highest first. Each detection takes the
/// highest-IoU same-class GT that is not yet matched (difficult GTs stay
/// available); IoU >= iou_thresh with a non-difficult GT makes a true
/// positive, with a difficult GT the detection is ignored.
MatchResult match_detections(std::span<const Detection> dets, std::span<const Annotation> gts,
                             double iou_thresh = 0.5);

/// VOC07 11-point interpolated AP. `tp` holds the ranked detections' outcomes
/// (true = true positive). No GT and no detections gives 1; no GT with
/// detections gives 0.
double average_precision(std::span<const bool> tp, std::size_t n_gt);

double mean_ap(std::span<const double> aps);

/// Counts over [0,1]^2 of (confidence, IoU). Row 0 is the lowest confidence.
struct HeatmapGrid {
  int confidence_bins = 50;
  int iou_bins = 50;
  std::vector<std::uint64_t> counts;

  HeatmapGrid(int confidence_bins = 50, int iou_bins = 50);
  void add(double confidence, double iou);
  std::uint64_t at(int confidence_bin, int iou_bin) const;
  std::uint64_t total() const;
};

/// One true positive, kept for heatmaps.
struct TruePositive {
  int class_id = 0;
  double confidence = 0.0;
  double iou = 0.0;
};

/// Per-class, multi-image accumulator.
class Evaluator {
 public:
  explicit Evaluator(int num_classes, double iou_thresh = 0.5);

  /// Detections of one image in any order; they are ranked by score here.
  void add_image(std::span<const Detection> dets, std::span<const Annotation> gts);

  int num_classes() const noexcept { return num_classes_; }
  std::size_t num_gt(int class_id) const;
  std::size_t num_detections(int class_id) const;

  /// AP of one class over every image added so far.
  double class_ap(int class_id) const;

  /// Classes that have ground truth or detections.
  std::vector<int> evaluated_classes() const;

  /// Mean AP over evaluated_classes() (0 when there are none).
  double map() const;

  const std::vector<TruePositive>& true_positives() const noexcept { return tps_; }

 private:
  struct Ranked {
    double score;
    std::size_t order;
    bool tp;
  };
  int num_classes_;
  double iou_thresh_;
  std::size_t next_order_ = 0;
  std::vector<std::vector<Ranked>> ranked_;
  std::vector<std::size_t> n_gt_;
  std::vector<TruePositive> tps_;
};

/// Bins raw confidences p against IoU for every true positive.
HeatmapGrid collect_heatmap(std::span<const TruePositive> tps, int confidence_bins = 50, int iou_bins = 50);

/// One grid per class id present among the true positives.
std::map<int, HeatmapGrid> collect_class_heatmaps(std::span<const TruePositive> tps, int confidence_bins = 50,
                                                  int iou_bins = 50);

/// Whitespace-separated counts, highest confidence row first.
std::string heatmap_to_text(const HeatmapGrid& grid);

/// Binary greymap (P5), highest confidence at the top, scaled to the peak count.
std::string heatmap_to_pgm(const HeatmapGrid& grid);

/// "class,ap" rows followed by "mAP,value".
std::string ap_table_csv(const Evaluator& evaluator, const CategoryList& categories);

}  // namespace obb
