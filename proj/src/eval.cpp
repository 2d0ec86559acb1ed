#include "obb/eval.hpp"

#include <algorithm>
#include <memory>
#include <numeric>

#include "obb/errors.hpp"
#include "obb/textio.hpp"

namespace obb {

std::size_t MatchResult::true_positives() const {
  return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), MatchFlag::TruePositive));
}

MatchResult match_detections(std::span<const Detection> dets, std::span<const Annotation> gts, double iou_thresh) {
  MatchResult r;
  r.flags.assign(dets.size(), MatchFlag::FalsePositive);
  r.ious.assign(dets.size(), 0.0);
  r.matched_gt.assign(dets.size(), -1);
  r.gt_matched.assign(gts.size(), false);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    double best = -1.0;
    int best_gt = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gts[g].class_id != dets[i].class_id) continue;
      if (r.gt_matched[g] && !gts[g].difficult) continue;
      const double v = iou(dets[i].quad, gts[g].quad);
      if (v > best) {
        best = v;
        best_gt = static_cast<int>(g);
      }
    }
    if (best_gt < 0) continue;
    r.ious[i] = best;
    if (best < iou_thresh) continue;
    if (gts[static_cast<std::size_t>(best_gt)].difficult) {
      r.flags[i] = MatchFlag::Ignored;
      continue;
    }
    r.flags[i] = MatchFlag::TruePositive;
    r.matched_gt[i] = best_gt;
    r.gt_matched[static_cast<std::size_t>(best_gt)] = true;
  }
  return r;
}

double average_precision(std::span<const bool> tp, std::size_t n_gt) {
  if (n_gt == 0) return tp.empty() ? 1.0 : 0.0;
  std::vector<double> recall(tp.size()), precision(tp.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < tp.size(); ++i) {
    hits += tp[i] ? 1 : 0;
    recall[i] = static_cast<double>(hits) / static_cast<double>(n_gt);
    precision[i] = static_cast<double>(hits) / static_cast<double>(i + 1);
  }
  double ap = 0.0;
  for (int k = 0; k <= 10; ++k) {
    const double t = k / 10.0;
    double best = 0.0;
    for (std::size_t i = 0; i < tp.size(); ++i) {
      if (recall[i] >= t) best = std::max(best, precision[i]);
    }
    ap += best;
  }
  return ap / 11.0;
}

double mean_ap(std::span<const double> aps) {
  if (aps.empty()) throw InvalidParams("mean AP needs at least one class");
  return std::accumulate(aps.begin(), aps.end(), 0.0) / static_cast<double>(aps.size());
}

HeatmapGrid::HeatmapGrid(int confidence_bins_, int iou_bins_)
    : confidence_bins(confidence_bins_), iou_bins(iou_bins_) {
  if (confidence_bins <= 0 || iou_bins <= 0) throw InvalidParams("heatmap bin counts must be positive");
  counts.assign(static_cast<std::size_t>(confidence_bins) * static_cast<std::size_t>(iou_bins), 0);
}

namespace {
int bin_of(double v, int bins) {
  const int b = static_cast<int>(std::clamp(v, 0.0, 1.0) * bins);
  return std::min(b, bins - 1);
}
}  // namespace

void HeatmapGrid::add(double confidence, double iou_value) {
  const int r = bin_of(confidence, confidence_bins);
  const int c = bin_of(iou_value, iou_bins);
  ++counts[static_cast<std::size_t>(r) * static_cast<std::size_t>(iou_bins) + static_cast<std::size_t>(c)];
}

std::uint64_t HeatmapGrid::at(int confidence_bin, int iou_bin) const {
  return counts[static_cast<std::size_t>(confidence_bin) * static_cast<std::size_t>(iou_bins) +
                static_cast<std::size_t>(iou_bin)];
}

std::uint64_t HeatmapGrid::total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }

Evaluator::Evaluator(int num_classes, double iou_thresh)
    : num_classes_(num_classes), iou_thresh_(iou_thresh), ranked_(static_cast<std::size_t>(num_classes)),
      n_gt_(static_cast<std::size_t>(num_classes), 0) {
  if (num_classes <= 0) throw InvalidParams("evaluator needs at least one class");
}

void Evaluator::add_image(std::span<const Detection> dets, std::span<const Annotation> gts) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    return dets[a].confidence > dets[b].confidence;
  });
  std::vector<Detection> sorted;
  sorted.reserve(dets.size());
  for (std::size_t i : order) sorted.push_back(dets[i]);

  for (const Annotation& g : gts) {
    if (g.class_id < 0 || g.class_id >= num_classes_) throw UnknownClass("ground-truth class id out of range");
    if (!g.difficult) ++n_gt_[static_cast<std::size_t>(g.class_id)];
  }
  const MatchResult m = match_detections(sorted, gts, iou_thresh_);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const Detection& d = sorted[i];
    if (d.class_id < 0 || d.class_id >= num_classes_) throw UnknownClass("detection class id out of range");
    if (m.flags[i] == MatchFlag::Ignored) continue;
    const bool tp = m.flags[i] == MatchFlag::TruePositive;
    ranked_[static_cast<std::size_t>(d.class_id)].push_back({d.score, next_order_++, tp});
    if (tp) tps_.push_back({d.class_id, d.confidence, m.ious[i]});
  }
}

std::size_t Evaluator::num_gt(int class_id) const { return n_gt_.at(static_cast<std::size_t>(class_id)); }

std::size_t Evaluator::num_detections(int class_id) const { return ranked_.at(static_cast<std::size_t>(class_id)).size(); }

double Evaluator::class_ap(int class_id) const {
  std::vector<Ranked> ranked = ranked_.at(static_cast<std::size_t>(class_id));
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.order < b.order;
  });
  // std::vector<bool> has no contiguous storage.
  auto flags = std::make_unique<bool[]>(ranked.size());
  for (std::size_t i = 0; i < ranked.size(); ++i) flags[i] = ranked[i].tp;
  return average_precision(std::span<const bool>(flags.get(), ranked.size()), n_gt_[static_cast<std::size_t>(class_id)]);
}

std::vector<int> Evaluator::evaluated_classes() const {
  std::vector<int> out;
  for (int c = 0; c < num_classes_; ++c) {
    if (n_gt_[static_cast<std::size_t>(c)] > 0 || !ranked_[static_cast<std::size_t>(c)].empty()) out.push_back(c);
  }
  return out;
}

double Evaluator::map() const {
  const auto classes = evaluated_classes();
  if (classes.empty()) return 0.0;
  std::vector<double> aps;
  for (int c : classes) aps.push_back(class_ap(c));
  return mean_ap(aps);
}

HeatmapGrid collect_heatmap(std::span<const TruePositive> tps, int confidence_bins, int iou_bins) {
  HeatmapGrid grid(confidence_bins, iou_bins);
  for (const TruePositive& tp : tps) grid.add(tp.confidence, tp.iou);
  return grid;
}

std::map<int, HeatmapGrid> collect_class_heatmaps(std::span<const TruePositive> tps, int confidence_bins,
                                                  int iou_bins) {
  std::map<int, HeatmapGrid> grids;
  for (const TruePositive& tp : tps) {
    auto it = grids.try_emplace(tp.class_id, confidence_bins, iou_bins).first;
    it->second.add(tp.confidence, tp.iou);
  }
  return grids;
}

std::string heatmap_to_text(const HeatmapGrid& grid) {
  std::string out;
  for (int r = grid.confidence_bins - 1; r >= 0; --r) {
    for (int c = 0; c < grid.iou_bins; ++c) {
      if (c) out += ' ';
      out += std::to_string(grid.at(r, c));
    }
    out += '\n';
  }
  return out;
}

std::string heatmap_to_pgm(const HeatmapGrid& grid) {
  std::string out = "P5\n" + std::to_string(grid.iou_bins) + " " + std::to_string(grid.confidence_bins) + "\n255\n";
  const std::uint64_t peak = std::max<std::uint64_t>(1, *std::max_element(grid.counts.begin(), grid.counts.end()));
  for (int r = grid.confidence_bins - 1; r >= 0; --r) {
    for (int c = 0; c < grid.iou_bins; ++c) {
      out += static_cast<char>(static_cast<unsigned char>((grid.at(r, c) * 255 + peak / 2) / peak));
    }
  }
  return out;
}

std::string ap_table_csv(const Evaluator& evaluator, const CategoryList& categories) {
  std::string out = "class,ap\n";
  for (int c : evaluator.evaluated_classes()) {
    out += categories.name(c) + "," + format_real(evaluator.class_ap(c)) + "\n";
  }
  out += "mAP," + format_real(evaluator.map()) + "\n";
  return out;
}

}  // namespace obb
