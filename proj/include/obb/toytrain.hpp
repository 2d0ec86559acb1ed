#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "obb/eval.hpp"
#include "obb/losses.hpp"
#include "obb/postprocess.hpp"
#include "obb/strategies.hpp"
#include "obb/toy_model.hpp"
#include "obb/toy_scene.hpp"

namespace obb {

enum class CenternessMode { None, AxisAligned, Oriented };

std::string_view to_string(CenternessMode mode);
/// "none", "axis-aligned" (or "axis"), "oriented". Throws InvalidParams.
CenternessMode parse_centerness_mode(std::string_view name);
std::array<CenternessMode, 3> all_centerness_modes();

struct TrainConfig {
  std::uint64_t seed = 0;
  long iterations = 6000;
  int batch_size = 2;
  double base_lr = 0.01;
  // The warmup length is reference_warmup scaled by iterations / reference_iterations.
  long reference_iterations = 90000;
  long reference_warmup = 500;
  double warmup_factor = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  StrategyKind strategy = StrategyKind::Direct;
  CenternessMode centerness = CenternessMode::Oriented;
  double alpha = 4.0;
  int hidden = 64;
  int tower_layers = 1;
  LossWeights loss_weights;
  long validation_interval = 2000;  // 0: only after the last iteration
  int validation_scenes = 50;
  SceneConfig scene;
  FeatureConfig features;
};

ToyModelConfig model_config(const TrainConfig& config);

long warmup_iterations(const TrainConfig& config);

/// Linear warmup from warmup_factor * base_lr, then x0.1 at 2/3 and 8/9 of the run.
double learning_rate(const TrainConfig& config, long iteration);

/// Features and assignment targets of several scenes, stacked in order.
struct Batch {
  FeatureMatrix features;
  std::vector<LocationTarget> targets;
};

/// Center-ness targets follow `mode`; with None they are the oriented values
/// (never used by the loss, but available for correlation checks).
Batch make_batch(std::span<const SyntheticScene> scenes, CenternessMode mode, double alpha,
                 const FeatureConfig& features = {});

/// Scenes `first .. first + count - 1` of the training stream of `seed`.
std::vector<SyntheticScene> training_scenes(const TrainConfig& config, long first, int count);

/// Fixed held-out scenes; independent of the seed.
std::vector<SyntheticScene> validation_scenes(const TrainConfig& config);

/// Raw detections (before postprocessing) of one image: every (location,
/// class) with p >= the confidence threshold whose decoded quad is valid.
/// o is the predicted center-ness, or 1 without center-ness.
std::vector<Detection> raw_detections(const ModelOutput& output, int image_h, int image_w, bool use_centerness,
                                      double confidence_threshold = 0.05);

struct IterationRecord {
  long iteration = 0;
  double lr = 0.0;
  double loss = 0.0;
  double cls = 0.0;
  double reg = 0.0;
  double ctr = 0.0;
  double center = 0.0;
  std::size_t num_positive = 0;
};

struct ValidationMetrics {
  long iteration = 0;
  double map = 0.0;
  /// Mean over positive locations of the mean vertex distance in pixels,
  /// minimised over cyclic vertex shifts.
  double corner_l2 = 0.0;
  /// Pearson r of predicted center-ness against oriented center-ness targets.
  double centerness_r = 0.0;
  std::size_t num_positive = 0;
  std::vector<TruePositive> true_positives;
};

ValidationMetrics evaluate_model(const ToyModel& model, const TrainConfig& config,
                                 std::span<const SyntheticScene> scenes);

struct TrainResult {
  ToyModel model;
  std::vector<IterationRecord> log;
  std::vector<ValidationMetrics> validation;  // the last entry is the final model
};

/// Deterministic in `config`. Throws DivergenceError on a non-finite loss.
TrainResult train(const TrainConfig& config);

/// Plain SGD step with momentum and weight decay: v = mu v + g + wd theta;
/// theta -= lr v.
void sgd_step(std::span<double> params, std::span<double> velocity, std::span<const double> grad, double lr,
              double momentum, double weight_decay);

std::string iteration_log_csv(std::span<const IterationRecord> log);
std::string validation_csv(std::span<const ValidationMetrics> validation);

double pearson_r(std::span<const double> x, std::span<const double> y);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single value
};

MeanStd mean_std(std::span<const double> values);

struct ComparisonRow {
  StrategyKind strategy = StrategyKind::Direct;
  CenternessMode mode = CenternessMode::None;
  std::uint64_t seed = 0;
  double map = 0.0;
  double corner_l2 = 0.0;
  double centerness_r = 0.0;
};

struct ComparisonSummary {
  StrategyKind strategy = StrategyKind::Direct;
  CenternessMode mode = CenternessMode::None;
  std::size_t runs = 0;
  MeanStd map;
  MeanStd corner_l2;
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;  // strategy-major, then mode, then seed
  std::vector<ComparisonSummary> summaries;
  /// Confidence vs IoU of validation true positives, summed over seeds, for
  /// the none and oriented modes of every strategy.
  std::map<std::pair<StrategyKind, CenternessMode>, HeatmapGrid> heatmaps;

  const ComparisonSummary& summary(StrategyKind strategy, CenternessMode mode) const;
};

using ProgressFn = std::function<void(const std::string&)>;

/// Trains every (strategy, mode, seed) from `base`. Needs at least five seeds.
ComparisonReport run_comparison(std::span<const StrategyKind> strategies, std::span<const CenternessMode> modes,
                                std::span<const std::uint64_t> seeds, const TrainConfig& base,
                                const ProgressFn& progress = {});

/// "strategy,mode,seed,mAP,corner_l2,centerness_r"
std::string comparison_csv(const ComparisonReport& report);
/// "strategy,mode,runs,mAP_mean,mAP_std,corner_l2_mean,corner_l2_std"
std::string comparison_summary_csv(const ComparisonReport& report);

struct CapacityRow {
  int depth = 0;
  std::size_t params = 0;
  double map = 0.0;
  std::uint64_t seed = 0;
};

/// Direct strategy with tower_layers = depth, for each depth and seed.
std::vector<CapacityRow> capacity_sweep(std::span<const int> depths, std::span<const std::uint64_t> seeds,
                                        const TrainConfig& base, const ProgressFn& progress = {});

/// "depth,params,mAP,seed"
std::string capacity_csv(std::span<const CapacityRow> rows);

}  // namespace obb
