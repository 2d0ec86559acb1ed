#include "obb/toytrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "obb/errors.hpp"
#include "obb/textio.hpp"

namespace obb {
namespace {

// Stream separation for the generators derived from one seed.
constexpr std::uint64_t kDataStream = 0x64617461;     // "data"
constexpr std::uint64_t kInitStream = 0x696e6974;     // "init"
constexpr std::uint64_t kValidationKey = 0x76616c2d;  // fixed, not seed-derived

CounterRng data_rng(std::uint64_t seed) { return CounterRng(mix64(seed ^ mix64(kDataStream))); }
CounterRng init_rng(std::uint64_t seed) { return CounterRng(mix64(seed ^ mix64(kInitStream))); }

std::vector<GridLocation> grid_locations(int image_h, int image_w) {
  std::vector<GridLocation> locs;
  for (FpnLevel level : production_levels()) {
    const GridShape g = grid_shape(level, image_h, image_w);
    for (int y = 0; y < g.rows; ++y) {
      for (int x = 0; x < g.cols; ++x) locs.push_back(make_location(level, x, y));
    }
  }
  return locs;
}

double shifted_vertex_distance(const RegressionTarget& pred, const RegressionTarget& target) {
  double best = INFINITY;
  for (int shift = 0; shift < 4; ++shift) {
    double sum = 0.0;
    for (int j = 0; j < 4; ++j) {
      const int k = (j + shift) % 4;
      sum += std::hypot(pred[2 * j] - target[2 * k], pred[2 * j + 1] - target[2 * k + 1]);
    }
    best = std::min(best, sum / 4.0);
  }
  return best;
}

}  // namespace

std::string_view to_string(CenternessMode mode) {
  switch (mode) {
    case CenternessMode::None: return "none";
    case CenternessMode::AxisAligned: return "axis-aligned";
    case CenternessMode::Oriented: return "oriented";
  }
  return "?";
}

CenternessMode parse_centerness_mode(std::string_view name) {
  if (name == "axis") return CenternessMode::AxisAligned;
  for (CenternessMode m : all_centerness_modes()) {
    if (to_string(m) == name) return m;
  }
  throw InvalidParams("unknown center-ness mode '" + std::string(name) + "'");
}

std::array<CenternessMode, 3> all_centerness_modes() {
  return {CenternessMode::None, CenternessMode::AxisAligned, CenternessMode::Oriented};
}

ToyModelConfig model_config(const TrainConfig& config) {
  ToyModelConfig m;
  m.input_width = feature_width(config.features);
  m.hidden = config.hidden;
  m.num_classes = config.scene.num_classes;
  m.tower_layers = config.tower_layers;
  m.strategy = config.strategy;
  return m;
}

long warmup_iterations(const TrainConfig& config) {
  return std::lround(static_cast<double>(config.reference_warmup) * static_cast<double>(config.iterations) /
                     static_cast<double>(config.reference_iterations));
}

double learning_rate(const TrainConfig& config, long iteration) {
  double lr = config.base_lr;
  const long warmup = warmup_iterations(config);
  if (iteration < warmup) {
    const double t = static_cast<double>(iteration) / static_cast<double>(warmup);
    lr *= config.warmup_factor * (1.0 - t) + t;
  }
  // Integer milestones: 2/3 and 8/9 of the run (60k and 80k of 90k).
  if (3 * iteration >= 2 * config.iterations) lr *= 0.1;
  if (9 * iteration >= 8 * config.iterations) lr *= 0.1;
  return lr;
}

Batch make_batch(std::span<const SyntheticScene> scenes, CenternessMode mode, double alpha,
                 const FeatureConfig& features) {
  Batch batch;
  std::vector<FeatureMatrix> parts;
  parts.reserve(scenes.size());
  AssignmentConfig ac;
  ac.alpha = alpha;
  ac.centerness = mode == CenternessMode::AxisAligned ? CenternessFunction::AxisAligned : CenternessFunction::Oriented;
  for (const SyntheticScene& s : scenes) {
    parts.push_back(extract_features(s, features));
    const TargetMap map = assign_locations(s.annotations, s.height, s.width, ac);
    for (const LevelTargets& lt : map.levels) batch.targets.insert(batch.targets.end(), lt.cells.begin(), lt.cells.end());
  }
  batch.features = stack_rows(parts);
  if (batch.targets.size() != static_cast<std::size_t>(batch.features.rows)) {
    throw InvalidParams("feature rows and assignment locations disagree");
  }
  return batch;
}

std::vector<SyntheticScene> training_scenes(const TrainConfig& config, long first, int count) {
  const CounterRng base = data_rng(config.seed);
  std::vector<SyntheticScene> scenes;
  scenes.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    scenes.push_back(generate_scene(base.substream(static_cast<std::uint64_t>(first + i)), config.scene));
  }
  return scenes;
}

std::vector<SyntheticScene> validation_scenes(const TrainConfig& config) {
  const CounterRng base(kValidationKey);
  std::vector<SyntheticScene> scenes;
  for (int i = 0; i < config.validation_scenes; ++i) {
    scenes.push_back(generate_scene(base.substream(static_cast<std::uint64_t>(i)), config.scene));
  }
  return scenes;
}

std::vector<Detection> raw_detections(const ModelOutput& output, int image_h, int image_w, bool use_centerness,
                                      double confidence_threshold) {
  const std::vector<GridLocation> locs = grid_locations(image_h, image_w);
  if (locs.size() != static_cast<std::size_t>(output.rows)) throw InvalidParams("output rows do not match the image grid");
  std::vector<Detection> dets;
  for (int r = 0; r < output.rows; ++r) {
    for (int c = 0; c < output.num_classes; ++c) {
      const double p = output.prob(r, c);
      if (!(p >= confidence_threshold)) continue;
      Quad quad = Quad::axis_aligned(0, 0, 1, 1);
      try {
        quad = decode_target(output.corners[static_cast<std::size_t>(r)], locs[static_cast<std::size_t>(r)]);
      } catch (const InvalidQuad&) {
        continue;
      }
      const double o = use_centerness ? output.centerness[static_cast<std::size_t>(r)] : 1.0;
      dets.push_back(make_detection(quad, c, p, o));
    }
  }
  return dets;
}

ValidationMetrics evaluate_model(const ToyModel& model, const TrainConfig& config,
                                 std::span<const SyntheticScene> scenes) {
  const bool use_ctr = config.centerness != CenternessMode::None;
  Evaluator evaluator(config.scene.num_classes, 0.5);
  ValidationMetrics m;
  std::vector<double> l2, pred_ctr, true_ctr;
  for (const SyntheticScene& scene : scenes) {
    const Batch batch = make_batch(std::span(&scene, 1), CenternessMode::Oriented, config.alpha, config.features);
    const ModelOutput out = model.predict(batch.features);
    const std::vector<Detection> dets = postprocess(raw_detections(out, scene.height, scene.width, use_ctr));
    evaluator.add_image(dets, scene.annotations.objects);

    const std::vector<GridLocation> locs = grid_locations(scene.height, scene.width);
    for (std::size_t r = 0; r < batch.targets.size(); ++r) {
      const LocationTarget& t = batch.targets[r];
      if (!t.positive()) continue;
      l2.push_back(shifted_vertex_distance(out.corners[r], *t.regression) * locs[r].level.stride());
      pred_ctr.push_back(out.centerness[r]);
      true_ctr.push_back(*t.centerness);
    }
  }
  m.map = evaluator.map();
  m.num_positive = l2.size();
  m.corner_l2 = l2.empty() ? 0.0 : pairwise_sum(l2) / static_cast<double>(l2.size());
  m.centerness_r = pearson_r(pred_ctr, true_ctr);
  m.true_positives = evaluator.true_positives();
  return m;
}

void sgd_step(std::span<double> params, std::span<double> velocity, std::span<const double> grad, double lr,
              double momentum, double weight_decay) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = momentum * velocity[i] + grad[i] + weight_decay * params[i];
    params[i] -= lr * velocity[i];
  }
}

TrainResult train(const TrainConfig& config) {
  if (config.iterations < 0 || config.batch_size <= 0 || !(config.base_lr > 0) || config.reference_iterations <= 0 ||
      config.validation_interval < 0 || config.validation_scenes < 0) {
    throw InvalidParams("invalid training configuration");
  }
  TrainResult result{ToyModel(model_config(config)), {}, {}};
  ToyModel& model = result.model;
  model.initialize(init_rng(config.seed));
  const bool use_ctr = config.centerness != CenternessMode::None;
  const std::vector<SyntheticScene> held_out = validation_scenes(config);

  std::vector<double> grad(model.num_parameters()), velocity(model.num_parameters(), 0.0);
  auto record = [&](long it, double lr, const TotalLoss& l) {
    if (!std::isfinite(l.term.value)) throw DivergenceError(it);
    result.log.push_back({it, lr, l.term.value, l.cls, l.reg, l.ctr, l.center, l.num_positive});
  };
  auto validate = [&](long it) {
    ValidationMetrics v = evaluate_model(model, config, held_out);
    v.iteration = it;
    result.validation.push_back(std::move(v));
  };

  if (config.iterations == 0) {
    const auto scenes = training_scenes(config, 0, config.batch_size);
    const Batch batch = make_batch(scenes, config.centerness, config.alpha, config.features);
    record(0, learning_rate(config, 0),
           model.loss_and_gradient(batch.features, batch.targets, config.loss_weights, use_ctr, grad));
  }
  for (long it = 0; it < config.iterations; ++it) {
    const auto scenes = training_scenes(config, it * config.batch_size, config.batch_size);
    const Batch batch = make_batch(scenes, config.centerness, config.alpha, config.features);
    const double lr = learning_rate(config, it);
    record(it, lr, model.loss_and_gradient(batch.features, batch.targets, config.loss_weights, use_ctr, grad));
    sgd_step(model.parameters(), velocity, grad, lr, config.momentum, config.weight_decay);
    if (config.validation_interval > 0 && (it + 1) % config.validation_interval == 0 && it + 1 < config.iterations) {
      validate(it + 1);
    }
  }
  for (double v : model.parameters()) {
    if (!std::isfinite(v)) throw DivergenceError(config.iterations);
  }
  validate(config.iterations);
  return result;
}

std::string iteration_log_csv(std::span<const IterationRecord> log) {
  std::string out = "iteration,lr,loss,cls,reg,ctr,center,positives\n";
  for (const IterationRecord& r : log) {
    out += std::to_string(r.iteration) + "," + format_real(r.lr) + "," + format_real(r.loss) + "," +
           format_real(r.cls) + "," + format_real(r.reg) + "," + format_real(r.ctr) + "," + format_real(r.center) +
           "," + std::to_string(r.num_positive) + "\n";
  }
  return out;
}

std::string validation_csv(std::span<const ValidationMetrics> validation) {
  std::string out = "iteration,mAP,corner_l2,centerness_r,positives\n";
  for (const ValidationMetrics& v : validation) {
    out += std::to_string(v.iteration) + "," + format_real(v.map) + "," + format_real(v.corner_l2) + "," +
           format_real(v.centerness_r) + "," + std::to_string(v.num_positive) + "\n";
  }
  return out;
}

double pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidParams("pearson_r needs equal-length inputs");
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0 || syy <= 0) return 0.0;  // undefined for a constant series
  return sxy / std::sqrt(sxx * syy);
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd r;
  if (values.empty()) return r;
  const double n = static_cast<double>(values.size());
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2) return r;
  double ss = 0.0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  r.std = std::sqrt(ss / (n - 1.0));
  return r;
}

const ComparisonSummary& ComparisonReport::summary(StrategyKind strategy, CenternessMode mode) const {
  for (const ComparisonSummary& s : summaries) {
    if (s.strategy == strategy && s.mode == mode) return s;
  }
  throw InvalidParams("no summary for " + std::string(to_string(strategy)) + "/" + std::string(to_string(mode)));
}

ComparisonReport run_comparison(std::span<const StrategyKind> strategies, std::span<const CenternessMode> modes,
                                std::span<const std::uint64_t> seeds, const TrainConfig& base,
                                const ProgressFn& progress) {
  if (seeds.size() < 5) throw InvalidParams("a comparison needs at least five seeds");
  ComparisonReport report;
  for (StrategyKind strategy : strategies) {
    for (CenternessMode mode : modes) {
      std::vector<double> maps, l2s;
      for (std::uint64_t seed : seeds) {
        TrainConfig config = base;
        config.strategy = strategy;
        config.centerness = mode;
        config.seed = seed;
        const TrainResult r = train(config);
        const ValidationMetrics& v = r.validation.back();
        report.rows.push_back({strategy, mode, seed, v.map, v.corner_l2, v.centerness_r});
        maps.push_back(v.map);
        l2s.push_back(v.corner_l2);
        if (mode != CenternessMode::AxisAligned) {
          auto it = report.heatmaps.try_emplace({strategy, mode}).first;
          for (const TruePositive& tp : v.true_positives) it->second.add(tp.confidence, tp.iou);
        }
        if (progress) {
          progress(std::string(to_string(strategy)) + " " + std::string(to_string(mode)) + " seed " +
                   std::to_string(seed) + ": mAP " + format_real(v.map) + ", corner L2 " + format_real(v.corner_l2));
        }
      }
      report.summaries.push_back({strategy, mode, seeds.size(), mean_std(maps), mean_std(l2s)});
    }
  }
  return report;
}

std::string comparison_csv(const ComparisonReport& report) {
  std::string out = "strategy,mode,seed,mAP,corner_l2,centerness_r\n";
  for (const ComparisonRow& r : report.rows) {
    out += std::string(to_string(r.strategy)) + "," + std::string(to_string(r.mode)) + "," + std::to_string(r.seed) +
           "," + format_real(r.map) + "," + format_real(r.corner_l2) + "," + format_real(r.centerness_r) + "\n";
  }
  return out;
}

std::string comparison_summary_csv(const ComparisonReport& report) {
  std::string out = "strategy,mode,runs,mAP_mean,mAP_std,corner_l2_mean,corner_l2_std\n";
  for (const ComparisonSummary& s : report.summaries) {
    out += std::string(to_string(s.strategy)) + "," + std::string(to_string(s.mode)) + "," + std::to_string(s.runs) +
           "," + format_real(s.map.mean) + "," + format_real(s.map.std) + "," + format_real(s.corner_l2.mean) + "," +
           format_real(s.corner_l2.std) + "\n";
  }
  return out;
}

std::vector<CapacityRow> capacity_sweep(std::span<const int> depths, std::span<const std::uint64_t> seeds,
                                        const TrainConfig& base, const ProgressFn& progress) {
  std::vector<CapacityRow> rows;
  for (int depth : depths) {
    if (depth < 1) throw InvalidParams("tower depth must be at least 1");
    for (std::uint64_t seed : seeds) {
      TrainConfig config = base;
      config.strategy = StrategyKind::Direct;
      config.tower_layers = depth;
      config.seed = seed;
      const TrainResult r = train(config);
      rows.push_back({depth, r.model.num_parameters(), r.validation.back().map, seed});
      if (progress) {
        progress("depth " + std::to_string(depth) + " seed " + std::to_string(seed) + ": mAP " +
                 format_real(rows.back().map));
      }
    }
  }
  return rows;
}

std::string capacity_csv(std::span<const CapacityRow> rows) {
  std::string out = "depth,params,mAP,seed\n";
  for (const CapacityRow& r : rows) {
    out += std::to_string(r.depth) + "," + std::to_string(r.params) + "," + format_real(r.map) + "," +
           std::to_string(r.seed) + "\n";
  }
  return out;
}

}  // namespace obb
