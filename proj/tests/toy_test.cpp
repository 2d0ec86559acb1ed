#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "obb/errors.hpp"
#include "obb/toy_model.hpp"
#include "obb/toy_scene.hpp"
#include "obb/toytrain.hpp"

namespace obb {
namespace {

TEST(ToyScene, Deterministic) {
  const SyntheticScene a = generate_scene(CounterRng(42));
  const SyntheticScene b = generate_scene(CounterRng(42));
  EXPECT_EQ(a.pixels, b.pixels);
  ASSERT_EQ(a.annotations.objects.size(), b.annotations.objects.size());
  for (std::size_t i = 0; i < a.annotations.objects.size(); ++i) {
    EXPECT_EQ(a.annotations.objects[i].quad, b.annotations.objects[i].quad);
    EXPECT_EQ(a.annotations.objects[i].class_id, b.annotations.objects[i].class_id);
  }
  EXPECT_NE(generate_scene(CounterRng(43)).pixels, a.pixels);
}

// 10^4 scenes: every annotation is a valid rectangle inside the image with
// sides >= 8, objects never overlap, and classes are close to uniform.
TEST(ToyScene, ValiditySweepAndClassBalance) {
  const CounterRng base(7);
  SceneConfig cfg;
  std::array<long, 3> hist{};
  long total = 0;
  for (int i = 0; i < 10000; ++i) {
    const SyntheticScene s = generate_scene(base.substream(static_cast<std::uint64_t>(i)), cfg);
    const auto& objs = s.annotations.objects;
    ASSERT_GE(objs.size(), 1u);
    ASSERT_LE(objs.size(), 3u);
    for (std::size_t a = 0; a < objs.size(); ++a) {
      const Quad& q = objs[a].quad;
      ASSERT_NO_THROW(Quad::canonicalize(q.vertices()));
      ASSERT_GT(area(q), 0.0);
      for (const Point& p : q.vertices()) {
        ASSERT_GE(p.x, 0.0);
        ASSERT_GE(p.y, 0.0);
        ASSERT_LE(p.x, cfg.size);
        ASSERT_LE(p.y, cfg.size);
      }
      const auto& v = q.vertices();
      const double s1 = norm(v[1] - v[0]), s2 = norm(v[2] - v[1]);
      ASSERT_GE(std::min(s1, s2), 8.0);
      ASSERT_LE(std::max(s1, s2) / std::min(s1, s2), 5.0 + 1e-9);
      ASSERT_LE(std::hypot(s1, s2), cfg.max_diagonal + 1e-9);
      for (std::size_t b = 0; b < a; ++b) ASSERT_EQ(intersection_area(q, objs[b].quad), 0.0);
      ++hist[static_cast<std::size_t>(objs[a].class_id)];
      ++total;
    }
  }
  // Multinomial: each count ~ Binomial(total, 1/3).
  const double mean = total / 3.0, sigma = std::sqrt(total * (1.0 / 3.0) * (2.0 / 3.0));
  for (long h : hist) EXPECT_LE(std::abs(h - mean), 3.0 * sigma) << h << " of " << total;
}

TEST(ToyScene, RejectsBadConfig) {
  SceneConfig cfg;
  cfg.min_short_side = 4;
  EXPECT_THROW(generate_scene(CounterRng(1), cfg), InvalidParams);
}

TEST(ToyFeatures, RowsFollowAssignmentOrder) {
  const SyntheticScene s = generate_scene(CounterRng(3));
  const FeatureMatrix f = extract_features(s);
  EXPECT_EQ(f.rows, 341);
  EXPECT_EQ(f.cols, 192);
  const TargetMap map = assign_locations(s.annotations, s.height, s.width);
  EXPECT_EQ(map.num_locations(), 341u);
}

TEST(ToyFeatures, BlankImageIsZeroInsideTheImage) {
  SyntheticScene s;
  s.width = s.height = 64;
  s.pixels.assign(64 * 64 * 3, 0.3f);
  const FeatureMatrix f = extract_features(s);
  for (double v : f.data) EXPECT_NEAR(v, 0.0, 1e-6);
}

TEST(ToyFeatures, CellMeanOracle) {
  // A single bright pixel lands in exactly one cell of the P3 location that
  // covers it; the pooled value is 2 * (value - background) / cell area.
  SyntheticScene s;
  s.width = s.height = 64;
  s.pixels.assign(64 * 64 * 3, 0.3f);
  s.pixels[(20 * 64 + 21) * 3 + 1] = 1.3f;  // pixel (21, 20), green
  const FeatureMatrix f = extract_features(s);
  // P3 location (2, 2) is at pixel (20, 20); cells span 12 px from 20 - 48.
  const int row = 2 * 8 + 2;
  const double cell = 12.0;
  // x: 21 in [20, 32) -> cell 4; y: 20 in [20, 32) -> cell 4.
  const int idx = (4 * 8 + 4) * 3 + 1;
  EXPECT_NEAR(f.row(row)[idx], 2.0 * 1.0 / (cell * cell), 1e-6);
  double others = 0.0;
  for (int k = 0; k < f.cols; ++k) others += k == idx ? 0.0 : std::abs(f.row(row)[k]);
  EXPECT_NEAR(others, 0.0, 1e-6);
}

TEST(ToyFeatures, StackRows) {
  FeatureMatrix a{1, 2, {1, 2}}, b{2, 2, {3, 4, 5, 6}};
  const FeatureMatrix s = stack_rows(std::vector<FeatureMatrix>{a, b});
  EXPECT_EQ(s.rows, 3);
  EXPECT_EQ(s.data, (std::vector<double>{1, 2, 3, 4, 5, 6}));
  FeatureMatrix c{1, 3, {1, 2, 3}};
  EXPECT_THROW(stack_rows(std::vector<FeatureMatrix>{a, c}), InvalidParams);
}

ToyModelConfig small_config(StrategyKind kind, int towers = 1) {
  ToyModelConfig c;
  c.strategy = kind;
  c.tower_layers = towers;
  return c;
}

TEST(ToyModel, ParameterCountGrowsWithDepth) {
  for (StrategyKind k : all_strategies()) {
    std::size_t prev = 0;
    for (int d = 1; d <= 8; ++d) {
      const std::size_t n = ToyModel(small_config(k, d)).num_parameters();
      EXPECT_GT(n, prev);
      prev = n;
    }
  }
  // D*F + F + F*F + F for the trunk, two towers, heads C, 1 and 8.
  const std::size_t f = 64, d = 192;
  EXPECT_EQ(ToyModel(small_config(StrategyKind::Direct)).num_parameters(),
            d * f + f + 3 * (f * f + f) + (f * 3 + 3) + (f + 1) + (f * 8 + 8));
}

TEST(ToyModel, InitializationIsSeededAndBiased) {
  ToyModel a(small_config(StrategyKind::Direct)), b(small_config(StrategyKind::Direct));
  a.initialize(CounterRng(5));
  b.initialize(CounterRng(5));
  EXPECT_TRUE(std::ranges::equal(a.parameters(), b.parameters()));
  b.initialize(CounterRng(6));
  EXPECT_FALSE(std::ranges::equal(a.parameters(), b.parameters()));
  const FeatureMatrix x = extract_features(generate_scene(CounterRng(1)));
  const ModelOutput out = a.predict(x);
  // Class bias -log(99) puts the prior near 0.01.
  for (double p : out.class_probs) EXPECT_NEAR(p, 0.01, 0.01);
}

TEST(ToyModel, IterativeHeadsMatchStrategyDecode) {
  ToyModel m(small_config(StrategyKind::Iterative));
  m.initialize(CounterRng(9));
  const IterativeHeadParams heads = m.iterative_heads();
  EXPECT_NO_THROW(heads.validate());
  EXPECT_THROW(ToyModel(small_config(StrategyKind::Direct)).iterative_heads(), InvalidParams);
}

TEST(ToyModel, CenterToCornerBroadcastsCenter) {
  ToyModel m(small_config(StrategyKind::CenterToCorner));
  m.initialize(CounterRng(2));
  // Zero the corner head so corners equal the raw center everywhere.
  for (const TensorInfo& t : m.tensors()) {
    if (t.name.starts_with("corner_head")) {
      std::fill_n(m.parameters().begin() + static_cast<std::ptrdiff_t>(t.offset), t.size(), 0.0);
    }
  }
  const ModelOutput out = m.predict(extract_features(generate_scene(CounterRng(1))));
  for (int r = 0; r < out.rows; ++r) {
    for (int k = 0; k < 4; ++k) {
      EXPECT_EQ(out.corners[static_cast<std::size_t>(r)][2 * k], out.centers[static_cast<std::size_t>(r)][0]);
      EXPECT_EQ(out.corners[static_cast<std::size_t>(r)][2 * k + 1], out.centers[static_cast<std::size_t>(r)][1]);
    }
  }
}

TEST(ToyModel, CheckpointRoundTrip) {
  for (StrategyKind k : all_strategies()) {
    ToyModelConfig c = small_config(k, 2);
    c.anchor_scale = 3.5;
    ToyModel m(c);
    m.initialize(CounterRng(11));
    const std::string bytes = encode_checkpoint(m);
    EXPECT_EQ(bytes.substr(0, 8), "OBBTOYCK");
    const ToyModel back = decode_checkpoint(bytes);
    EXPECT_EQ(back.config().strategy, k);
    EXPECT_EQ(back.config().tower_layers, 2);
    EXPECT_EQ(back.config().anchor_scale, 3.5);
    EXPECT_TRUE(std::ranges::equal(back.parameters(), m.parameters()));
    EXPECT_EQ(encode_checkpoint(back), bytes);
    EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 1)), ParseError);
    EXPECT_THROW(decode_checkpoint(bytes + "x"), ParseError);
    EXPECT_THROW(decode_checkpoint("NOTACKPT" + bytes.substr(8)), ParseError);
  }
}

TEST(ToyModel, LossGradientBufferChecked) {
  ToyModel m(small_config(StrategyKind::Direct));
  const Batch b = make_batch(std::vector<SyntheticScene>{generate_scene(CounterRng(1))}, CenternessMode::Oriented, 4.0);
  std::vector<double> g(3);
  EXPECT_THROW(m.loss_and_gradient(b.features, b.targets, {}, true, g), InvalidParams);
}

struct GradCheck {
  int checked = 0;
  int skipped = 0;
  double worst = 0.0;
};

// Central differences on random parameter coordinates. Coordinates whose
// one-sided slopes disagree straddle a kink (ReLU, SmoothL1 at beta, a switch
// of the minimising cyclic shift) and are skipped.
GradCheck check_gradient(const ToyModel& model, const Batch& batch, bool use_ctr, int samples, CounterRng rng) {
  ToyModel m = model;
  std::vector<double> grad(m.num_parameters());
  const LossWeights w;
  m.loss_and_gradient(batch.features, batch.targets, w, use_ctr, grad);
  const double h = 1e-6;
  GradCheck r;
  auto params = m.parameters();
  while (r.checked < samples) {
    const std::size_t i = rng.below(params.size());
    const double theta = params[i];
    const double f0 = m.loss(batch.features, batch.targets, w, use_ctr);
    params[i] = theta + h;
    const double fp = m.loss(batch.features, batch.targets, w, use_ctr);
    params[i] = theta - h;
    const double fm = m.loss(batch.features, batch.targets, w, use_ctr);
    params[i] = theta;
    const double fwd = (fp - f0) / h, bwd = (f0 - fm) / h, central = (fp - fm) / (2 * h);
    if (std::abs(fwd - bwd) > 1e-3 * std::max(1.0, std::abs(central))) {
      ++r.skipped;
      if (r.skipped > samples) break;
      continue;
    }
    const double rel = std::abs(grad[i] - central) / std::max({std::abs(grad[i]), std::abs(central), 1e-5});
    r.worst = std::max(r.worst, rel);
    ++r.checked;
  }
  return r;
}

TEST(ToyModel, BackwardMatchesFiniteDifferences) {
  const std::vector<SyntheticScene> scenes{generate_scene(CounterRng(21)), generate_scene(CounterRng(22))};
  const Batch batch = make_batch(scenes, CenternessMode::Oriented, 4.0);
  for (StrategyKind k : all_strategies()) {
    ToyModel m(small_config(k, 2));
    m.initialize(CounterRng(31));
    // Push the heads away from zero so every branch carries signal.
    CounterRng jitter(77);
    for (double& p : m.parameters()) p += 0.05 * jitter.normal();
    const GradCheck r = check_gradient(m, batch, true, 250, CounterRng(99));
    EXPECT_EQ(r.checked, 250) << to_string(k);
    EXPECT_LT(r.worst, 1e-4) << to_string(k);
    EXPECT_LT(r.skipped, 25) << to_string(k);
  }
}

TEST(ToyTrain, LearningRateSchedule) {
  TrainConfig c;
  EXPECT_EQ(warmup_iterations(c), 33);
  EXPECT_DOUBLE_EQ(learning_rate(c, 0), 0.001);
  EXPECT_NEAR(learning_rate(c, 33), 0.01, 1e-15);
  EXPECT_LT(learning_rate(c, 10), learning_rate(c, 20));
  EXPECT_NEAR(learning_rate(c, 3999), 0.01, 1e-15);
  EXPECT_NEAR(learning_rate(c, 4000), 0.001, 1e-15);
  EXPECT_NEAR(learning_rate(c, 5333), 0.001, 1e-15);
  EXPECT_NEAR(learning_rate(c, 5334), 0.0001, 1e-15);
  c.iterations = 90000;
  EXPECT_EQ(warmup_iterations(c), 500);
  EXPECT_NEAR(learning_rate(c, 60000), 0.001, 1e-15);
  EXPECT_NEAR(learning_rate(c, 80000), 0.0001, 1e-15);
}

TEST(ToyTrain, SgdStep) {
  std::vector<double> p{1.0, -2.0}, v{0.5, 0.0};
  const std::vector<double> g{0.1, 0.2};
  sgd_step(p, v, g, 0.1, 0.9, 0.01);
  EXPECT_DOUBLE_EQ(v[0], 0.45 + 0.1 + 0.01);
  EXPECT_DOUBLE_EQ(v[1], 0.2 - 0.02);
  EXPECT_DOUBLE_EQ(p[0], 1.0 - 0.1 * v[0]);
}

TEST(ToyTrain, ZeroIterationsLogsOnce) {
  TrainConfig c;
  c.iterations = 0;
  c.validation_scenes = 3;
  const TrainResult r = train(c);
  ASSERT_EQ(r.log.size(), 1u);
  EXPECT_TRUE(std::isfinite(r.log[0].loss));
  ASSERT_EQ(r.validation.size(), 1u);
  // Same parameters as a second untrained run.
  EXPECT_TRUE(std::ranges::equal(train(c).model.parameters(), r.model.parameters()));
}

TEST(ToyTrain, DeterministicForFixedSeed) {
  TrainConfig c;
  c.iterations = 40;
  c.validation_interval = 20;
  c.validation_scenes = 4;
  c.strategy = StrategyKind::CenterToCorner;
  const TrainResult a = train(c);
  // Odd-sized live allocations move later buffers to other addresses; the
  // result must not depend on heap layout.
  std::vector<std::vector<double>> shift;
  for (std::size_t n : {1u, 3u, 5u, 7u, 1001u}) shift.emplace_back(n);
  const TrainResult b = train(c);
  EXPECT_TRUE(std::ranges::equal(a.model.parameters(), b.model.parameters()));
  EXPECT_EQ(iteration_log_csv(a.log), iteration_log_csv(b.log));
  EXPECT_EQ(validation_csv(a.validation), validation_csv(b.validation));
  EXPECT_EQ(a.validation.size(), 2u);
  c.seed = 1;
  EXPECT_FALSE(std::ranges::equal(train(c).model.parameters(), a.model.parameters()));
}

TEST(ToyTrain, DivergenceNamesIteration) {
  TrainConfig c;
  c.iterations = 200;
  c.base_lr = 1e6;
  c.validation_scenes = 1;
  try {
    train(c);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GE(e.iteration(), 0);
    EXPECT_LE(e.iteration(), 200);
  }
}

// One SGD step on a batch holding a single positive location lowers the loss
// on that batch for small learning rates.
TEST(ToyTrain, GradientFlowLineSearch) {
  const SyntheticScene scene = generate_scene(CounterRng(5));
  Batch full = make_batch(std::span(&scene, 1), CenternessMode::Oriented, 4.0);
  int pos = -1;
  for (std::size_t i = 0; i < full.targets.size(); ++i) {
    if (full.targets[i].positive()) {
      pos = static_cast<int>(i);
      break;
    }
  }
  ASSERT_GE(pos, 0);
  Batch one;
  one.features = FeatureMatrix{1, full.features.cols,
                               std::vector<double>(full.features.row(pos), full.features.row(pos) + full.features.cols)};
  one.targets = {full.targets[static_cast<std::size_t>(pos)]};
  for (StrategyKind k : all_strategies()) {
    ToyModel m(small_config(k));
    m.initialize(CounterRng(3));
    std::vector<double> grad(m.num_parameters());
    const double before = m.loss_and_gradient(one.features, one.targets, {}, true, grad).term.value;
    for (double lr : {1e-3, 1e-4, 1e-5}) {
      ToyModel step = m;
      std::vector<double> v(m.num_parameters(), 0.0);
      sgd_step(step.parameters(), v, grad, lr, 0.9, 0.0);
      EXPECT_LT(step.loss(one.features, one.targets, {}, true), before) << to_string(k) << " lr " << lr;
    }
  }
}

TEST(ToyTrain, RawDetectionsAndModes) {
  EXPECT_EQ(parse_centerness_mode("axis"), CenternessMode::AxisAligned);
  EXPECT_EQ(parse_centerness_mode("none"), CenternessMode::None);
  EXPECT_THROW(parse_centerness_mode("round"), InvalidParams);
  ToyModel m(small_config(StrategyKind::Direct));
  m.initialize(CounterRng(4));
  ModelOutput out = m.predict(extract_features(generate_scene(CounterRng(1))));
  EXPECT_TRUE(raw_detections(out, 128, 128, true).empty());  // prior 0.01 < 0.05
  std::fill(out.class_probs.begin(), out.class_probs.end(), 0.5);
  for (auto& c : out.corners) c = anchor_corners(4.0);
  std::fill(out.centerness.begin(), out.centerness.end(), 0.25);
  const auto dets = raw_detections(out, 128, 128, true);
  EXPECT_EQ(dets.size(), 341u * 3u);
  EXPECT_DOUBLE_EQ(dets[0].score, std::sqrt(0.5 * 0.25));
  EXPECT_DOUBLE_EQ(raw_detections(out, 128, 128, false)[0].score, std::sqrt(0.5));
}

TEST(ToyTrain, PearsonAndMeanStd) {
  const std::vector<double> x{1, 2, 3, 4}, y{2, 4, 6, 8}, z{4, 3, 2, 1};
  EXPECT_NEAR(pearson_r(x, y), 1.0, 1e-15);
  EXPECT_NEAR(pearson_r(x, z), -1.0, 1e-15);
  EXPECT_EQ(pearson_r(x, std::vector<double>{1, 1, 1, 1}), 0.0);
  const MeanStd ms = mean_std(x);
  EXPECT_DOUBLE_EQ(ms.mean, 2.5);
  EXPECT_NEAR(ms.std, std::sqrt(5.0 / 3.0), 1e-15);
}

TEST(ToyTrain, ComparisonShapeAndDeterminism) {
  TrainConfig c;
  c.iterations = 5;
  c.validation_scenes = 2;
  const std::vector<StrategyKind> strategies{StrategyKind::Direct, StrategyKind::CenterToCorner};
  const std::vector<CenternessMode> modes{CenternessMode::None, CenternessMode::Oriented};
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  const ComparisonReport a = run_comparison(strategies, modes, seeds, c);
  EXPECT_EQ(a.rows.size(), 20u);
  EXPECT_EQ(a.summaries.size(), 4u);
  EXPECT_EQ(a.heatmaps.size(), 4u);
  EXPECT_EQ(a.summary(StrategyKind::CenterToCorner, CenternessMode::None).runs, 5u);
  const ComparisonReport b = run_comparison(strategies, modes, seeds, c);
  EXPECT_EQ(comparison_csv(a), comparison_csv(b));
  EXPECT_EQ(comparison_summary_csv(a), comparison_summary_csv(b));
  EXPECT_TRUE(comparison_csv(a).starts_with("strategy,mode,seed,mAP,corner_l2,centerness_r\n"));
  EXPECT_THROW(run_comparison(strategies, modes, std::vector<std::uint64_t>{1, 2}, c), InvalidParams);
}

TEST(ToyTrain, CapacitySweepShape) {
  TrainConfig c;
  c.iterations = 3;
  c.validation_scenes = 2;
  const std::vector<int> depths{1, 2, 3};
  const auto rows = capacity_sweep(depths, std::vector<std::uint64_t>{0}, c);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_LT(rows[0].params, rows[1].params);
  EXPECT_LT(rows[1].params, rows[2].params);
  EXPECT_TRUE(capacity_csv(rows).starts_with("depth,params,mAP,seed\n1,"));
}

}  // namespace
}  // namespace obb
