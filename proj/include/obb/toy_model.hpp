#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "obb/assignment.hpp"
#include "obb/losses.hpp"
#include "obb/rng.hpp"
#include "obb/strategies.hpp"
#include "obb/toy_scene.hpp"

namespace obb {

struct ToyModelConfig {
  int input_width = 192;
  int hidden = 64;
  int num_classes = 3;
  int tower_layers = 1;
  StrategyKind strategy = StrategyKind::Direct;
  double anchor_scale = kDefaultAnchorScale;
};

/// A named block of the flat parameter vector, row-major rows x cols.
struct TensorInfo {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;

  std::size_t size() const noexcept { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

/// Per-location outputs. Corners are the final stride-normalized corner
/// offsets after the strategy; `centers` holds the raw center prediction of
/// the center-to-corner strategy and zeros otherwise.
struct ModelOutput {
  int rows = 0;
  int num_classes = 0;
  std::vector<double> class_probs;  // rows x num_classes
  std::vector<RegressionTarget> corners;
  std::vector<double> centerness;
  std::vector<std::array<double, 2>> centers;

  double prob(int row, int c) const {
    return class_probs[static_cast<std::size_t>(row) * static_cast<std::size_t>(num_classes) + static_cast<std::size_t>(c)];
  }
  LocationPrediction location(int row) const;
};

/// Per-location MLP detector head:
///   trunk     D -> F -> F (ReLU)
///   cls       tower_layers x (F -> F, ReLU), then F -> C (sigmoid)
///   reg       tower_layers x (F -> F, ReLU), then center-ness F -> 1 (sigmoid)
///             and the strategy's corner head
///   center    center-to-corner only: its own tower and an F -> 2 head
/// Iterative corner heads are stored as (2 x (F + 2k)) blocks, the layout of
/// IterativeHeadParams; all other weights are (inputs x outputs).
class ToyModel {
 public:
  explicit ToyModel(const ToyModelConfig& config);

  /// He-normal towers, N(0, 0.01) heads, classification bias -log(99).
  void initialize(CounterRng rng);

  const ToyModelConfig& config() const noexcept { return config_; }
  std::size_t num_parameters() const noexcept { return params_.size(); }
  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }
  const std::vector<TensorInfo>& tensors() const noexcept { return tensors_; }

  ModelOutput predict(const FeatureMatrix& x) const;

  /// total_loss over the rows of x; writes dL/dparams into `grad`
  /// (num_parameters() long). Only positive rows run the regression branch.
  TotalLoss loss_and_gradient(const FeatureMatrix& x, std::span<const LocationTarget> targets,
                              const LossWeights& weights, bool use_centerness, std::span<double> grad) const;

  /// Loss only, for finite-difference checks.
  double loss(const FeatureMatrix& x, std::span<const LocationTarget> targets, const LossWeights& weights,
              bool use_centerness) const;

  IterativeHeadParams iterative_heads() const;

 private:
  struct Dense {
    int w = -1;
    int b = -1;
  };
  struct Pass;

  Dense add_dense(const std::string& name, int inputs, int outputs, bool transposed = false);
  void forward(const FeatureMatrix& x, std::span<const int> reg_rows, Pass& pass) const;
  TotalLoss forward_loss(const FeatureMatrix& x, std::span<const LocationTarget> targets, const LossWeights& weights,
                         bool use_centerness, Pass& pass) const;

  ToyModelConfig config_;
  std::vector<TensorInfo> tensors_;
  std::vector<double> params_;
  std::vector<Dense> trunk_, cls_tower_, reg_tower_, center_tower_;
  Dense cls_head_, ctr_head_, corner_head_, center_head_;
  std::array<Dense, 4> iter_heads_;
};

/// Flat little-endian checkpoint: magic "OBBTOYCK", u32 version, u32 input
/// width, hidden, classes, tower layers, strategy, f64 anchor scale, u32 tensor
/// count, (u32 rows, u32 cols) per tensor, then every parameter as f64.
std::string encode_checkpoint(const ToyModel& model);
ToyModel decode_checkpoint(std::string_view bytes);

}  // namespace obb
