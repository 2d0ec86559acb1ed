#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "obb/assignment.hpp"
#include "obb/strategies.hpp"

namespace obb {

/// A loss value with its gradient w.r.t. each of the function's inputs.
struct LossTerm {
  double value = 0.0;
  std::vector<double> gradient;
};

inline constexpr double kProbClamp = 1e-7;
inline constexpr double kFocalAlpha = 0.25;
inline constexpr double kFocalGamma = 2.0;
inline constexpr double kSmoothL1Beta = 1.0 / 9.0;

double clamp_probability(double p);

/// Positive: -alpha (1-p)^gamma ln p. Negative: -(1-alpha) p^gamma ln(1-p).
/// Throws InvalidProbability unless 0 < p < 1.
LossTerm focal_loss(double prob, bool is_positive, double alpha = kFocalAlpha, double gamma = kFocalGamma);

LossTerm smooth_l1(double diff, double beta = kSmoothL1Beta);

/// Minimum over the four cyclic vertex shifts of the target of the summed
/// SmoothL1; the gradient (w.r.t. pred) follows the first minimising shift.
LossTerm eight_point_loss(std::span<const double, 8> pred, std::span<const double, 8> target,
                          double beta = kSmoothL1Beta, int* argmin_shift = nullptr);

/// The target with vertex j replaced by vertex (j + shift) mod 4.
std::array<double, 8> cyclic_shift(std::span<const double, 8> target, int shift);

/// -(t ln p + (1-t) ln(1-p)) with p clamped to [1e-7, 1-1e-7]. The gradient is
/// evaluated at the clamped probability.
LossTerm bce_loss(double pred, double target);

struct LossWeights {
  double cls = 10.0;
  double reg = 1.0;
  double ctr = 1.0;
  double center = 1.0;
};

struct NormalizedWeights {
  double cls = 0.0;
  double reg = 0.0;
  double ctr = 0.0;
  double center = 0.0;
};

/// lambda_i / sum_j lambda_j over the active terms; inactive terms get 0.
NormalizedWeights normalize_weights(const LossWeights& w, bool use_centerness, bool use_center);

/// Network outputs at one location, already passed through the strategy:
/// `corners` are final stride-normalized corner offsets.
struct LocationPrediction {
  std::vector<double> class_probs;
  RegressionTarget corners{};
  double centerness = 0.5;
  std::array<double, 2> center{};
};

struct TotalLoss {
  LossTerm term;  // gradient: per location [C probs, 8 corners, center-ness, 2 center]
  double cls = 0.0;
  double reg = 0.0;
  double ctr = 0.0;
  double center = 0.0;
  std::size_t num_positive = 0;
  NormalizedWeights weights;
};

inline std::size_t prediction_arity(int num_classes) { return static_cast<std::size_t>(num_classes) + 11; }

/// Weighted training objective over a batch of locations. Classification is
/// summed over all locations and classes; every term is divided by the
/// number of positives (floored at 1). The center term is active only for
/// the center-to-corner strategy.
TotalLoss total_loss(std::span<const LocationTarget> targets, std::span<const LocationPrediction> preds,
                     int num_classes, const LossWeights& weights, StrategyKind strategy, bool use_centerness = true);

/// Pairwise (tree) summation; the result depends only on the input order.
double pairwise_sum(std::span<const double> values);

}  // namespace obb
