#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "obb/grid.hpp"

namespace obb {

/// How the regression head's raw outputs become the four corners.
enum class StrategyKind { Direct, Offset, Iterative, CenterToCorner };

std::string_view to_string(StrategyKind kind);
/// Accepts "direct", "offset", "iterative", "center-to-corner". Throws InvalidParams.
StrategyKind parse_strategy(std::string_view name);
std::array<StrategyKind, 4> all_strategies();

struct HeadOutput {
  std::vector<double> features;
  RegressionTarget raw_corners{};
  std::optional<std::array<double, 2>> raw_center;
};

inline constexpr double kDefaultAnchorScale = 4.0;

/// Corners predicted as offsets from the location.
Quad direct_decode(const RegressionTarget& raw_corners, const GridLocation& loc);

/// Corners of the single base anchor: an axis-aligned square of side
/// anchor_scale (in stride units) centred on the location, canonical order.
RegressionTarget anchor_corners(double anchor_scale = kDefaultAnchorScale);

/// raw_corners + anchor corners, in stride units.
RegressionTarget offset_corners(const RegressionTarget& raw_corners, double anchor_scale = kDefaultAnchorScale);

/// Corners predicted as offsets from the corners of the base anchor.
Quad offset_decode(const RegressionTarget& raw_corners, const GridLocation& loc,
                   double anchor_scale = kDefaultAnchorScale);

/// out = W in + b with W stored row-major (out x in).
struct AffineHead {
  int inputs = 0;
  int outputs = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  static AffineHead zeros(int inputs, int outputs);
  void apply(std::span<const double> in, std::span<double> out) const;
};

/// Four chained heads: head k reads the features followed by corners 0..k-1,
/// so its input width is F + 2k.
struct IterativeHeadParams {
  int feature_width = 0;
  std::array<AffineHead, 4> heads;

  static IterativeHeadParams zeros(int feature_width);
  /// Throws InvalidParams when head shapes do not follow F + 2k -> 2.
  void validate() const;
};

/// c0 = h0(X); c1 = h1(X, c0); c2 = h2(X, c0, c1); c3 = h3(X, c0, c1, c2).
RegressionTarget iterative_decode(std::span<const double> features, const IterativeHeadParams& params);

struct IterativeHeadGrads {
  IterativeHeadParams params;       // same layout as the forward parameters
  std::vector<double> features;     // dL/dX
};

/// Backpropagates dL/d(corners) through the chain, including the paths
/// through earlier corners.
IterativeHeadGrads iterative_backward(std::span<const double> features, const IterativeHeadParams& params,
                                      const RegressionTarget& corners_grad);

/// raw corner pairs plus the broadcast center, in stride units.
RegressionTarget center_to_corner_offsets(const std::array<double, 2>& raw_center, const RegressionTarget& raw_corners);

struct CenterToCornerResult {
  Point center;
  std::optional<Quad> quad;  // empty when the decoded corners are invalid
};

CenterToCornerResult center_to_corner_decode(const std::array<double, 2>& raw_center,
                                             const RegressionTarget& raw_corners, const GridLocation& loc);

}  // namespace obb
