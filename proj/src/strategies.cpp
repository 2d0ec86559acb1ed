#include "obb/strategies.hpp"

#include "obb/errors.hpp"

namespace obb {

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::Direct: return "direct";
    case StrategyKind::Offset: return "offset";
    case StrategyKind::Iterative: return "iterative";
    case StrategyKind::CenterToCorner: return "center-to-corner";
  }
  return "?";
}

StrategyKind parse_strategy(std::string_view name) {
  for (StrategyKind k : all_strategies()) {
    if (to_string(k) == name) return k;
  }
  throw InvalidParams("unknown strategy '" + std::string(name) + "'");
}

std::array<StrategyKind, 4> all_strategies() {
  return {StrategyKind::Direct, StrategyKind::Offset, StrategyKind::Iterative, StrategyKind::CenterToCorner};
}

Quad direct_decode(const RegressionTarget& raw_corners, const GridLocation& loc) {
  return decode_target(raw_corners, loc);
}

RegressionTarget anchor_corners(double anchor_scale) {
  if (!(anchor_scale > 0)) throw InvalidParams("anchor scale must be positive");
  const double h = 0.5 * anchor_scale;
  return {-h, -h, h, -h, h, h, -h, h};
}

RegressionTarget offset_corners(const RegressionTarget& raw_corners, double anchor_scale) {
  RegressionTarget c = anchor_corners(anchor_scale);
  for (int i = 0; i < 8; ++i) c[i] += raw_corners[i];
  return c;
}

Quad offset_decode(const RegressionTarget& raw_corners, const GridLocation& loc, double anchor_scale) {
  return decode_target(offset_corners(raw_corners, anchor_scale), loc);
}

AffineHead AffineHead::zeros(int inputs, int outputs) {
  return {inputs, outputs, std::vector<double>(static_cast<std::size_t>(inputs * outputs), 0.0),
          std::vector<double>(static_cast<std::size_t>(outputs), 0.0)};
}

void AffineHead::apply(std::span<const double> in, std::span<double> out) const {
  for (int o = 0; o < outputs; ++o) {
    double acc = bias[static_cast<std::size_t>(o)];
    const double* w = weight.data() + static_cast<std::size_t>(o) * static_cast<std::size_t>(inputs);
    for (int i = 0; i < inputs; ++i) acc += w[i] * in[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(o)] = acc;
  }
}

IterativeHeadParams IterativeHeadParams::zeros(int feature_width) {
  IterativeHeadParams p;
  p.feature_width = feature_width;
  for (int k = 0; k < 4; ++k) p.heads[k] = AffineHead::zeros(feature_width + 2 * k, 2);
  return p;
}

void IterativeHeadParams::validate() const {
  if (feature_width <= 0) throw InvalidParams("iterative head feature width must be positive");
  for (int k = 0; k < 4; ++k) {
    const AffineHead& h = heads[k];
    if (h.inputs != feature_width + 2 * k || h.outputs != 2 ||
        h.weight.size() != static_cast<std::size_t>(h.inputs * h.outputs) || h.bias.size() != 2) {
      throw InvalidParams("iterative head " + std::to_string(k) + " has the wrong shape");
    }
  }
}

RegressionTarget iterative_decode(std::span<const double> features, const IterativeHeadParams& params) {
  params.validate();
  const int f = params.feature_width;
  if (features.size() != static_cast<std::size_t>(f)) throw InvalidParams("feature width does not match the heads");
  std::vector<double> input(features.begin(), features.end());
  input.reserve(static_cast<std::size_t>(f + 6));
  RegressionTarget corners{};
  for (int k = 0; k < 4; ++k) {
    std::span<double> out(corners.data() + 2 * k, 2);
    params.heads[k].apply(input, out);
    if (k < 3) {
      input.push_back(out[0]);
      input.push_back(out[1]);
    }
  }
  return corners;
}

IterativeHeadGrads iterative_backward(std::span<const double> features, const IterativeHeadParams& params,
                                      const RegressionTarget& corners_grad) {
  const RegressionTarget corners = iterative_decode(features, params);
  const int f = params.feature_width;
  std::vector<double> input(features.begin(), features.end());
  for (int k = 0; k < 6; ++k) input.push_back(corners[k]);

  IterativeHeadGrads g{IterativeHeadParams::zeros(f), std::vector<double>(static_cast<std::size_t>(f), 0.0)};
  // dL/d(input) for the shared [X, c0, c1, c2] vector; corner slots accumulate
  // the downstream paths before their own head is processed.
  std::vector<double> d_input(static_cast<std::size_t>(f + 6), 0.0);
  RegressionTarget d_corner = corners_grad;
  for (int k = 3; k >= 0; --k) {
    const AffineHead& h = params.heads[k];
    AffineHead& gh = g.params.heads[k];
    const double gk[2] = {d_corner[2 * k] + (k < 3 ? d_input[static_cast<std::size_t>(f + 2 * k)] : 0.0),
                          d_corner[2 * k + 1] + (k < 3 ? d_input[static_cast<std::size_t>(f + 2 * k + 1)] : 0.0)};
    for (int o = 0; o < 2; ++o) {
      gh.bias[static_cast<std::size_t>(o)] += gk[o];
      for (int i = 0; i < h.inputs; ++i) {
        const std::size_t wi = static_cast<std::size_t>(o * h.inputs + i);
        gh.weight[wi] += gk[o] * input[static_cast<std::size_t>(i)];
        d_input[static_cast<std::size_t>(i)] += gk[o] * h.weight[wi];
      }
    }
  }
  for (int i = 0; i < f; ++i) g.features[static_cast<std::size_t>(i)] = d_input[static_cast<std::size_t>(i)];
  return g;
}

RegressionTarget center_to_corner_offsets(const std::array<double, 2>& raw_center, const RegressionTarget& raw_corners) {
  RegressionTarget c = raw_corners;
  for (int i = 0; i < 4; ++i) {
    c[2 * i] += raw_center[0];
    c[2 * i + 1] += raw_center[1];
  }
  return c;
}

CenterToCornerResult center_to_corner_decode(const std::array<double, 2>& raw_center,
                                             const RegressionTarget& raw_corners, const GridLocation& loc) {
  const double s = loc.level.stride();
  CenterToCornerResult r{{loc.image_point.x + s * raw_center[0], loc.image_point.y + s * raw_center[1]}, std::nullopt};
  try {
    r.quad = decode_target(center_to_corner_offsets(raw_center, raw_corners), loc);
  } catch (const InvalidQuad&) {
  }
  return r;
}

}  // namespace obb
