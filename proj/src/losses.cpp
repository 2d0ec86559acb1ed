#include "obb/losses.hpp"

#include <algorithm>
#include <cmath>

#include "obb/errors.hpp"

namespace obb {

double clamp_probability(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

LossTerm focal_loss(double p, bool is_positive, double alpha, double gamma) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidProbability("focal loss needs 0 < p < 1");
  if (is_positive) {
    const double q = 1.0 - p;
    const double lp = std::log(p);
    const double value = -alpha * std::pow(q, gamma) * lp;
    const double grad = alpha * (gamma * std::pow(q, gamma - 1.0) * lp - std::pow(q, gamma) / p);
    return {value, {grad}};
  }
  const double lq = std::log1p(-p);
  const double value = -(1.0 - alpha) * std::pow(p, gamma) * lq;
  const double grad = -(1.0 - alpha) * (gamma * std::pow(p, gamma - 1.0) * lq - std::pow(p, gamma) / (1.0 - p));
  return {value, {grad}};
}

LossTerm smooth_l1(double d, double beta) {
  const double ad = std::abs(d);
  if (ad < beta) return {0.5 * d * d / beta, {d / beta}};
  return {ad - 0.5 * beta, {d > 0 ? 1.0 : -1.0}};
}

std::array<double, 8> cyclic_shift(std::span<const double, 8> target, int shift) {
  std::array<double, 8> out{};
  for (int j = 0; j < 4; ++j) {
    const int src = (j + shift) % 4;
    out[2 * j] = target[2 * src];
    out[2 * j + 1] = target[2 * src + 1];
  }
  return out;
}

LossTerm eight_point_loss(std::span<const double, 8> pred, std::span<const double, 8> target, double beta,
                          int* argmin_shift) {
  LossTerm best{0.0, std::vector<double>(8, 0.0)};
  int best_shift = -1;
  std::vector<double> grad(8);
  for (int k = 0; k < 4; ++k) {
    const auto t = cyclic_shift(target, k);
    double value = 0.0;
    for (int i = 0; i < 8; ++i) {
      const LossTerm l = smooth_l1(pred[i] - t[i], beta);
      value += l.value;
      grad[i] = l.gradient[0];
    }
    if (best_shift < 0 || value < best.value) {
      best.value = value;
      best.gradient = grad;
      best_shift = k;
    }
  }
  if (argmin_shift) *argmin_shift = best_shift;
  return best;
}

LossTerm bce_loss(double pred, double target) {
  const double p = clamp_probability(pred);
  const double value = -(target * std::log(p) + (1.0 - target) * std::log1p(-p));
  return {value, {(p - target) / (p * (1.0 - p))}};
}

NormalizedWeights normalize_weights(const LossWeights& w, bool use_centerness, bool use_center) {
  const double ctr = use_centerness ? w.ctr : 0.0;
  const double center = use_center ? w.center : 0.0;
  const double sum = w.cls + w.reg + ctr + center;
  if (!(sum > 0.0)) throw InvalidParams("loss weights must sum to a positive value");
  return {w.cls / sum, w.reg / sum, ctr / sum, center / sum};
}

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

TotalLoss total_loss(std::span<const LocationTarget> targets, std::span<const LocationPrediction> preds,
                     int num_classes, const LossWeights& weights, StrategyKind strategy, bool use_centerness) {
  if (targets.size() != preds.size()) throw InvalidParams("predictions and targets differ in length");
  const bool use_center = strategy == StrategyKind::CenterToCorner;
  TotalLoss out;
  out.weights = normalize_weights(weights, use_centerness, use_center);
  const std::size_t arity = prediction_arity(num_classes);
  const std::size_t n = targets.size();
  out.term.gradient.assign(n * arity, 0.0);

  for (const LocationTarget& t : targets) out.num_positive += t.positive() ? 1 : 0;
  const double norm = static_cast<double>(std::max<std::size_t>(1, out.num_positive));
  const NormalizedWeights& w = out.weights;

  std::vector<double> cls(n, 0.0), reg(n, 0.0), ctr(n, 0.0), center(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const LocationTarget& t = targets[i];
    const LocationPrediction& p = preds[i];
    if (p.class_probs.size() != static_cast<std::size_t>(num_classes)) {
      throw InvalidParams("class probability vector has the wrong length");
    }
    double* g = out.term.gradient.data() + i * arity;
    for (int c = 0; c < num_classes; ++c) {
      const LossTerm l = focal_loss(clamp_probability(p.class_probs[static_cast<std::size_t>(c)]), t.class_id == c);
      cls[i] += l.value;
      g[c] = w.cls * l.gradient[0] / norm;
    }
    if (!t.positive()) continue;

    const LossTerm r = eight_point_loss(p.corners, *t.regression);
    reg[i] = r.value;
    for (int k = 0; k < 8; ++k) g[num_classes + k] = w.reg * r.gradient[static_cast<std::size_t>(k)] / norm;

    if (use_centerness) {
      const LossTerm c = bce_loss(p.centerness, *t.centerness);
      ctr[i] = c.value;
      g[num_classes + 8] = w.ctr * c.gradient[0] / norm;
    }
    if (use_center) {
      for (int k = 0; k < 2; ++k) {
        const LossTerm c = smooth_l1(p.center[static_cast<std::size_t>(k)] - (*t.center_offset)[static_cast<std::size_t>(k)]);
        center[i] += c.value;
        g[num_classes + 9 + k] = w.center * c.gradient[0] / norm;
      }
    }
  }
  out.cls = pairwise_sum(cls) / norm;
  out.reg = pairwise_sum(reg) / norm;
  out.ctr = pairwise_sum(ctr) / norm;
  out.center = pairwise_sum(center) / norm;
  out.term.value = w.cls * out.cls + w.reg * out.reg + w.ctr * out.ctr + w.center * out.center;
  return out;
}

}  // namespace obb
