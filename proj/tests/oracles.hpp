#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance runner.

#include <array>
#include <cmath>
#include <tuple>
#include <vector>

#include "obb/losses.hpp"
#include "obb/postprocess.hpp"
#include "test_support.hpp"

namespace obb::testing {

using Vec8 = std::array<double, 8>;

inline Vec8 random_vec(CounterRng& rng, double scale) {
  Vec8 v;
  for (double& x : v) x = rng.uniform(-scale, scale);
  return v;
}

/// Minimum over the four vertex rotations of the summed SmoothL1, summed in
/// vertex order.
inline double brute_force_eight_point(const Vec8& pred, const Vec8& target) {
  double best = INFINITY;
  for (int shift = 0; shift < 4; ++shift) {
    double sum = 0.0;
    for (int j = 0; j < 4; ++j) {
      const int src = (j + shift) % 4;
      sum += smooth_l1(pred[2 * j] - target[2 * src]).value;
      sum += smooth_l1(pred[2 * j + 1] - target[2 * src + 1]).value;
    }
    best = std::min(best, sum);
  }
  return best;
}

inline bool same_detection(const Detection& a, const Detection& b) {
  return a.quad == b.quad && a.class_id == b.class_id && a.confidence == b.confidence &&
         a.centerness == b.centerness && a.score == b.score;
}

/// Repeatedly takes the best remaining detection and deletes everything of the
/// same class that overlaps it by more than t.
inline std::vector<Detection> reference_nms(std::vector<Detection> dets, double t) {
  std::vector<Detection> out;
  std::vector<std::size_t> idx(dets.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  while (!idx.empty()) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < idx.size(); ++j) {
      const Detection& a = dets[idx[j]];
      const Detection& b = dets[idx[best]];
      const auto ka = std::make_tuple(-a.score, -a.confidence, a.class_id, idx[j]);
      const auto kb = std::make_tuple(-b.score, -b.confidence, b.class_id, idx[best]);
      if (ka < kb) best = j;
    }
    const Detection chosen = dets[idx[best]];
    out.push_back(chosen);
    std::vector<std::size_t> rest;
    for (std::size_t j = 0; j < idx.size(); ++j) {
      if (j == best) continue;
      const Detection& d = dets[idx[j]];
      if (d.class_id == chosen.class_id && iou(d.quad, chosen.quad) > t) continue;
      rest.push_back(idx[j]);
    }
    idx.swap(rest);
  }
  return out;
}

/// Random detections over three classes; coarse p and o values create exact
/// score ties.
inline std::vector<Detection> random_dets(CounterRng& rng, int n, double extent = 200) {
  std::vector<Detection> dets;
  for (int i = 0; i < n; ++i) {
    const Quad q = random_convex_quad(rng, rng.uniform(5, 30), {rng.uniform(0, extent), rng.uniform(0, extent)});
    const double p = std::round(rng.uniform() * 20) / 20;
    const double o = std::round(rng.uniform() * 4) / 4;
    dets.push_back(make_detection(q, static_cast<int>(rng.below(3)), p, o));
  }
  return dets;
}

}  // namespace obb::testing
