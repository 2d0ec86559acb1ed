#include "obb/strategies.hpp"

#include <gtest/gtest.h>

#include "obb/errors.hpp"
#include "test_support.hpp"

namespace obb {
namespace {

const GridLocation kLoc{FpnLevel(3), 1, 1, Point{16, 16}};
const RegressionTarget kSym{-0.5, -0.5, 0.5, -0.5, 0.5, 0.5, -0.5, 0.5};

RegressionTarget random_target(CounterRng& rng, double scale = 1.0) {
  RegressionTarget t;
  for (double& v : t) v = rng.uniform(-scale, scale);
  return t;
}

IterativeHeadParams random_params(CounterRng& rng, int f) {
  IterativeHeadParams p = IterativeHeadParams::zeros(f);
  for (AffineHead& h : p.heads) {
    for (double& w : h.weight) w = rng.uniform(-0.5, 0.5);
    for (double& b : h.bias) b = rng.uniform(-0.5, 0.5);
  }
  return p;
}

TEST(Strategy, Names) {
  for (StrategyKind k : all_strategies()) EXPECT_EQ(parse_strategy(to_string(k)), k);
  EXPECT_EQ(parse_strategy("center-to-corner"), StrategyKind::CenterToCorner);
  EXPECT_THROW(parse_strategy("corner"), InvalidParams);
}

TEST(DirectDecode, Examples) {
  EXPECT_EQ(direct_decode(kSym, kLoc), Quad::axis_aligned(12, 12, 20, 20));
  EXPECT_THROW(direct_decode(RegressionTarget{}, kLoc), InvalidQuad);
  const Quad q = testing::rotated_rect({18, 15}, 20, 6, 0.3);
  EXPECT_EQ(direct_decode(encode_target(q, kLoc), kLoc), q);
}

TEST(OffsetDecode, Examples) {
  EXPECT_EQ(offset_decode(RegressionTarget{}, kLoc, 1.0), Quad::axis_aligned(12, 12, 20, 20));
  const RegressionTarget anchor = anchor_corners(4.0);
  RegressionTarget cancel;
  for (int i = 0; i < 8; ++i) cancel[i] = -anchor[i];
  EXPECT_THROW(offset_decode(cancel, kLoc), InvalidQuad);

  const Quad q = testing::rotated_rect({18, 15}, 20, 6, 0.3);
  const RegressionTarget t = encode_target(q, kLoc);
  RegressionTarget raw;
  for (int i = 0; i < 8; ++i) raw[i] = t[i] - anchor[i];
  const Quad back = offset_decode(raw, kLoc);
  for (int k = 0; k < 4; ++k) {
    EXPECT_NEAR(back[k].x, q[k].x, 1e-12);
    EXPECT_NEAR(back[k].y, q[k].y, 1e-12);
  }
}

TEST(OffsetDecode, DefaultAnchorIsStrideProportional) {
  EXPECT_EQ(offset_decode(RegressionTarget{}, kLoc), Quad::axis_aligned(0, 0, 32, 32));
  EXPECT_THROW(anchor_corners(0.0), InvalidParams);
}

TEST(IterativeDecode, ZeroParamsGiveZeroCorners) {
  const std::vector<double> x(6, 1.5);
  EXPECT_EQ(iterative_decode(x, IterativeHeadParams::zeros(6)), RegressionTarget{});
}

TEST(IterativeDecode, IdentityOnPreviousCorner) {
  CounterRng rng(1);
  const int f = 5;
  IterativeHeadParams p = random_params(rng, f);
  AffineHead& h1 = p.heads[1];
  std::fill(h1.weight.begin(), h1.weight.end(), 0.0);
  std::fill(h1.bias.begin(), h1.bias.end(), 0.0);
  h1.weight[static_cast<std::size_t>(0 * h1.inputs + f)] = 1.0;
  h1.weight[static_cast<std::size_t>(1 * h1.inputs + f + 1)] = 1.0;
  std::vector<double> x(f);
  for (double& v : x) v = rng.uniform(-1, 1);
  const RegressionTarget c = iterative_decode(x, p);
  EXPECT_EQ(c[2], c[0]);
  EXPECT_EQ(c[3], c[1]);
}

TEST(IterativeDecode, LaterCornersDependOnEarlierHeads) {
  CounterRng rng(2);
  const int f = 4;
  IterativeHeadParams p = random_params(rng, f);
  std::vector<double> x(f);
  for (double& v : x) v = rng.uniform(-1, 1);
  const RegressionTarget before = iterative_decode(x, p);
  IterativeHeadParams q = p;
  q.heads[0].bias[0] += 0.25;
  const RegressionTarget after = iterative_decode(x, q);
  for (int i = 2; i < 8; ++i) EXPECT_NE(before[i], after[i]) << i;

  // With the dependence weights zeroed the same perturbation only moves c0.
  for (int k = 1; k < 4; ++k) {
    for (int o = 0; o < 2; ++o) {
      for (int i = f; i < p.heads[k].inputs; ++i) {
        p.heads[k].weight[static_cast<std::size_t>(o * p.heads[k].inputs + i)] = 0.0;
        q.heads[k].weight[static_cast<std::size_t>(o * q.heads[k].inputs + i)] = 0.0;
      }
    }
  }
  const RegressionTarget b2 = iterative_decode(x, p);
  const RegressionTarget a2 = iterative_decode(x, q);
  for (int i = 2; i < 8; ++i) EXPECT_EQ(b2[i], a2[i]);
}

TEST(IterativeDecode, ZeroDependenceMatchesIndependentHeads) {
  CounterRng rng(3);
  const int f = 7;
  IterativeHeadParams p = random_params(rng, f);
  for (int k = 1; k < 4; ++k) {
    for (int o = 0; o < 2; ++o) {
      for (int i = f; i < p.heads[k].inputs; ++i) p.heads[k].weight[static_cast<std::size_t>(o * p.heads[k].inputs + i)] = 0;
    }
  }
  std::vector<double> x(f);
  for (double& v : x) v = rng.uniform(-1, 1);
  const RegressionTarget c = iterative_decode(x, p);
  for (int k = 0; k < 4; ++k) {
    for (int o = 0; o < 2; ++o) {
      double acc = p.heads[k].bias[static_cast<std::size_t>(o)];
      for (int i = 0; i < f; ++i) acc += p.heads[k].weight[static_cast<std::size_t>(o * p.heads[k].inputs + i)] * x[static_cast<std::size_t>(i)];
      EXPECT_DOUBLE_EQ(c[2 * k + o], acc);
    }
  }
}

TEST(IterativeDecode, ShapeErrors) {
  IterativeHeadParams p = IterativeHeadParams::zeros(4);
  EXPECT_THROW(iterative_decode(std::vector<double>(5), p), InvalidParams);
  p.heads[2] = AffineHead::zeros(4, 2);
  EXPECT_THROW(iterative_decode(std::vector<double>(4), p), InvalidParams);
}

TEST(IterativeBackward, MatchesFiniteDifferences) {
  CounterRng rng(4);
  const int f = 6;
  for (int trial = 0; trial < 50; ++trial) {
    const IterativeHeadParams p = random_params(rng, f);
    std::vector<double> x(f);
    for (double& v : x) v = rng.uniform(-1, 1);
    const RegressionTarget w = random_target(rng);
    auto loss = [&](const IterativeHeadParams& pp, const std::vector<double>& xx) {
      const RegressionTarget c = iterative_decode(xx, pp);
      double l = 0;
      for (int i = 0; i < 8; ++i) l += w[i] * c[i] + 0.5 * c[i] * c[i];
      return l;
    };
    const RegressionTarget c = iterative_decode(x, p);
    RegressionTarget dc;
    for (int i = 0; i < 8; ++i) dc[i] = w[i] + c[i];
    const IterativeHeadGrads g = iterative_backward(x, p, dc);
    const double h = 1e-6;
    for (int k = 0; k < 4; ++k) {
      for (std::size_t wi = 0; wi < p.heads[k].weight.size(); ++wi) {
        IterativeHeadParams a = p, b = p;
        a.heads[k].weight[wi] += h;
        b.heads[k].weight[wi] -= h;
        const double fd = (loss(a, x) - loss(b, x)) / (2 * h);
        EXPECT_NEAR(g.params.heads[k].weight[wi], fd, 1e-6 * std::max(1.0, std::abs(fd)));
      }
      for (std::size_t bi = 0; bi < 2; ++bi) {
        IterativeHeadParams a = p, b = p;
        a.heads[k].bias[bi] += h;
        b.heads[k].bias[bi] -= h;
        const double fd = (loss(a, x) - loss(b, x)) / (2 * h);
        EXPECT_NEAR(g.params.heads[k].bias[bi], fd, 1e-6 * std::max(1.0, std::abs(fd)));
      }
    }
    for (int i = 0; i < f; ++i) {
      auto xa = x, xb = x;
      xa[static_cast<std::size_t>(i)] += h;
      xb[static_cast<std::size_t>(i)] -= h;
      const double fd = (loss(p, xa) - loss(p, xb)) / (2 * h);
      EXPECT_NEAR(g.features[static_cast<std::size_t>(i)], fd, 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(CenterToCorner, Examples) {
  const auto degenerate = center_to_corner_decode({1, 2}, RegressionTarget{}, kLoc);
  EXPECT_FALSE(degenerate.quad.has_value());
  EXPECT_EQ(degenerate.center, (Point{24, 32}));

  const auto plain = center_to_corner_decode({0, 0}, kSym, kLoc);
  ASSERT_TRUE(plain.quad);
  EXPECT_EQ(*plain.quad, direct_decode(kSym, kLoc));

  const auto shifted = center_to_corner_decode({1, 0}, kSym, kLoc);
  ASSERT_TRUE(shifted.quad);
  EXPECT_EQ(*shifted.quad, Quad::axis_aligned(20, 12, 28, 20));
  EXPECT_EQ(shifted.quad->centroid(), (Point{24, 16}));
}

TEST(CenterToCorner, CentroidIdentity) {
  CounterRng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const GridLocation loc = make_location(FpnLevel(3 + static_cast<int>(rng.below(5))), 3, 4);
    const std::array<double, 2> center{rng.uniform(-2, 2), rng.uniform(-2, 2)};
    const Quad q = testing::random_convex_quad(rng, 1.0);
    RegressionTarget raw;
    for (int k = 0; k < 4; ++k) {
      raw[2 * k] = q[k].x;
      raw[2 * k + 1] = q[k].y;
    }
    const auto r = center_to_corner_decode(center, raw, loc);
    ASSERT_TRUE(r.quad);
    const double s = loc.level.stride();
    const Point expect = r.center + s * q.centroid();
    EXPECT_NEAR(r.quad->centroid().x, expect.x, 1e-9);
    EXPECT_NEAR(r.quad->centroid().y, expect.y, 1e-9);
  }
}

TEST(Strategies, TranslationEquivariance) {
  CounterRng rng(6);
  const int f = 5;
  const IterativeHeadParams params = random_params(rng, f);
  std::vector<double> x(f);
  for (double& v : x) v = rng.uniform(-1, 1);
  for (int l = 3; l <= 7; ++l) {
    const FpnLevel level(l);
    const double s = level.stride();
    const GridLocation a = make_location(level, 2, 3), b = make_location(level, 3, 3);
    const Quad q = testing::random_convex_quad(rng, 1.0);
    RegressionTarget raw;
    for (int k = 0; k < 4; ++k) {
      raw[2 * k] = q[k].x;
      raw[2 * k + 1] = q[k].y;
    }
    auto expect_shift = [&](const Quad& qa, const Quad& qb) {
      for (int k = 0; k < 4; ++k) {
        EXPECT_NEAR(qb[k].x, qa[k].x + s, 1e-12);
        EXPECT_NEAR(qb[k].y, qa[k].y, 1e-12);
      }
    };
    expect_shift(direct_decode(raw, a), direct_decode(raw, b));
    expect_shift(offset_decode(raw, a, 0.5), offset_decode(raw, b, 0.5));
    expect_shift(*center_to_corner_decode({0.25, -0.5}, raw, a).quad, *center_to_corner_decode({0.25, -0.5}, raw, b).quad);
    const RegressionTarget it = iterative_decode(x, params);
    try {
      expect_shift(decode_target(it, a), decode_target(it, b));
    } catch (const InvalidQuad&) {
      const auto ca = decode_corners(it, a), cb = decode_corners(it, b);
      for (int k = 0; k < 4; ++k) EXPECT_NEAR(cb[k].x, ca[k].x + s, 1e-12);
    }
  }
}

}  // namespace
}  // namespace obb
