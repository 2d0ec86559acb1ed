#include "obb/grid.hpp"

#include <gtest/gtest.h>

#include "obb/errors.hpp"
#include "test_support.hpp"

namespace obb {
namespace {

TEST(FpnLevel, Strides) {
  const auto levels = production_levels();
  const int expected[] = {8, 16, 32, 64, 128};
  for (std::size_t i = 0; i < levels.size(); ++i) EXPECT_EQ(levels[i].stride(), expected[i]);
  EXPECT_EQ(FpnLevel(0).stride(), 1);
  EXPECT_THROW(FpnLevel(8), InvalidParams);
  EXPECT_THROW(FpnLevel(-1), InvalidParams);
}

TEST(GridShape, Examples) {
  EXPECT_EQ(grid_shape(FpnLevel(5), 128, 128), (GridShape{4, 4}));
  EXPECT_EQ(grid_shape(FpnLevel(3), 128, 128), (GridShape{16, 16}));
  EXPECT_EQ(grid_shape(FpnLevel(7), 1024, 1024), (GridShape{8, 8}));
  EXPECT_EQ(grid_shape(FpnLevel(3), 100, 130), (GridShape{13, 17}));
  EXPECT_THROW(grid_shape(FpnLevel(3), 0, 10), InvalidImage);
  EXPECT_THROW(grid_shape(FpnLevel(3), 10, -1), InvalidImage);
}

TEST(LocationToImage, Examples) {
  EXPECT_EQ(location_to_image(FpnLevel(5), 0, 0), (Point{16, 16}));
  EXPECT_EQ(location_to_image(FpnLevel(5), 1, 1), (Point{48, 48}));
  EXPECT_EQ(location_to_image(FpnLevel(3), 1, 2), (Point{12, 20}));
  EXPECT_EQ(location_to_image(FpnLevel(0), 0, 0), (Point{1, 1}));  // ceil(1/2) = 1
}

TEST(LocationToImage, StrictlyMonotone) {
  for (int l = 0; l <= 7; ++l) {
    const FpnLevel level(l);
    for (int i = 0; i < 50; ++i) {
      EXPECT_LT(location_to_image(level, i, 3).x, location_to_image(level, i + 1, 3).x);
      EXPECT_LT(location_to_image(level, 3, i).y, location_to_image(level, 3, i + 1).y);
    }
  }
}

TEST(ResponsibilityTiling, EveryPixelInExactlyOneCell) {
  for (const FpnLevel level : production_levels()) {
    const int h = 77, w = 203;
    const GridShape shape = grid_shape(level, h, w);
    const int s = level.stride();
    for (int py = 0; py < h; ++py) {
      for (int px = 0; px < w; ++px) {
        int hits = 0;
        for (int y = 0; y < shape.rows; ++y) {
          for (int x = 0; x < shape.cols; ++x) {
            hits += (px >= x * s && px < (x + 1) * s && py >= y * s && py < (y + 1) * s) ? 1 : 0;
          }
        }
        ASSERT_EQ(hits, 1) << "pixel " << px << "," << py << " stride " << s;
      }
    }
  }
}

TEST(EncodeTarget, Examples) {
  // Test-only stride 1 with a location at (0.5, 0.5).
  GridLocation loc{FpnLevel(0), 0, 0, Point{0.5, 0.5}};
  const RegressionTarget t = encode_target(testing::unit_square(), loc);
  const RegressionTarget expected{-0.5, -0.5, 0.5, -0.5, 0.5, 0.5, -0.5, 0.5};
  EXPECT_EQ(t, expected);

  const Quad sq = Quad::axis_aligned(12, 12, 20, 20);
  const GridLocation loc8{FpnLevel(3), 1, 1, Point{16, 16}};
  EXPECT_EQ(encode_target(sq, loc8), expected);
  EXPECT_EQ(make_location(FpnLevel(3), 1, 1).image_point, (Point{12, 12}));

  const Quad q = Quad::canonicalize({Point{3, 1}, Point{9, 4}, Point{5, 8}, Point{1, 5}});
  const GridLocation at_p0{FpnLevel(4), 0, 0, q[0]};
  const RegressionTarget t0 = encode_target(q, at_p0);
  EXPECT_EQ(t0[0], 0.0);
  EXPECT_EQ(t0[1], 0.0);
}

TEST(DecodeTarget, Examples) {
  const GridLocation loc8{FpnLevel(3), 1, 1, Point{16, 16}};
  const RegressionTarget t{-0.5, -0.5, 0.5, -0.5, 0.5, 0.5, -0.5, 0.5};
  EXPECT_EQ(decode_target(t, loc8), Quad::axis_aligned(12, 12, 20, 20));
  EXPECT_THROW(decode_target(RegressionTarget{}, loc8), InvalidQuad);
}

TEST(EncodeDecode, RoundTripAllLevels) {
  CounterRng rng(7);
  for (const FpnLevel level : production_levels()) {
    for (int i = 0; i < 1000; ++i) {
      const int gx = static_cast<int>(rng.below(20)), gy = static_cast<int>(rng.below(20));
      const GridLocation loc = make_location(level, gx, gy);
      const Quad q = testing::random_convex_quad(rng, 2.0 * level.stride(), loc.image_point +
                                                 Point{rng.uniform(-10, 10), rng.uniform(-10, 10)});
      const Quad back = decode_target(encode_target(q, loc), loc);
      for (int k = 0; k < 4; ++k) {
        EXPECT_NEAR(back[k].x, q[k].x, 1e-9);
        EXPECT_NEAR(back[k].y, q[k].y, 1e-9);
      }
    }
  }
}

}  // namespace
}  // namespace obb
