#include <gtest/gtest.h>

#include "support/stub_predictor.hpp"
#include "wtl/chain.hpp"
#include "wtl/tracer.hpp"

namespace wtl {
namespace {

using testing::blank_stack;
using testing::ConstantPredictor;

void expect_eight_connected(const PathTrace& p) {
  for (std::size_t i = 1; i < p.pixels.size(); ++i) EXPECT_EQ(chebyshev(p.pixels[i - 1], p.pixels[i]), 1) << i;
}

TEST(Step, SnapsHeadingToRingDirection) {
  const TracerState s{{10, 10}, Angle::degrees(0)};
  auto n = step(s, Angle::degrees(0), 1);
  EXPECT_EQ(n.cp, (PixelCoord{10, 11}));
  EXPECT_EQ(n.heading.deg(), 0.0);

  n = step(s, Angle::degrees(44), 1);
  EXPECT_EQ(n.cp, (PixelCoord{11, 11}));
  EXPECT_DOUBLE_EQ(n.heading.deg(), 45.0);

  // Ring 2 has a direction at atan2(1, 2) = 26.57 degrees.
  n = step(s, Angle::degrees(20), 2);
  EXPECT_EQ(n.cp, (PixelCoord{11, 12}));
  EXPECT_NEAR(n.heading.deg(), 26.565, 1e-3);

  // Heading plus turn wraps through 180.
  n = step({{10, 10}, Angle::degrees(170)}, Angle::degrees(20), 3);
  EXPECT_EQ(n.cp, (PixelCoord{9, 7}));
}

TEST(Walk, StraightLineUntilItLeavesTheImage) {
  const auto stack = blank_stack(8, 12);
  ConstantPredictor straight(0);
  const auto p = walk(stack, {{3, 2}, Angle::degrees(0)}, 100, straight, constant_step(2));
  EXPECT_TRUE(p.left_image);
  ASSERT_EQ(p.pixels.size(), 10u);  // columns 2..11
  EXPECT_EQ(p.pixels.back(), (PixelCoord{3, 11}));
  expect_eight_connected(p);
}

TEST(Walk, ConstantTurnCirclesBackWithoutLeaving) {
  const auto stack = blank_stack(20, 20);
  ConstantPredictor turn(45);
  const auto p = walk(stack, {{10, 10}, Angle::degrees(0)}, 8, turn);
  EXPECT_FALSE(p.left_image);
  EXPECT_EQ(p.pixels.size(), 9u);
  EXPECT_EQ(p.pixels.back(), p.pixels.front());
  expect_eight_connected(p);
}

TEST(Walk, OracleFollowsRectangleForFullLoop) {
  BinaryMask gt(24, 34);
  for (int c = 2; c <= 30; ++c) gt(2, c) = gt(20, c) = 1;
  for (int r = 2; r <= 20; ++r) gt(r, 2) = gt(r, 30) = 1;
  const auto chain = trace_gt_chain(gt);
  OraclePredictor oracle(chain);
  const TracerState start{chain.at(0), offset_to_angle(chain.at(3) - chain.at(0))};
  for (int size : {1, 2, 3}) {
    const auto p = walk(blank_stack(24, 34), start, static_cast<int>(chain.size()), oracle, constant_step(size));
    expect_eight_connected(p);
    for (auto px : p.pixels) {
      int best = 1 << 20;
      for (auto q : chain.pixels()) best = std::min(best, chebyshev(px, q));
      EXPECT_LE(best, 1) << "step " << size;
    }
  }
  const auto p = walk(blank_stack(24, 34), start, static_cast<int>(chain.size()), oracle);
  // The look-ahead cuts each corner diagonally; every other ring pixel is visited.
  BinaryMask seen(24, 34);
  for (auto px : p.pixels) seen[px] = 1;
  const std::vector<PixelCoord> corners{{2, 2}, {2, 30}, {20, 2}, {20, 30}};
  for (auto q : chain.pixels()) {
    bool near_corner = false;
    for (auto k : corners) near_corner |= chebyshev(q, k) <= 2;
    if (!near_corner) EXPECT_TRUE(seen[q]) << q.row << "," << q.col;
  }
}

TEST(Walk, RejectsBadArguments) {
  ConstantPredictor straight(0);
  EXPECT_THROW(walk(blank_stack(4, 4), {{5, 0}, Angle::degrees(0)}, 1, straight), Error);
  EXPECT_THROW(walk(blank_stack(4, 4), {{1, 1}, Angle::degrees(0)}, -1, straight), Error);
  EXPECT_THROW(constant_step(4), Error);
}

TEST(MirrorPath, IsAnInvolutionThatFlipsOrigin) {
  PathTrace p;
  p.pixels = {{1, 0}, {1, 1}, {2, 2}};
  const auto m = mirror_path(p, 10);
  EXPECT_EQ(m.pixels, (std::vector<PixelCoord>{{1, 9}, {1, 8}, {2, 7}}));
  EXPECT_EQ(m.origin, PathOrigin::anticlockwise);
  EXPECT_EQ(mirror_path(m, 10), p);
}

TEST(MirrorPath, MirroredWalkEqualsWalkOnMirroredImage) {
  const auto stack = blank_stack(16, 16);
  ConstantPredictor turn(30);
  const TracerState s{{8, 4}, Angle::degrees(-90)};
  const auto direct = walk(stack, s, 12, turn);
  const TracerState ms{{8, 11}, Angle::degrees(-90)};
  const auto pm = turn.mirrored(16);
  const auto via_mirror = mirror_path(walk(mirror_cols(stack), ms, 12, *pm), 16);
  EXPECT_EQ(via_mirror.pixels, direct.pixels);
}

}  // namespace
}  // namespace wtl
