#include <gtest/gtest.h>

#include <algorithm>

#include "wtl/chain.hpp"
#include "wtl/synth.hpp"

namespace wtl {
namespace {

BinaryMask rect_ring(int h, int w, int r0, int c0, int r1, int c1) {
  BinaryMask m(h, w);
  for (int c = c0; c <= c1; ++c) m(r0, c) = m(r1, c) = 1;
  for (int r = r0; r <= r1; ++r) m(r, c0) = m(r, c1) = 1;
  return m;
}

// Independent orientation check: leaving the top-left-most pixel, an
// on-screen clockwise walk heads right, so its successor lies further right
// than its predecessor.
bool screen_clockwise(const ContourChain& ch) {
  const auto& px = ch.pixels();
  const auto it = std::min_element(px.begin(), px.end(), [](PixelCoord a, PixelCoord b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  const long i = it - px.begin();
  return ch.at(i + 1).col > ch.at(i - 1).col;
}

void expect_valid_loop(const ContourChain& ch, const BinaryMask& gt) {
  ASSERT_EQ(ch.size(), count_foreground(gt));
  for (long i = 0; i < static_cast<long>(ch.size()); ++i) {
    EXPECT_EQ(chebyshev(ch.at(i), ch.at(i + 1)), 1) << "at " << i;
    EXPECT_TRUE(gt[ch.at(i)]);
  }
  EXPECT_GT(ch.signed_area(), 0.0);
  EXPECT_TRUE(screen_clockwise(ch));
}

TEST(ContourChain, CyclicAccess) {
  ContourChain ch({{0, 0}, {0, 1}, {1, 1}});
  EXPECT_EQ(ch.at(3), ch.at(0));
  EXPECT_EQ(ch.at(-1), ch.at(2));
  EXPECT_EQ(ch.at(-7), ch.at(2));
}

TEST(ContourChain, ReversalFlipsAreaSign) {
  const auto ch = trace_gt_chain(rect_ring(12, 12, 2, 2, 8, 9));
  const auto rev = ch.reversed();
  EXPECT_EQ(rev.at(0), ch.at(0));
  EXPECT_EQ(rev.at(1), ch.at(-1));
  EXPECT_DOUBLE_EQ(rev.signed_area(), -ch.signed_area());
  EXPECT_EQ(rev.clockwise().pixels(), ch.pixels());
}

TEST(TraceGtChain, RectangleRingIsClockwise) {
  const auto gt = rect_ring(12, 14, 1, 2, 9, 11);
  const auto ch = trace_gt_chain(gt);
  expect_valid_loop(ch, gt);
  EXPECT_EQ(ch.size(), 2u * (9 + 8));
  EXPECT_DOUBLE_EQ(ch.signed_area(), 9.0 * 8.0);
}

TEST(TraceGtChain, SyntheticScenesGiveValidLoops) {
  SceneParams p;
  p.noise = 0;
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const auto s = gen_scene(p, seed);
    expect_valid_loop(trace_gt_chain(s.gt_contour), s.gt_contour);
  }
}

TEST(TraceGtChain, MirroredChainMatchesMirroredMask) {
  SceneParams p;
  p.noise = 0;
  const auto s = gen_scene(p, 9);
  const auto ch = trace_gt_chain(s.gt_contour);
  const auto m = ch.mirrored(p.width);
  const auto flipped = mirror_cols(s.gt_contour);
  EXPECT_EQ(m.to_mask(p.height, p.width), flipped);
  expect_valid_loop(m, flipped);
}

TEST(TraceGtChain, RejectsInvalidGroundTruth) {
  auto expect_bad = [](const BinaryMask& m) {
    try {
      trace_gt_chain(m);
      ADD_FAILURE() << "accepted invalid ground truth";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::invalid_ground_truth);
    }
  };
  expect_bad(BinaryMask(8, 8));

  BinaryMask arc(6, 10);
  for (int c = 1; c < 9; ++c) arc(3, c) = 1;
  expect_bad(arc);

  auto two = rect_ring(20, 20, 1, 1, 6, 6);
  const auto other = rect_ring(20, 20, 10, 10, 16, 16);
  for (std::size_t i = 0; i < two.size(); ++i) two.data()[i] |= other.data()[i];
  expect_bad(two);

  // A spur hanging off a ring leaves an endpoint.
  auto spur = rect_ring(16, 16, 4, 4, 12, 12);
  spur(3, 8) = spur(2, 8) = 1;
  expect_bad(spur);

  // A chord across a ring is a T-junction at both ends.
  auto chord = rect_ring(16, 16, 2, 2, 12, 12);
  for (int c = 3; c < 12; ++c) chord(7, c) = 1;
  expect_bad(chord);
}

}  // namespace
}  // namespace wtl
