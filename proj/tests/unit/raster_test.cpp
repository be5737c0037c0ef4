#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "wtl/raster.hpp"
#include "wtl/rng.hpp"

namespace wtl {
namespace {

InputStack blank_stack(int h, int w) {
  return stack_inputs(RgbImage::zeros(h, w), Raster2D(h, w));
}

InputStack stack_with_softmap(const Raster2D& soft) {
  return stack_inputs(RgbImage::zeros(soft.height(), soft.width()), soft);
}

// Independent minimizer: maximize the cosine between the ring direction and
// the heading using unit vectors, no wrapped differences involved.
Offset brute_force_offset(double heading_deg, int step) {
  const double hr = heading_deg * std::numbers::pi / 180.0;
  const double hx = std::cos(hr), hy = std::sin(hr);
  Offset best{};
  double best_cos = -2;
  for (int dr = -step; dr <= step; ++dr) {
    for (int dc = -step; dc <= step; ++dc) {
      if (std::max(std::abs(dr), std::abs(dc)) != step) continue;
      const double n = std::hypot(dr, dc);
      const double cs = (dc * hx + dr * hy) / n;
      if (cs > best_cos + 1e-12) {
        best_cos = cs;
        best = {dr, dc};
      }
    }
  }
  return best;
}

TEST(WrapAngle, Examples) {
  EXPECT_DOUBLE_EQ(wrap_angle(190).deg(), -170);
  EXPECT_DOUBLE_EQ(wrap_angle(-180).deg(), 180);
  EXPECT_DOUBLE_EQ(wrap_angle(180).deg(), 180);
  EXPECT_DOUBLE_EQ(wrap_angle(0).deg(), 0);
  EXPECT_DOUBLE_EQ(wrap_angle(-540).deg(), 180);
}

TEST(WrapAngle, RejectsNonFinite) {
  EXPECT_THROW(wrap_angle(std::numeric_limits<double>::infinity()), Error);
  EXPECT_THROW(wrap_angle(std::nan("")), Error);
}

TEST(WrapAngle, IdempotentAndPeriodic) {
  Rng rng = make_rng({11});
  for (int i = 0; i < 10000; ++i) {
    const double a = uniform(rng, -5000, 5000);
    const double w = wrap_angle(a).deg();
    EXPECT_GT(w, -180.0);
    EXPECT_LE(w, 180.0);
    EXPECT_DOUBLE_EQ(wrap_angle(w).deg(), w);
    EXPECT_NEAR(wrap_angle(a + 360).deg(), w, 1e-9);
    EXPECT_NEAR(std::remainder(a - w, 360.0), 0.0, 1e-9);
  }
}

TEST(StackInputs, ShapeAndSoftmapChannel) {
  Raster2D soft(13, 13, 1.0f);
  const auto s = stack_inputs(RgbImage::zeros(13, 13), soft);
  EXPECT_EQ(s.height(), 13);
  EXPECT_EQ(s.width(), 13);
  for (float v : s.softmap().values()) EXPECT_EQ(v, 1.0f);
  for (float v : s.channel(0).values()) EXPECT_EQ(v, 0.0f);
}

TEST(StackInputs, ShapeMismatch) {
  try {
    stack_inputs(RgbImage::zeros(13, 13), Raster2D(12, 13));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_argument);
  }
}

TEST(Ring, Sizes) {
  EXPECT_EQ(ring_offsets(1).size(), 8u);
  EXPECT_EQ(ring_offsets(2).size(), 16u);
  EXPECT_EQ(ring_offsets(3).size(), 24u);
  EXPECT_THROW(ring_offsets(4), Error);
  for (int s = 1; s <= 3; ++s) {
    for (auto o : ring_offsets(s)) EXPECT_EQ(std::max(std::abs(o.row), std::abs(o.col)), s);
  }
}

TEST(AngleToOffset, Examples) {
  EXPECT_EQ(angle_to_offset(Angle::degrees(0), 1), (Offset{0, 1}));
  EXPECT_EQ(angle_to_offset(Angle::degrees(90), 1), (Offset{1, 0}));
  EXPECT_EQ(angle_to_offset(Angle::degrees(45), 2), (Offset{2, 2}));
  EXPECT_EQ(angle_to_offset(Angle::degrees(180), 1), (Offset{0, -1}));
}

TEST(AngleToOffset, TieGoesCounterclockwise) {
  // 22.5 is exactly between 0 and 45 on the unit ring.
  EXPECT_EQ(angle_to_offset(Angle::degrees(22.5), 1), (Offset{0, 1}));
  EXPECT_EQ(angle_to_offset(Angle::degrees(-22.5), 1), (Offset{-1, 1}));
}

TEST(AngleToOffset, MatchesBruteForceOnRandomHeadings) {
  Rng rng = make_rng({3});
  for (int i = 0; i < 20000; ++i) {
    const double h = uniform(rng, -180, 180);
    for (int s = 1; s <= 3; ++s) {
      const auto got = angle_to_offset(Angle::degrees(h), s);
      const auto want = brute_force_offset(h, s);
      // Ignore headings within 1e-9 deg of a tie.
      const double dg = std::abs(angle_diff(offset_to_angle(got).deg(), h));
      const double dw = std::abs(angle_diff(offset_to_angle(want).deg(), h));
      if (std::abs(dg - dw) > 1e-9) {
        EXPECT_EQ(got, want) << "heading " << h << " step " << s;
      }
      if (s == 1) {
        EXPECT_LE(dg, 22.5 + 1e-9);
      }
    }
  }
}

TEST(OffsetToAngle, Examples) {
  EXPECT_DOUBLE_EQ(offset_to_angle({0, 1}).deg(), 0);
  EXPECT_DOUBLE_EQ(offset_to_angle({1, 1}).deg(), 45);
  EXPECT_DOUBLE_EQ(offset_to_angle({-1, 0}).deg(), -90);
  EXPECT_DOUBLE_EQ(offset_to_angle({0, -1}).deg(), 180);
  EXPECT_THROW(offset_to_angle({0, 0}), Error);
}

TEST(OrientedPatch, ZeroHeadingIsPlainCrop) {
  Rng rng = make_rng({5});
  Raster2D soft(40, 40);
  for (auto& v : soft.data()) v = static_cast<float>(uniform01(rng));
  auto img = RgbImage::zeros(40, 40);
  for (auto& ch : img.channels) {
    for (auto& v : ch.data()) v = static_cast<float>(uniform01(rng));
  }
  const auto stack = stack_inputs(img, soft);
  const PixelCoord cp{20, 17};
  const auto p = extract_oriented_patch(stack, cp, Angle::degrees(0));
  for (int ch = 0; ch < 4; ++ch) {
    for (int r = 0; r < 13; ++r) {
      for (int c = 0; c < 13; ++c) {
        EXPECT_EQ(p(ch, r, c), stack.channel(ch)(cp.row + r - 6, cp.col + c - 6));
      }
    }
  }
}

TEST(OrientedPatch, SouthBecomesEastAtNinetyDegrees) {
  Raster2D soft(30, 30);
  const PixelCoord cp{12, 15};
  soft(cp.row + 3, cp.col) = 1.0f;
  const auto p = extract_oriented_patch(stack_with_softmap(soft), cp, Angle::degrees(90));
  EXPECT_FLOAT_EQ(p(3, 6, 9), 1.0f);
  float total = 0;
  for (int r = 0; r < 13; ++r) {
    for (int c = 0; c < 13; ++c) total += p(3, r, c);
  }
  EXPECT_FLOAT_EQ(total, 1.0f);
}

TEST(OrientedPatch, HandRotatedThirtyDegrees) {
  // Pixel at canonical (u=4, v=0) samples the image at
  // (row, col) = cp + 4 * (sin 30, cos 30) = cp + (2, 3.4641).
  Raster2D soft(30, 30);
  const PixelCoord cp{10, 10};
  soft(12, 13) = 1.0f;
  const auto p = extract_oriented_patch(stack_with_softmap(soft), cp, Angle::degrees(30));
  const double frac = 4 * std::cos(std::numbers::pi / 6) - 3;  // 0.4641 toward col 14
  EXPECT_NEAR(p(3, 6, 10), 1.0 - frac, 1e-6);
}

TEST(OrientedPatch, CornerIsZeroPadded) {
  Raster2D soft(20, 20, 1.0f);
  const auto p = extract_oriented_patch(stack_with_softmap(soft), {0, 0}, Angle::degrees(0));
  EXPECT_EQ(p(3, 0, 0), 0.0f);
  EXPECT_EQ(p(3, 5, 12), 0.0f);
  EXPECT_EQ(p(3, 6, 6), 1.0f);
  EXPECT_EQ(p(3, 12, 12), 1.0f);
}

TEST(OrientedPatch, OutOfBoundsCenter) {
  EXPECT_THROW(extract_oriented_patch(blank_stack(10, 10), {10, 0}, Angle::degrees(0)), Error);
  EXPECT_THROW(extract_oriented_patch(blank_stack(10, 10), {-1, 3}, Angle::degrees(0)), Error);
}

TEST(OrientedPatch, RadiallySymmetricCenterInvariant) {
  Raster2D soft(41, 41);
  for (int r = 0; r < 41; ++r) {
    for (int c = 0; c < 41; ++c) {
      const double d = std::hypot(r - 20, c - 20);
      soft(r, c) = static_cast<float>(std::exp(-d * d / 18.0));
    }
  }
  const auto stack = stack_with_softmap(soft);
  Rng rng = make_rng({8});
  for (int i = 0; i < 100; ++i) {
    const auto p = extract_oriented_patch(stack, {20, 20}, Angle::degrees(uniform(rng, -180, 180)));
    EXPECT_NEAR(p(3, 6, 6), soft(20, 20), 1e-6);
  }
}

TEST(RasterizeSegment, EightConnected) {
  for (int s = 1; s <= 3; ++s) {
    for (auto o : ring_offsets(s)) {
      const auto pts = rasterize_segment({5, 5}, PixelCoord{5, 5} + o);
      ASSERT_EQ(pts.size(), static_cast<std::size_t>(s));
      EXPECT_EQ(pts.back(), (PixelCoord{5 + o.row, 5 + o.col}));
      PixelCoord prev{5, 5};
      for (auto p : pts) {
        EXPECT_EQ(chebyshev(prev, p), 1);
        prev = p;
      }
    }
  }
}

}  // namespace
}  // namespace wtl
