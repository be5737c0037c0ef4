#include <gtest/gtest.h>

#include <sstream>

#include "support/oracles.hpp"
#include "wtl/eval.hpp"

namespace wtl {
namespace {

BinaryMask rect_ring(int h, int w, int r0, int c0, int r1, int c1) {
  BinaryMask m(h, w);
  for (int c = c0; c <= c1; ++c) m(r0, c) = m(r1, c) = 1;
  for (int r = r0; r <= r1; ++r) m(r, c0) = m(r, c1) = 1;
  return m;
}

BinaryMask block(int h, int w, int r0, int c0, int r1, int c1) {
  BinaryMask m(h, w);
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c) m(r, c) = 1;
  return m;
}

TEST(FillClosedContour, SquareRing) {
  const auto mask = fill_closed_contour(rect_ring(20, 20, 5, 5, 14, 14));
  EXPECT_EQ(count_foreground(mask), 100u);
  EXPECT_EQ(mask, block(20, 20, 5, 5, 14, 14));
}

TEST(FillClosedContour, DiagonalLoopDoesNotLeak) {
  BinaryMask diamond(21, 21);
  for (int k = 0; k <= 6; ++k) {
    diamond(4 + k, 10 + k) = diamond(10 + k, 16 - k) = diamond(16 - k, 10 - k) = diamond(10 - k, 4 + k) = 1;
  }
  const auto mask = fill_closed_contour(diamond);
  EXPECT_GT(count_foreground(mask), count_foreground(diamond));
  EXPECT_EQ(mask(10, 10), 1);
  EXPECT_EQ(mask(0, 0), 0);
  EXPECT_EQ(mask(4, 9), 0);
}

TEST(FillClosedContour, Errors) {
  BinaryMask arc(10, 10);
  for (int c = 1; c < 9; ++c) arc(4, c) = 1;
  EXPECT_EQ(testing::error_kind([&] { fill_closed_contour(arc); }), ErrorKind::invalid_argument);
  // A ring along the whole image border leaves no outside seed.
  EXPECT_EQ(testing::error_kind([] { fill_closed_contour(rect_ring(8, 8, 0, 0, 7, 7)); }), ErrorKind::fill_failure);
}

TEST(Metrics, SetIdentities) {
  const auto gt = block(10, 10, 2, 2, 7, 7);
  auto r = metrics(gt, gt);
  EXPECT_EQ(r.precision, 100.0);
  EXPECT_EQ(r.recall, 100.0);
  EXPECT_EQ(r.iou, 100.0);

  r = metrics(block(10, 10, 0, 0, 1, 1), gt);
  EXPECT_EQ(r.precision, 0.0);
  EXPECT_EQ(r.recall, 0.0);
  EXPECT_EQ(r.iou, 0.0);

  r = metrics(block(10, 10, 2, 2, 7, 4), gt);  // left half
  EXPECT_EQ(r.precision, 100.0);
  EXPECT_EQ(r.recall, 50.0);
  EXPECT_EQ(r.iou, 50.0);
}

TEST(Metrics, EmptyMaskAndEmptyGroundTruth) {
  const auto gt = block(6, 6, 1, 1, 3, 3);
  const auto r = metrics(BinaryMask(6, 6), gt);
  EXPECT_TRUE(r.empty_mask);
  EXPECT_EQ(r.precision, 0.0);
  EXPECT_EQ(r.iou, 0.0);
  EXPECT_THROW(metrics(gt, BinaryMask(6, 6)), Error);
  EXPECT_THROW(metrics(gt, BinaryMask(6, 7)), Error);
}

TEST(ReportTable, OrderingAndMean) {
  MetricReport a{"a", 90, 90, 80, false}, b{"b", 95, 95, 90, false};
  const auto t = report_table({a, b});
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0].image, "b");
  EXPECT_EQ(t.rows[1].image, "a");
  EXPECT_DOUBLE_EQ(t.mean.iou, 85.0);

  const auto single = report_table({a});
  EXPECT_EQ(single.mean.precision, a.precision);
  EXPECT_EQ(single.mean.iou, a.iou);
  EXPECT_THROW(report_table({}), Error);
}

TEST(ReportTable, SingleRowFormatsIntoFirstColumn) {
  const auto t = report_table({{"1", 94.23, 99.60, 93.87, false}});
  std::istringstream in(t.text());
  std::string header, p, r, iou;
  std::getline(in, header);
  std::getline(in, p);
  std::getline(in, r);
  std::getline(in, iou);
  EXPECT_NE(p.find("P  94.23"), std::string::npos) << p;
  EXPECT_NE(r.find("R  99.60"), std::string::npos) << r;
  EXPECT_NE(iou.find("IoU  93.87"), std::string::npos) << iou;
  EXPECT_EQ(t.csv(), "image,precision,recall,iou,empty_mask\n1,94.23,99.60,93.87,0\nmean,94.23,99.60,93.87,0\n");
}

}  // namespace
}  // namespace wtl
