#pragma once

// Segmentation masks from closed contours and the precision / recall / IoU
// report, laid out like a per-image results table sorted by IoU.

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "wtl/errors.hpp"
#include "wtl/morphology.hpp"
#include "wtl/raster.hpp"

namespace wtl {

/// Contour plus everything it encloses: the complement of the background
/// 4-reachable from the border. Accepts any endpoint-free single loop.
inline BinaryMask fill_closed_contour(const BinaryMask& contour) {
  const auto check = check_contour(contour);
  require(check.pixels > 0 && check.endpoints == 0 && check.components == 1,
          "fill_closed_contour: input is not a closed loop (" + std::to_string(check.endpoints) + " endpoints, " +
              std::to_string(check.components) + " components)");
  const auto outside = outside_region(contour);
  if (count_foreground(outside) == 0) fail(ErrorKind::fill_failure, "fill: no background pixel on the image border");
  BinaryMask mask(contour.height(), contour.width());
  for (std::size_t i = 0; i < mask.size(); ++i) mask.data()[i] = outside.data()[i] ? 0 : 1;
  return mask;
}

/// Percentages in [0, 100].
struct MetricReport {
  std::string image;
  double precision = 0;
  double recall = 0;
  double iou = 0;
  bool empty_mask = false;  // precision undefined, reported as 0
};

inline MetricReport metrics(const BinaryMask& mask, const BinaryMask& gt, std::string image = {}) {
  require(mask.same_shape(gt), "metrics: mask and ground truth differ in shape");
  std::size_t inter = 0, m = 0, g = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const bool a = mask.data()[i] != 0, b = gt.data()[i] != 0;
    m += a;
    g += b;
    inter += a && b;
  }
  require(g > 0, "metrics: empty ground-truth mask");
  MetricReport r;
  r.image = std::move(image);
  r.empty_mask = m == 0;
  r.precision = m ? 100.0 * static_cast<double>(inter) / static_cast<double>(m) : 0.0;
  r.recall = 100.0 * static_cast<double>(inter) / static_cast<double>(g);
  r.iou = 100.0 * static_cast<double>(inter) / static_cast<double>(m + g - inter);
  return r;
}

struct ReportTable {
  std::vector<MetricReport> rows;  // descending IoU
  MetricReport mean;

  static std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
  }

  /// One line per image plus a final mean line.
  std::string csv() const {
    std::ostringstream os;
    os << "image,precision,recall,iou,empty_mask\n";
    for (const auto* r : all()) {
      os << r->image << ',' << fmt(r->precision) << ',' << fmt(r->recall) << ',' << fmt(r->iou) << ','
         << (r->empty_mask ? 1 : 0) << '\n';
    }
    return os.str();
  }

  /// Images as columns, P / R / IoU as rows, mean column last.
  std::string text() const {
    const auto cols = all();
    std::vector<std::vector<std::string>> cells(4);
    cells[0].push_back("");
    cells[1].push_back("P");
    cells[2].push_back("R");
    cells[3].push_back("IoU");
    for (const auto* r : cols) {
      cells[0].push_back(r->image);
      cells[1].push_back(fmt(r->precision));
      cells[2].push_back(fmt(r->recall));
      cells[3].push_back(fmt(r->iou));
    }
    std::vector<std::size_t> width(cells[0].size(), 0);
    for (const auto& row : cells)
      for (std::size_t j = 0; j < row.size(); ++j) width[j] = std::max(width[j], row[j].size());
    std::ostringstream os;
    for (const auto& row : cells) {
      for (std::size_t j = 0; j < row.size(); ++j) {
        if (j) os << "  ";
        os << std::string(width[j] - row[j].size(), ' ') << row[j];
      }
      os << '\n';
    }
    return os.str();
  }

 private:
  std::vector<const MetricReport*> all() const {
    std::vector<const MetricReport*> v;
    for (const auto& r : rows) v.push_back(&r);
    v.push_back(&mean);
    return v;
  }
};

/// Sorts by descending IoU (stable) and appends the unweighted mean.
inline ReportTable report_table(std::vector<MetricReport> reports) {
  require(!reports.empty(), "report_table: no reports");
  std::stable_sort(reports.begin(), reports.end(),
                   [](const MetricReport& a, const MetricReport& b) { return a.iou > b.iou; });
  ReportTable t;
  t.mean.image = "mean";
  for (const auto& r : reports) {
    t.mean.precision += r.precision;
    t.mean.recall += r.recall;
    t.mean.iou += r.iou;
    t.mean.empty_mask = t.mean.empty_mask || r.empty_mask;
  }
  const auto n = static_cast<double>(reports.size());
  t.mean.precision /= n;
  t.mean.recall /= n;
  t.mean.iou /= n;
  t.rows = std::move(reports);
  return t;
}

}  // namespace wtl
