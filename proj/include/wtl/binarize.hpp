#pragma once

// Binarization of the accumulated tracer map: find the longest straight line
// (the waterline), cut the contour open there, search the highest threshold
// that still closes it around the object, restore the cut and thin the
// result into a strict 1-px closed contour.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "wtl/errors.hpp"
#include "wtl/morphology.hpp"
#include "wtl/raster.hpp"

namespace wtl {

struct BinarizeConfig {
  double th_low = 0.2;
  double delta_th = 1.0 / 255.0;
  int gap_tolerance = 5;
  int prune_iterations = 50;
  int flank_rows = 10;
  int cut_margin = 2;

  void validate() const {
    require(th_low > 0 && th_low < 1, "th_low must be in (0, 1)");
    require(delta_th > 0 && delta_th < 1, "delta_th must be in (0, 1)");
    require(gap_tolerance >= 0, "gap_tolerance must be nonnegative");
    require(prune_iterations >= 1, "prune_iterations must be positive");
    require(flank_rows >= 0 && cut_margin >= 0, "flank_rows and cut_margin must be nonnegative");
  }
};

struct LineSegment {
  PixelCoord a, b;
  int rho = 0;
  int theta = 0;  // degrees in [0, 180); normal direction (cos, sin) in (col, row)
  double length = 0;
  std::size_t votes = 0;
};

/// Longest gap-tolerant run of the strongest (rho, theta) Hough cell of the
/// map binarized at th_low. rho = round(col cos(theta) + row sin(theta)).
inline LineSegment hough_longest_line(const Raster2D& wtl, const BinarizeConfig& cfg = {}) {
  cfg.validate();
  const auto fg = threshold(wtl, static_cast<float>(cfg.th_low));
  std::vector<PixelCoord> pts;
  for (int r = 0; r < fg.height(); ++r) {
    for (int c = 0; c < fg.width(); ++c) {
      if (fg(r, c)) pts.push_back({r, c});
    }
  }
  if (pts.empty()) fail(ErrorKind::no_line, "no foreground at th_low " + std::to_string(cfg.th_low));

  const int diag = static_cast<int>(std::ceil(std::hypot(wtl.height(), wtl.width()))) + 1;
  const int span = 2 * diag + 1;
  std::array<std::pair<double, double>, 180> cs;
  for (int t = 0; t < 180; ++t) cs[static_cast<std::size_t>(t)] = cos_sin_deg(t);
  auto rho_of = [&](PixelCoord p, int t) {
    const auto [c, s] = cs[static_cast<std::size_t>(t)];
    return static_cast<int>(std::lround(p.col * c + p.row * s));
  };

  std::vector<std::uint32_t> acc(static_cast<std::size_t>(180 * span), 0);
  for (auto p : pts) {
    for (int t = 0; t < 180; ++t) ++acc[static_cast<std::size_t>(t * span + rho_of(p, t) + diag)];
  }
  std::size_t peak = 0;
  for (std::size_t i = 1; i < acc.size(); ++i) {
    if (acc[i] > acc[peak]) peak = i;
  }
  const int theta = static_cast<int>(peak) / span;
  const int rho = static_cast<int>(peak) % span - diag;

  // Order the voters along the line direction (-sin, cos).
  const auto [ct, st] = cs[static_cast<std::size_t>(theta)];
  struct Voter {
    double t;
    PixelCoord p;
  };
  std::vector<Voter> voters;
  for (auto p : pts) {
    if (rho_of(p, theta) == rho) voters.push_back({-p.col * st + p.row * ct, p});
  }
  std::sort(voters.begin(), voters.end(), [](const Voter& x, const Voter& y) {
    if (x.t != y.t) return x.t < y.t;
    return x.p.row != y.p.row ? x.p.row < y.p.row : x.p.col < y.p.col;
  });

  LineSegment best{voters.front().p, voters.front().p, rho, theta, 0.0, 1};
  std::size_t start = 0;
  for (std::size_t i = 1; i <= voters.size(); ++i) {
    if (i < voters.size() && voters[i].t - voters[i - 1].t <= cfg.gap_tolerance + 1) continue;
    const auto a = voters[start].p, b = voters[i - 1].p;
    const double len = std::hypot(b.row - a.row, b.col - a.col);
    if (len > best.length) best = {a, b, rho, theta, len, i - start};
    start = i;
  }
  return best;
}

struct CutInfo {
  int cut_col = 0;
  std::vector<float> cutout;  // the full original column
  int zero_begin = 0, zero_end = 0;  // zeroed rows [begin, end)
  PixelCoord pixel1, pixel2;
};

/// Row of the segment's supporting line at column `col`.
inline double line_row_at(const LineSegment& s, double col) {
  if (s.a.col == s.b.col) return 0.5 * (s.a.row + s.b.row);
  return s.a.row + (s.b.row - s.a.row) * (col - s.a.col) / static_cast<double>(s.b.col - s.a.col);
}

/// Opens the map at the middle of the segment. Only the th_low run of column
/// x_c nearest the line (plus a margin) is zeroed; a full zeroed column would
/// also sever the far side of the contour and make closure impossible.
inline std::pair<Raster2D, CutInfo> make_cut(const Raster2D& wtl, const LineSegment& seg,
                                             const BinarizeConfig& cfg = {}) {
  cfg.validate();
  const int h = wtl.height(), w = wtl.width();
  CutInfo cut;
  cut.cut_col = static_cast<int>(std::lround(0.5 * (seg.a.col + seg.b.col)));
  if (cut.cut_col < 1 || cut.cut_col > w - 2) {
    fail(ErrorKind::cut_failure, "cut column " + std::to_string(cut.cut_col) + " is not strictly inside the image");
  }
  const auto fg = threshold(wtl, static_cast<float>(cfg.th_low));

  auto nearest_fg = [&](int col) -> int {
    const double target = line_row_at(seg, col);
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int r = 0; r < h; ++r) {
      const double d = std::abs(r - target);
      if (fg(r, col) && d <= cfg.flank_rows && d < best_d) {
        best = r;
        best_d = d;
      }
    }
    return best;
  };

  const int x = cut.cut_col;
  const int center = nearest_fg(x);
  const int r1 = nearest_fg(x - 1), r2 = nearest_fg(x + 1);
  if (center < 0 || r1 < 0 || r2 < 0) {
    fail(ErrorKind::cut_failure, "no foreground within " + std::to_string(cfg.flank_rows) +
                                     " rows of the line around column " + std::to_string(x));
  }
  cut.pixel1 = {r1, x - 1};
  cut.pixel2 = {r2, x + 1};

  int lo = center, hi = center;
  while (lo > 0 && fg(lo - 1, x)) --lo;
  while (hi < h - 1 && fg(hi + 1, x)) ++hi;
  cut.zero_begin = std::max(0, lo - cfg.cut_margin);
  cut.zero_end = std::min(h, hi + cfg.cut_margin + 1);

  Raster2D open = wtl;
  cut.cutout.resize(static_cast<std::size_t>(h));
  for (int r = 0; r < h; ++r) cut.cutout[static_cast<std::size_t>(r)] = wtl(r, x);
  for (int r = cut.zero_begin; r < cut.zero_end; ++r) open(r, x) = 0.0f;
  return {std::move(open), std::move(cut)};
}

/// Writes the saved column back; the inverse of make_cut.
inline Raster2D restore_cutout(const Raster2D& open, const CutInfo& cut) {
  require(static_cast<int>(cut.cutout.size()) == open.height(), "cutout height does not match the map");
  Raster2D out = open;
  for (int r = 0; r < open.height(); ++r) out(r, cut.cut_col) = cut.cutout[static_cast<std::size_t>(r)];
  return out;
}

struct ClosingThreshold {
  double th = 0;
  int iterations = 0;  // number of decrements taken
};

/// k-th threshold of the descending search grid.
inline double closing_grid(double max_value, int k, double delta) { return max_value - k * delta; }

/// Highest grid threshold max - k * delta_th at which pixel1 and pixel2 are
/// both foreground and 8-connected.
inline ClosingThreshold find_closing_threshold(const Raster2D& open, PixelCoord p1, PixelCoord p2,
                                               const BinarizeConfig& cfg = {}) {
  cfg.validate();
  require(p1 != p2, "find_closing_threshold: pixel1 equals pixel2");
  require(open.in_bounds(p1) && open.in_bounds(p2), "find_closing_threshold: pixel outside the map");
  const double top = *std::max_element(open.values().begin(), open.values().end());
  for (int k = 0;; ++k) {
    const double th = closing_grid(top, k, cfg.delta_th);
    if (th <= 0) break;
    const float thf = static_cast<float>(th);
    if (open[p1] < thf || open[p2] < thf) continue;
    if (connected8(threshold(open, thf), p1, p2)) return {th, k};
  }
  fail(ErrorKind::no_closure, "pixels (" + std::to_string(p1.row) + "," + std::to_string(p1.col) + ") and (" +
                                  std::to_string(p2.row) + "," + std::to_string(p2.col) +
                                  ") never connect above threshold 0");
}

inline BinaryMask thin(const BinaryMask& m) { return zhang_suen_thin(m); }

/// Peels endpoints and removes topology-preserving pixels until only cycles
/// remain, keeps the largest component and enforces the strict closed-contour
/// invariants.
inline BinaryMask clean(const BinaryMask& thinned, const BinarizeConfig& cfg = {}) {
  BinaryMask m = thinned;
  const int h = m.height(), w = m.width();
  auto sweep_pixel = [&](int r, int c) {
    if (!m(r, c)) return false;
    const int n = neighbor_count(m, r, c);
    if (n <= 1 || is_simple_point(m, r, c)) {
      m(r, c) = 0;
      return true;
    }
    return false;
  };
  for (int it = 0; it < cfg.prune_iterations; ++it) {
    bool changed = false;
    // Alternate the scan direction so straight spurs go in one sweep.
    if (it % 2 == 0) {
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) changed |= sweep_pixel(r, c);
    } else {
      for (int r = h - 1; r >= 0; --r)
        for (int c = w - 1; c >= 0; --c) changed |= sweep_pixel(r, c);
    }
    if (!changed) break;
  }
  m = keep_largest_component(m);
  const auto check = check_contour(m);
  if (!check.closed()) {
    fail(ErrorKind::not_closed, "contour not closed after cleaning: " + std::to_string(check.pixels) + " px, " +
                                    std::to_string(check.endpoints) + " endpoints, " +
                                    std::to_string(check.branches) + " branches, " +
                                    std::to_string(check.components) + " components");
  }
  return m;
}

struct BinarizeResult {
  BinaryMask contour;
  LineSegment line;
  CutInfo cut;
  ClosingThreshold closing;
};

/// Full binarization; stage errors keep their class and gain a stage prefix.
inline BinarizeResult binarize_pipeline(const Raster2D& wtl, const BinarizeConfig& cfg = {}) {
  cfg.validate();
  BinarizeResult out;
  const char* stage = "hough";
  try {
    out.line = hough_longest_line(wtl, cfg);
    stage = "cut";
    auto [open, cut] = make_cut(wtl, out.line, cfg);
    out.cut = std::move(cut);
    stage = "threshold";
    out.closing = find_closing_threshold(open, out.cut.pixel1, out.cut.pixel2, cfg);
    stage = "clean";
    const auto closed = restore_cutout(open, out.cut);
    const auto bin = fill_small_holes(threshold(closed, static_cast<float>(out.closing.th)));
    out.contour = clean(thin(bin), cfg);
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("binarize/") + stage + ": " + e.what());
  }
  return out;
}

}  // namespace wtl
