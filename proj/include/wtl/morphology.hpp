#pragma once

// Binary-image machinery shared by seeding, binarization, label generation
// and evaluation: neighbourhoods, connected components, thinning and the
// closed-contour checks.

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <vector>

#include "wtl/raster.hpp"

namespace wtl {

/// 8-neighbourhood in counterclockwise order starting east:
/// E, NE, N, NW, W, SW, S, SE.
inline constexpr std::array<Offset, 8> kNeighbors8{
    {{0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}}};
inline constexpr std::array<Offset, 4> kNeighbors4{{{0, 1}, {-1, 0}, {0, -1}, {1, 0}}};

inline BinaryMask threshold(const Raster2D& g, float th) {
  BinaryMask m(g.height(), g.width());
  for (std::size_t i = 0; i < g.size(); ++i) m.data()[i] = g.data()[i] >= th ? 1 : 0;
  return m;
}

inline std::size_t count_foreground(const BinaryMask& m) {
  return static_cast<std::size_t>(std::count_if(m.data().begin(), m.data().end(), [](auto v) { return v != 0; }));
}

inline int neighbor_count(const BinaryMask& m, int r, int c) {
  int n = 0;
  for (auto o : kNeighbors8) n += m.at_or(r + o.row, c + o.col, 0) ? 1 : 0;
  return n;
}

inline BinaryMask dilate3x3(const BinaryMask& m) {
  BinaryMask out(m.height(), m.width());
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) {
      if (!m(r, c)) continue;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (out.in_bounds(r + dr, c + dc)) out(r + dr, c + dc) = 1;
        }
      }
    }
  }
  return out;
}

struct Components {
  Grid<int> labels;              // -1 for background
  std::vector<std::size_t> sizes;  // pixel count per label

  int count() const { return static_cast<int>(sizes.size()); }
  int largest() const {
    if (sizes.empty()) return -1;
    return static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  }
};

/// Labels foreground components (value != 0) in raster order of first pixel.
inline Components connected_components(const BinaryMask& m, int connectivity = 8) {
  require(connectivity == 4 || connectivity == 8, "connectivity must be 4 or 8");
  Components cc{Grid<int>(m.height(), m.width(), -1), {}};
  std::vector<PixelCoord> stack;
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) {
      if (!m(r, c) || cc.labels(r, c) >= 0) continue;
      const int label = cc.count();
      std::size_t size = 0;
      cc.labels(r, c) = label;
      stack.push_back({r, c});
      while (!stack.empty()) {
        const auto p = stack.back();
        stack.pop_back();
        ++size;
        for (int k = 0; k < 8; k += (connectivity == 4 ? 2 : 1)) {
          const auto q = p + kNeighbors8[static_cast<std::size_t>(k)];
          if (m.in_bounds(q) && m[q] && cc.labels[q] < 0) {
            cc.labels[q] = label;
            stack.push_back(q);
          }
        }
      }
      cc.sizes.push_back(size);
    }
  }
  return cc;
}

inline BinaryMask keep_largest_component(const BinaryMask& m) {
  const auto cc = connected_components(m, 8);
  BinaryMask out(m.height(), m.width());
  const int keep = cc.largest();
  if (keep < 0) return out;
  for (std::size_t i = 0; i < m.size(); ++i) out.data()[i] = cc.labels.data()[i] == keep ? 1 : 0;
  return out;
}

/// True iff a and b are foreground and 8-connected through foreground.
inline bool connected8(const BinaryMask& m, PixelCoord a, PixelCoord b) {
  if (!m.in_bounds(a) || !m.in_bounds(b) || !m[a] || !m[b]) return false;
  if (a == b) return true;
  BinaryMask seen(m.height(), m.width());
  std::vector<PixelCoord> stack{a};
  seen[a] = 1;
  while (!stack.empty()) {
    const auto p = stack.back();
    stack.pop_back();
    for (auto o : kNeighbors8) {
      const auto q = p + o;
      if (!m.in_bounds(q) || !m[q] || seen[q]) continue;
      if (q == b) return true;
      seen[q] = 1;
      stack.push_back(q);
    }
  }
  return false;
}

/// Background pixels 4-reachable from the image border without crossing
/// foreground.
inline BinaryMask outside_region(const BinaryMask& m) {
  BinaryMask reached(m.height(), m.width());
  std::vector<PixelCoord> stack;
  auto seed = [&](int r, int c) {
    if (!m(r, c) && !reached(r, c)) {
      reached(r, c) = 1;
      stack.push_back({r, c});
    }
  };
  for (int c = 0; c < m.width(); ++c) {
    seed(0, c);
    seed(m.height() - 1, c);
  }
  for (int r = 0; r < m.height(); ++r) {
    seed(r, 0);
    seed(r, m.width() - 1);
  }
  while (!stack.empty()) {
    const auto p = stack.back();
    stack.pop_back();
    for (auto o : kNeighbors4) {
      const auto q = p + o;
      if (m.in_bounds(q) && !m[q] && !reached[q]) {
        reached[q] = 1;
        stack.push_back(q);
      }
    }
  }
  return reached;
}

/// Fills every enclosed background region (4-connected, not touching the
/// border) except the largest one.
inline BinaryMask fill_small_holes(const BinaryMask& m) {
  BinaryMask background(m.height(), m.width());
  for (std::size_t i = 0; i < m.size(); ++i) background.data()[i] = m.data()[i] ? 0 : 1;
  const auto outside = outside_region(m);
  const auto cc = connected_components(background, 4);
  std::vector<std::uint8_t> is_hole(static_cast<std::size_t>(cc.count()), 1);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (outside.data()[i]) is_hole[static_cast<std::size_t>(cc.labels.data()[i])] = 0;
  }
  int keep = -1;
  for (int k = 0; k < cc.count(); ++k) {
    if (is_hole[static_cast<std::size_t>(k)] &&
        (keep < 0 || cc.sizes[static_cast<std::size_t>(k)] > cc.sizes[static_cast<std::size_t>(keep)])) {
      keep = k;
    }
  }
  BinaryMask out = m;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const int l = cc.labels.data()[i];
    if (l >= 0 && l != keep && is_hole[static_cast<std::size_t>(l)]) out.data()[i] = 1;
  }
  return out;
}

/// Zhang-Suen iterative thinning. Pixels outside the image count as background.
inline BinaryMask zhang_suen_thin(const BinaryMask& input) {
  BinaryMask m = input;
  std::vector<std::size_t> doomed;
  for (bool changed = true; changed;) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      doomed.clear();
      for (int r = 0; r < m.height(); ++r) {
        for (int c = 0; c < m.width(); ++c) {
          if (!m(r, c)) continue;
          // P2..P9 clockwise from north
          const int p2 = m.at_or(r - 1, c, 0), p3 = m.at_or(r - 1, c + 1, 0), p4 = m.at_or(r, c + 1, 0),
                    p5 = m.at_or(r + 1, c + 1, 0), p6 = m.at_or(r + 1, c, 0), p7 = m.at_or(r + 1, c - 1, 0),
                    p8 = m.at_or(r, c - 1, 0), p9 = m.at_or(r - 1, c - 1, 0);
          const int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
          if (b < 2 || b > 6) continue;
          const int seq[9] = {p2, p3, p4, p5, p6, p7, p8, p9, p2};
          int a = 0;
          for (int k = 0; k < 8; ++k) a += (seq[k] == 0 && seq[k + 1] == 1) ? 1 : 0;
          if (a != 1) continue;
          if (pass == 0 ? (p2 * p4 * p6 == 0 && p4 * p6 * p8 == 0) : (p2 * p4 * p8 == 0 && p2 * p6 * p8 == 0)) {
            doomed.push_back(m.index(r, c));
          }
        }
      }
      for (auto i : doomed) m.data()[i] = 0;
      changed = changed || !doomed.empty();
    }
  }
  return m;
}

/// Yokoi 8-connectivity number; a foreground pixel is simple (removable
/// without changing topology) iff it equals 1.
inline int connectivity_number8(const BinaryMask& m, int r, int c) {
  int x[9];
  for (int k = 0; k < 8; ++k) {
    const auto o = kNeighbors8[static_cast<std::size_t>(k)];
    x[k] = m.at_or(r + o.row, c + o.col, 0) ? 0 : 1;  // complement
  }
  x[8] = x[0];
  int n = 0;
  for (int k = 0; k < 8; k += 2) n += x[k] - x[k] * x[k + 1] * x[(k + 2) % 8];
  return n;
}

inline bool is_simple_point(const BinaryMask& m, int r, int c) { return connectivity_number8(m, r, c) == 1; }

struct ContourCheck {
  std::size_t pixels = 0;
  std::size_t endpoints = 0;  // fewer than 2 neighbours
  std::size_t branches = 0;   // more than 2 neighbours
  int components = 0;

  bool closed() const { return pixels > 0 && endpoints == 0 && branches == 0 && components == 1; }
};

/// Checks the strict closed-contour invariants: one 8-connected component in
/// which every pixel has exactly two foreground 8-neighbours.
inline ContourCheck check_contour(const BinaryMask& m) {
  ContourCheck check;
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) {
      if (!m(r, c)) continue;
      ++check.pixels;
      const int n = neighbor_count(m, r, c);
      if (n < 2) ++check.endpoints;
      if (n > 2) ++check.branches;
    }
  }
  check.components = connected_components(m, 8).count();
  return check;
}

}  // namespace wtl
