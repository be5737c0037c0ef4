#pragma once

#include <cstdlib>
#include <string>
#include <vector>

#include "wtl/errors.hpp"
#include "wtl/morphology.hpp"
#include "wtl/raster.hpp"

namespace wtl {

/// Cyclic, clockwise-ordered list of contour pixels. Clockwise means a
/// positive signed area in y-down (row, col) display coordinates.
class ContourChain {
 public:
  ContourChain() = default;
  explicit ContourChain(std::vector<PixelCoord> pixels) : pixels_(std::move(pixels)) {}

  std::size_t size() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }
  const std::vector<PixelCoord>& pixels() const { return pixels_; }

  /// Cyclic access; any integer index is valid.
  PixelCoord at(long i) const {
    const long n = static_cast<long>(pixels_.size());
    return pixels_[static_cast<std::size_t>(((i % n) + n) % n)];
  }

  /// Shoelace area with x = col, y = row.
  double signed_area() const {
    double a = 0.0;
    const std::size_t n = pixels_.size();
    for (std::size_t i = 0; i < n; ++i) {
      const auto p = pixels_[i];
      const auto q = pixels_[(i + 1) % n];
      a += static_cast<double>(p.col) * q.row - static_cast<double>(q.col) * p.row;
    }
    return 0.5 * a;
  }

  /// Reverses the traversal direction, keeping element 0 in place.
  ContourChain reversed() const {
    std::vector<PixelCoord> r;
    r.reserve(pixels_.size());
    if (!pixels_.empty()) r.push_back(pixels_[0]);
    for (std::size_t i = pixels_.size(); i > 1; --i) r.push_back(pixels_[i - 1]);
    return ContourChain(std::move(r));
  }

  ContourChain clockwise() const { return signed_area() < 0 ? reversed() : *this; }

  /// Chain of the horizontally mirrored image, re-oriented clockwise.
  ContourChain mirrored(int width) const {
    std::vector<PixelCoord> m;
    m.reserve(pixels_.size());
    for (auto p : pixels_) m.push_back({p.row, width - 1 - p.col});
    return ContourChain(std::move(m)).clockwise();
  }

  BinaryMask to_mask(int h, int w) const {
    BinaryMask m(h, w);
    for (auto p : pixels_) {
      if (m.in_bounds(p)) m[p] = 1;
    }
    return m;
  }

 private:
  std::vector<PixelCoord> pixels_;
};

/// Orders a closed 1-px ground-truth contour into a clockwise chain by
/// neighbour following. Accepts loops where corner pixels touch three
/// neighbours (e.g. axis-aligned rectangles); rejects endpoints, branches and
/// multiple components with invalid-ground-truth.
inline ContourChain trace_gt_chain(const BinaryMask& gt) {
  auto bad = [](const std::string& why) { fail(ErrorKind::invalid_ground_truth, "ground-truth contour: " + why); };
  const auto cc = connected_components(gt, 8);
  if (cc.count() == 0) bad("empty mask");
  if (cc.count() > 1) bad(std::to_string(cc.count()) + " components");

  PixelCoord start{-1, -1};
  std::size_t total = 0;
  for (int r = 0; r < gt.height(); ++r) {
    for (int c = 0; c < gt.width(); ++c) {
      if (!gt(r, c)) continue;
      if (total++ == 0) start = {r, c};
      if (neighbor_count(gt, r, c) < 2) {
        bad("endpoint at (" + std::to_string(r) + "," + std::to_string(c) + ")");
      }
    }
  }
  if (total < 4) bad("too few pixels for a loop");

  BinaryMask visited(gt.height(), gt.width());
  auto unvisited_degree = [&](PixelCoord p) {
    int n = 0;
    for (auto o : kNeighbors8) {
      const auto q = p + o;
      n += (gt.in_bounds(q) && gt[q] && !visited[q]) ? 1 : 0;
    }
    return n;
  };

  std::vector<PixelCoord> order{start};
  visited[start] = 1;
  PixelCoord cur = start;
  for (;;) {
    PixelCoord best{-1, -1};
    int best_rank = 1 << 30;
    for (std::size_t k = 0; k < kNeighbors8.size(); ++k) {
      const auto q = cur + kNeighbors8[k];
      if (!gt.in_bounds(q) || !gt[q] || visited[q]) continue;
      const bool diagonal = (k % 2) == 1;
      const int rank = (diagonal ? 100 : 0) + unvisited_degree(q) * 10 + static_cast<int>(k);
      if (rank < best_rank) {
        best_rank = rank;
        best = q;
      }
    }
    if (best.row < 0) break;
    visited[best] = 1;
    order.push_back(best);
    cur = best;
  }
  if (order.size() != total) bad("branching contour (" + std::to_string(total - order.size()) + " pixels off the loop)");
  if (chebyshev(order.back(), start) != 1) bad("contour does not close");
  return ContourChain(std::move(order)).clockwise();
}

}  // namespace wtl
