#pragma once

// Raster grids, the angle convention and oriented patch extraction.
//
// Coordinates are (row, col) with row growing downward. Angles are degrees in
// (-180, 180], 0 points east (+col) and positive angles turn clockwise on
// screen, i.e. toward +row:
//
//            -90
//             |
//     180 ----+----> 0   (+col)
//             |
//             v 90  (+row)

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wtl/errors.hpp"

namespace wtl {

struct PixelCoord {
  int row = 0;
  int col = 0;

  friend constexpr PixelCoord operator+(PixelCoord a, PixelCoord b) {
    return {a.row + b.row, a.col + b.col};
  }
  friend constexpr PixelCoord operator-(PixelCoord a, PixelCoord b) {
    return {a.row - b.row, a.col - b.col};
  }
  friend constexpr bool operator==(PixelCoord, PixelCoord) = default;
  friend constexpr auto operator<=>(PixelCoord, PixelCoord) = default;
};

/// Row/col offset between two pixels.
using Offset = PixelCoord;

inline int chebyshev(PixelCoord a, PixelCoord b) {
  return std::max(std::abs(a.row - b.row), std::abs(a.col - b.col));
}

/// A direction in degrees, always wrapped to (-180, 180].
class Angle {
 public:
  constexpr Angle() = default;

  /// Wraps any finite value; throws invalid-argument otherwise.
  static Angle degrees(double a);

  constexpr double deg() const { return deg_; }
  double rad() const { return deg_ * std::numbers::pi / 180.0; }

  friend constexpr bool operator==(Angle, Angle) = default;

 private:
  constexpr explicit Angle(double wrapped) : deg_(wrapped) {}
  double deg_ = 0.0;
};

inline Angle wrap_angle(double a) {
  if (!std::isfinite(a)) fail(ErrorKind::invalid_argument, "wrap_angle: non-finite angle");
  double r = std::fmod(a, 360.0);
  if (r <= -180.0) r += 360.0;
  if (r > 180.0) r -= 360.0;
  return Angle::degrees(r);
}

inline Angle Angle::degrees(double a) {
  if (!std::isfinite(a)) fail(ErrorKind::invalid_argument, "angle: non-finite value");
  if (a > -180.0 && a <= 180.0) return Angle(a);
  return wrap_angle(a);
}

/// Signed shortest difference a - b, wrapped.
inline double angle_diff(double a, double b) { return wrap_angle(a - b).deg(); }

/// Cosine and sine of an angle in degrees, exact at multiples of 90.
inline std::pair<double, double> cos_sin_deg(double deg) {
  const double q = deg / 90.0;
  if (q == std::round(q)) {
    switch (((static_cast<long>(q) % 4) + 4) % 4) {
      case 0: return {1.0, 0.0};
      case 1: return {0.0, 1.0};
      case 2: return {-1.0, 0.0};
      default: return {0.0, -1.0};
    }
  }
  const double r = deg * std::numbers::pi / 180.0;
  return {std::cos(r), std::sin(r)};
}

template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int h, int w, T fill = T{}) : h_(h), w_(w), data_(checked_size(h, w), fill) {}

  int height() const { return h_; }
  int width() const { return w_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool in_bounds(int r, int c) const { return r >= 0 && r < h_ && c >= 0 && c < w_; }
  bool in_bounds(PixelCoord p) const { return in_bounds(p.row, p.col); }

  T& operator()(int r, int c) { return data_[index(r, c)]; }
  const T& operator()(int r, int c) const { return data_[index(r, c)]; }
  T& operator[](PixelCoord p) { return data_[index(p.row, p.col)]; }
  const T& operator[](PixelCoord p) const { return data_[index(p.row, p.col)]; }

  /// Value at (r, c), or `outside` when out of bounds.
  T at_or(int r, int c, T outside) const { return in_bounds(r, c) ? (*this)(r, c) : outside; }

  std::size_t index(int r, int c) const {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(w_) + static_cast<std::size_t>(c);
  }
  PixelCoord coord(std::size_t i) const {
    return {static_cast<int>(i / static_cast<std::size_t>(w_)), static_cast<int>(i % static_cast<std::size_t>(w_))};
  }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool same_shape(int h, int w) const { return h_ == h && w_ == w; }
  template <typename U>
  bool same_shape(const Grid<U>& o) const { return h_ == o.height() && w_ == o.width(); }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  static std::size_t checked_size(int h, int w) {
    require(h >= 0 && w >= 0, "grid dimensions must be nonnegative");
    return static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }

  int h_ = 0;
  int w_ = 0;
  std::vector<T> data_;
};

/// Soft contour map or any single-channel real raster, values in [0, 1].
using Raster2D = Grid<float>;
/// Boolean raster stored as bytes (0 or 1).
using BinaryMask = Grid<std::uint8_t>;

struct RgbImage {
  std::array<Raster2D, 3> channels;

  int height() const { return channels[0].height(); }
  int width() const { return channels[0].width(); }

  static RgbImage zeros(int h, int w) {
    return {{Raster2D(h, w), Raster2D(h, w), Raster2D(h, w)}};
  }
};

/// RGB image plus soft contour map, four planes of identical shape.
class InputStack {
 public:
  static constexpr int kChannels = 4;

  InputStack() = default;
  explicit InputStack(std::array<Raster2D, kChannels> planes) : planes_(std::move(planes)) {
    for (const auto& p : planes_) {
      require(p.same_shape(planes_[0]), "input stack planes must share one shape");
    }
  }

  int height() const { return planes_[0].height(); }
  int width() const { return planes_[0].width(); }
  bool in_bounds(PixelCoord p) const { return planes_[0].in_bounds(p); }

  const Raster2D& channel(int c) const { return planes_[static_cast<std::size_t>(c)]; }
  const Raster2D& softmap() const { return planes_[3]; }
  const std::array<Raster2D, kChannels>& planes() const { return planes_; }

 private:
  std::array<Raster2D, kChannels> planes_;
};

inline InputStack stack_inputs(const RgbImage& image, const Raster2D& softmap) {
  for (const auto& c : image.channels) {
    if (!c.same_shape(softmap)) {
      fail(ErrorKind::invalid_argument,
           "stack_inputs: image is " + std::to_string(c.height()) + "x" + std::to_string(c.width()) +
               " but softmap is " + std::to_string(softmap.height()) + "x" +
               std::to_string(softmap.width()));
    }
  }
  return InputStack({image.channels[0], image.channels[1], image.channels[2], softmap});
}

/// 13x13x4 network input, channel-major (c, row, col).
struct Patch {
  static constexpr int kSide = 13;
  static constexpr int kChannels = 4;
  static constexpr int kCenter = kSide / 2;
  static constexpr int kSize = kSide * kSide * kChannels;

  std::array<float, kSize> values{};

  float& operator()(int c, int r, int col) { return values[static_cast<std::size_t>((c * kSide + r) * kSide + col)]; }
  float operator()(int c, int r, int col) const {
    return values[static_cast<std::size_t>((c * kSide + r) * kSide + col)];
  }

  friend bool operator==(const Patch&, const Patch&) = default;
};

/// Side of the window cropped before rotation: the smallest odd size covering
/// every rotation of the 13x13 target (13 * sqrt(2) ~ 18.4).
inline constexpr int kGenerousCrop = 21;

namespace detail {

inline float bilinear(const Raster2D& img, double r, double c) {
  const double r0f = std::floor(r);
  const double c0f = std::floor(c);
  const int r0 = static_cast<int>(r0f);
  const int c0 = static_cast<int>(c0f);
  const double fr = r - r0f;
  const double fc = c - c0f;
  const double v00 = img.at_or(r0, c0, 0.0f);
  if (fr == 0.0 && fc == 0.0) return static_cast<float>(v00);
  const double v01 = img.at_or(r0, c0 + 1, 0.0f);
  const double v10 = img.at_or(r0 + 1, c0, 0.0f);
  const double v11 = img.at_or(r0 + 1, c0 + 1, 0.0f);
  return static_cast<float>((1 - fr) * ((1 - fc) * v00 + fc * v01) + fr * ((1 - fc) * v10 + fc * v11));
}

}  // namespace detail

/// Crops the neighbourhood of `cp`, rotates it by -heading so that `heading`
/// points east, and returns the central 13x13 window. Pixels outside the image
/// read as zero.
///
/// The generous 21x21 crop followed by rotation and a center crop is computed
/// directly: every target sample lies within 6*sqrt(2) < 10 px of the center,
/// so it never leaves the generous window.
inline Patch extract_oriented_patch(const InputStack& stack, PixelCoord cp, Angle heading) {
  if (!stack.in_bounds(cp)) {
    fail(ErrorKind::invalid_argument, "extract_oriented_patch: center (" + std::to_string(cp.row) + "," +
                                          std::to_string(cp.col) + ") is outside the image");
  }
  const auto [cs, sn] = cos_sin_deg(heading.deg());
  Patch patch;
  for (int i = 0; i < Patch::kSide; ++i) {
    const double v = i - Patch::kCenter;  // across-track, +row in the canonical frame
    for (int j = 0; j < Patch::kSide; ++j) {
      const double u = j - Patch::kCenter;  // along-track, +col in the canonical frame
      const double src_r = cp.row + u * sn + v * cs;
      const double src_c = cp.col + u * cs - v * sn;
      for (int ch = 0; ch < Patch::kChannels; ++ch) {
        patch(ch, i, j) = detail::bilinear(stack.channel(ch), src_r, src_c);
      }
    }
  }
  return patch;
}

/// Chebyshev ring of the given radius, ordered by increasing direction angle
/// starting just after -180.
inline std::vector<Offset> ring_offsets(int step) {
  require(step >= 1 && step <= 3, "ring_offsets: step must be 1, 2 or 3");
  std::vector<Offset> ring;
  ring.reserve(static_cast<std::size_t>(8 * step));
  for (int dr = -step; dr <= step; ++dr) {
    for (int dc = -step; dc <= step; ++dc) {
      if (std::max(std::abs(dr), std::abs(dc)) == step) ring.push_back({dr, dc});
    }
  }
  auto angle = [](Offset o) { return wrap_angle(std::atan2(o.row, o.col) * 180.0 / std::numbers::pi).deg(); };
  std::sort(ring.begin(), ring.end(), [&](Offset a, Offset b) { return angle(a) < angle(b); });
  return ring;
}

inline Angle offset_to_angle(Offset o) {
  if (o.row == 0 && o.col == 0) fail(ErrorKind::invalid_argument, "offset_to_angle: zero offset");
  return wrap_angle(std::atan2(static_cast<double>(o.row), static_cast<double>(o.col)) * 180.0 /
                    std::numbers::pi);
}

namespace detail {

struct RingTable {
  std::vector<Offset> offsets;
  std::vector<double> angles;
};

inline const RingTable& ring_table(int step) {
  static const std::array<RingTable, 3> tables = [] {
    std::array<RingTable, 3> t;
    for (int s = 1; s <= 3; ++s) {
      auto& table = t[static_cast<std::size_t>(s - 1)];
      table.offsets = ring_offsets(s);
      for (auto o : table.offsets) table.angles.push_back(offset_to_angle(o).deg());
    }
    return t;
  }();
  return tables[static_cast<std::size_t>(step - 1)];
}

}  // namespace detail

/// Ring offset whose direction is closest to `heading`. Exact ties go to the
/// counterclockwise candidate.
inline Offset angle_to_offset(Angle heading, int step) {
  require(step >= 1 && step <= 3, "angle_to_offset: step must be 1, 2 or 3");
  const auto& table = detail::ring_table(step);
  std::size_t best = 0;
  double best_abs = 1e9;
  double best_signed = 0.0;
  for (std::size_t k = 0; k < table.offsets.size(); ++k) {
    const double d = angle_diff(table.angles[k], heading.deg());
    const double a = std::abs(d);
    if (a < best_abs || (a == best_abs && d < best_signed)) {
      best = k;
      best_abs = a;
      best_signed = d;
    }
  }
  return table.offsets[best];
}

/// Pixels of the 8-connected digital segment from `from` (excluded) to `to`
/// (included); one pixel per unit of Chebyshev length.
inline std::vector<PixelCoord> rasterize_segment(PixelCoord from, PixelCoord to) {
  const Offset d = to - from;
  const int n = std::max(std::abs(d.row), std::abs(d.col));
  std::vector<PixelCoord> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 1; k <= n; ++k) {
    const int r = static_cast<int>(std::lround(static_cast<double>(k * d.row) / n));
    const int c = static_cast<int>(std::lround(static_cast<double>(k * d.col) / n));
    out.push_back({from.row + r, from.col + c});
  }
  return out;
}

/// Horizontal mirror (col -> w - 1 - col) of any grid.
template <typename T>
Grid<T> mirror_cols(const Grid<T>& g) {
  Grid<T> out(g.height(), g.width());
  for (int r = 0; r < g.height(); ++r) {
    for (int c = 0; c < g.width(); ++c) out(r, g.width() - 1 - c) = g(r, c);
  }
  return out;
}

inline InputStack mirror_cols(const InputStack& s) {
  return InputStack({mirror_cols(s.channel(0)), mirror_cols(s.channel(1)), mirror_cols(s.channel(2)),
                     mirror_cols(s.channel(3))});
}

}  // namespace wtl
