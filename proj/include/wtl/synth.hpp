#pragma once

// Synthetic ship-like scenes standing in for annotated photos and detector
// output: a hull with a flat waterline, stacked superstructure blocks and
// thin masts, rendered over a sky/sea background, with a simulated soft
// contour map that has weak segments and background noise.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "wtl/chain.hpp"
#include "wtl/errors.hpp"
#include "wtl/eval.hpp"
#include "wtl/morphology.hpp"
#include "wtl/raster.hpp"
#include "wtl/rng.hpp"

namespace wtl {

struct SceneParams {
  int height = 256;
  int width = 256;
  int complexity = 3;      // superstructure blocks
  int antennas = 2;
  double noise = 0.1;      // uniform soft-map noise amplitude
  int gaps = 2;            // weak contour segments
  double gap_level = 0.3;  // soft-map value on a gap
  double peak = 0.9;

  void validate() const {
    require(height >= 48 && width >= 48, "scene must be at least 48x48");
    require(complexity >= 0 && antennas >= 0 && gaps >= 0, "scene counts must be nonnegative");
    require(noise >= 0 && noise <= 1, "noise must be in [0, 1]");
    require(gap_level >= 0 && gap_level <= peak && peak <= 1, "need 0 <= gap_level <= peak <= 1");
  }
};

/// Moderate soft-map noise: the largest amplitude that keeps pure background
/// below the default bad-location threshold.
inline constexpr double kModerateNoise = 0.1;

struct SyntheticScene {
  RgbImage image;
  BinaryMask gt_contour;
  BinaryMask gt_mask;
  Raster2D softmap;
  SceneParams params;
  std::uint64_t seed = 0;
  int attempt = 0;           // sub-seed that produced a valid contour
  int waterline_row = 0;
  int waterline_begin = 0;   // columns of the flat bottom edge, inclusive
  int waterline_end = 0;
  std::vector<PixelCoord> gap_pixels;

  InputStack stack() const { return stack_inputs(image, softmap); }
};

namespace synth_detail {

inline BinaryMask erode3x3(const BinaryMask& m) {
  BinaryMask out(m.height(), m.width());
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) {
      bool all = true;
      for (int dr = -1; dr <= 1 && all; ++dr)
        for (int dc = -1; dc <= 1 && all; ++dc) all = m.at_or(r + dr, c + dc, 0) != 0;
      out(r, c) = all ? 1 : 0;
    }
  }
  return out;
}

/// Mask pixels with a 4-neighbour outside the mask (or the image).
inline BinaryMask boundary4(const BinaryMask& m) {
  BinaryMask out(m.height(), m.width());
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) {
      if (!m(r, c)) continue;
      for (auto o : kNeighbors4) {
        if (!m.at_or(r + o.row, c + o.col, 0)) {
          out(r, c) = 1;
          break;
        }
      }
    }
  }
  return out;
}

/// Removes convex corner pixels whose two boundary neighbours touch each
/// other; such corners give their neighbours a third contour neighbour.
inline BinaryMask prune_corners(BinaryMask mask) {
  for (int it = 0; it < 32; ++it) {
    const auto bnd = boundary4(mask);
    std::vector<PixelCoord> doomed;
    for (int r = 0; r < mask.height(); ++r) {
      for (int c = 0; c < mask.width(); ++c) {
        if (!bnd(r, c)) continue;
        std::vector<PixelCoord> nb;
        for (auto o : kNeighbors8) {
          const PixelCoord q{r + o.row, c + o.col};
          if (bnd.in_bounds(q) && bnd[q]) nb.push_back(q);
        }
        if (nb.size() == 2 && chebyshev(nb[0], nb[1]) == 1) doomed.push_back({r, c});
      }
    }
    if (doomed.empty()) break;
    for (auto p : doomed) {
      // Keep isolated removals only; neighbouring corners are revisited next round.
      bool clash = false;
      for (auto o : kNeighbors8) clash = clash || (mask.in_bounds(p + o) && mask[p + o] == 2);
      if (!clash) mask[p] = 2;
    }
    for (auto& v : mask.values()) v = v == 2 ? 0 : v;
  }
  return mask;
}

inline float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

struct Shape {
  BinaryMask mask;
  std::vector<std::uint8_t> part;  // 0 background, 1 hull, 2 superstructure, 3 mast
  int waterline_row, bottom_begin, bottom_end;
};

inline Shape build_shape(const SceneParams& p, Rng& rng) {
  const int h = p.height, w = p.width;
  Shape s{BinaryMask(h, w), std::vector<std::uint8_t>(static_cast<std::size_t>(h) * w, 0), 0, 0, 0};
  auto set = [&](int r, int c, std::uint8_t part) {
    if (!s.mask.in_bounds(r, c)) return;
    s.mask(r, c) = 1;
    auto& slot = s.part[s.mask.index(r, c)];
    slot = std::max(slot, part);
  };

  const int yb = static_cast<int>(std::lround(h * uniform(rng, 0.64, 0.72)));
  const int x0 = static_cast<int>(std::lround(w * uniform(rng, 0.1, 0.16)));
  const int x1 = static_cast<int>(std::lround(w * uniform(rng, 0.84, 0.9)));
  const int len = x1 - x0;
  const int hull_h = std::max(8, static_cast<int>(std::lround(h * uniform(rng, 0.1, 0.14))));
  const int yd = yb - hull_h;
  const int bow = std::max(3, static_cast<int>(std::lround(len * uniform(rng, 0.1, 0.16))));
  const int stern = std::max(2, static_cast<int>(std::lround(len * uniform(rng, 0.03, 0.06))));
  s.waterline_row = yb;
  s.bottom_begin = x0 + bow;
  s.bottom_end = x1 - stern;

  // Deck: jittered polyline with a raised bow.
  const int knots = 6;
  std::vector<double> kc(knots + 1), kr(knots + 1);
  for (int k = 0; k <= knots; ++k) {
    kc[static_cast<std::size_t>(k)] = x0 + len * static_cast<double>(k) / knots;
    kr[static_cast<std::size_t>(k)] = yd + uniform_int(rng, -2, 2);
  }
  kr[0] -= uniform_int(rng, 3, std::max(3, hull_h / 3));
  auto deck = [&](int c) {
    const double t = std::clamp((c - x0) / static_cast<double>(len) * knots, 0.0, static_cast<double>(knots) - 1e-9);
    const auto k = static_cast<std::size_t>(t);
    return static_cast<int>(std::lround(kr[k] + (kr[k + 1] - kr[k]) * (t - static_cast<double>(k))));
  };
  for (int c = x0; c <= x1; ++c) {
    int bottom = yb;
    if (c < s.bottom_begin) bottom = yb - static_cast<int>(std::lround((s.bottom_begin - c) * (yb - deck(x0) - 4.0) / bow));
    if (c > s.bottom_end) bottom = yb - static_cast<int>(std::lround((c - s.bottom_end) * (yb - deck(x1) - 4.0) / stern));
    for (int r = deck(c); r <= bottom; ++r) set(r, c, 1);
  }

  // Superstructure blocks sitting on the deck, some with a second tier.
  struct Block {
    int top, c0, c1;
  };
  std::vector<Block> tops;
  for (int b = 0; b < p.complexity; ++b) {
    const int bw = std::max(6, static_cast<int>(std::lround(len * uniform(rng, 0.1, 0.22))));
    const int c0 = uniform_int(rng, s.bottom_begin, std::max(s.bottom_begin, s.bottom_end - bw));
    const int c1 = std::min(x1 - 2, c0 + bw);
    int base = h;
    for (int c = c0; c <= c1; ++c) base = std::min(base, deck(c));
    const int bh = std::max(4, static_cast<int>(std::lround(h * uniform(rng, 0.04, 0.09))));
    const int top = base - bh;
    for (int r = top; r <= base + 2; ++r)
      for (int c = c0; c <= c1; ++c) set(r, c, 2);
    tops.push_back({top, c0, c1});
    if (uniform01(rng) < 0.5 && c1 - c0 >= 12) {
      const int inset = (c1 - c0) / 4;
      const int th = std::max(4, static_cast<int>(std::lround(h * uniform(rng, 0.03, 0.06))));
      for (int r = top - th; r <= top; ++r)
        for (int c = c0 + inset; c <= c1 - inset; ++c) set(r, c, 2);
      tops.push_back({top - th, c0 + inset, c1 - inset});
    }
  }

  // Masts: three pixels wide so the mask boundary stays a simple loop.
  for (int a = 0; a < p.antennas; ++a) {
    int top, c0, c1;
    if (!tops.empty()) {
      const auto& blk = tops[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(tops.size()) - 1))];
      top = blk.top;
      c0 = blk.c0;
      c1 = blk.c1;
    } else {
      c0 = s.bottom_begin;
      c1 = s.bottom_end;
      top = deck((c0 + c1) / 2);
    }
    if (c1 - c0 < 8) continue;
    const int col = uniform_int(rng, c0 + 3, c1 - 5);
    const int mh = std::max(6, static_cast<int>(std::lround(h * uniform(rng, 0.04, 0.09))));
    for (int r = std::max(2, top - mh); r <= top + 1; ++r)
      for (int c = col; c < col + 3; ++c) set(r, c, 3);
  }
  return s;
}

inline RgbImage render(const Shape& s, const SceneParams& p, Rng& rng) {
  const int h = p.height, w = p.width;
  auto img = RgbImage::zeros(h, w);
  const double phase = uniform(rng, 0, 6.283);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double n = uniform(rng, -0.03, 0.03);
      double R, G, B;
      const auto part = s.part[static_cast<std::size_t>(r) * w + c];
      if (part == 1) {
        R = 0.32; G = 0.28; B = 0.3;
      } else if (part == 2) {
        const double shade = 0.85 - 0.15 * (c % 17) / 17.0;
        R = shade; G = shade; B = 0.95 * shade;
      } else if (part == 3) {
        R = 0.2; G = 0.2; B = 0.22;
      } else if (r < s.waterline_row) {
        R = 0.6 + 0.2 * r / h; G = 0.75; B = 0.92;
      } else {
        const double wave = 0.05 * std::sin(0.35 * c + 0.9 * r + phase);
        R = 0.1 + wave; G = 0.3 + wave; B = 0.5 + wave;
      }
      img.channels[0](r, c) = clamp01(R + n);
      img.channels[1](r, c) = clamp01(G + n);
      img.channels[2](r, c) = clamp01(B + n);
    }
  }
  return img;
}

}  // namespace synth_detail

/// Soft map of a closed contour: the dilated contour blurred with [1 2 1],
/// kept on the dilated support and scaled so contour pixels reach `peak`.
inline Raster2D simulate_softmap(const BinaryMask& contour, double peak) {
  const auto support = dilate3x3(contour);
  const int h = contour.height(), w = contour.width();
  Raster2D tmp(h, w), out(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      tmp(r, c) = 0.25f * (support.at_or(r, c - 1, 0) + 2.0f * support(r, c) + support.at_or(r, c + 1, 0));
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      out(r, c) = 0.25f * (tmp.at_or(r - 1, c, 0) + 2.0f * tmp(r, c) + tmp.at_or(r + 1, c, 0));
  float top = 0;
  for (auto v : out.values()) top = std::max(top, v);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = support.data()[i] && top > 0 ? static_cast<float>(peak * out.data()[i] / top) : 0.0f;
  }
  return out;
}

/// Deterministic scene for (params, seed). Shapes whose boundary is not a
/// strict closed contour are redrawn from the next sub-seed.
inline SyntheticScene gen_scene(const SceneParams& params, std::uint64_t seed) {
  params.validate();
  using namespace synth_detail;
  for (int attempt = 0; attempt < 64; ++attempt) {
    Rng rng = make_rng({seed, static_cast<std::uint64_t>(attempt), 0x5C3E7EULL});
    auto shape = build_shape(params, rng);
    // Opening removes sub-3px slivers that cannot carry a 1-px loop.
    shape.mask = prune_corners(dilate3x3(erode3x3(shape.mask)));
    for (std::size_t i = 0; i < shape.mask.size(); ++i) {
      if (!shape.mask.data()[i]) shape.part[i] = 0;
    }
    auto contour = boundary4(shape.mask);
    if (!check_contour(contour).closed()) continue;
    if (fill_closed_contour(contour) != shape.mask) continue;
    if (!contour(shape.waterline_row, (shape.bottom_begin + shape.bottom_end) / 2)) continue;

    SyntheticScene s;
    s.params = params;
    s.seed = seed;
    s.attempt = attempt;
    // The opening can shorten the drawn bottom edge; report the final run.
    s.waterline_row = shape.waterline_row;
    s.waterline_begin = s.waterline_end = (shape.bottom_begin + shape.bottom_end) / 2;
    while (s.waterline_begin > 0 && contour(s.waterline_row, s.waterline_begin - 1)) --s.waterline_begin;
    while (s.waterline_end < params.width - 1 && contour(s.waterline_row, s.waterline_end + 1)) ++s.waterline_end;
    s.image = render(shape, params, rng);
    s.gt_mask = shape.mask;
    s.gt_contour = contour;
    s.softmap = simulate_softmap(contour, params.peak);

    // Weak segments: 3-8 consecutive chain pixels and their neighbourhood.
    const auto chain = trace_gt_chain(contour);
    const long n = static_cast<long>(chain.size());
    const auto scale = static_cast<float>(params.gap_level / params.peak);
    BinaryMask weak(params.height, params.width);
    for (int g = 0; g < params.gaps; ++g) {
      const long start = uniform_int(rng, 0, static_cast<int>(n) - 1);
      const int glen = uniform_int(rng, 3, 8);
      for (long k = 0; k < glen; ++k) {
        const auto p = chain.at(start + k);
        s.gap_pixels.push_back(p);
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc)
            if (weak.in_bounds(p.row + dr, p.col + dc)) weak(p.row + dr, p.col + dc) = 1;
      }
    }
    for (std::size_t i = 0; i < weak.size(); ++i) {
      if (weak.data()[i]) s.softmap.data()[i] *= scale;
    }
    if (params.noise > 0) {
      for (auto& v : s.softmap.values()) v = clamp01(v + params.noise * uniform01(rng));
    }
    return s;
  }
  fail(ErrorKind::empty_result, "gen_scene: no valid shape for seed " + std::to_string(seed));
}

}  // namespace wtl
