#pragma once

// A single tracer: crop the oriented view, ask the predictor for a direction
// change, step to the nearest ring pixel and derive the new heading from the
// step actually taken.

#include <functional>
#include <vector>

#include "wtl/predictor.hpp"
#include "wtl/raster.hpp"

namespace wtl {

enum class PathOrigin { clockwise, anticlockwise };

/// Pixels visited by one tracer, start pixel first. Steps of 2 or 3 pixels
/// contribute their rasterized intermediate pixels, so consecutive entries are
/// always 8-adjacent.
struct PathTrace {
  std::vector<PixelCoord> pixels;
  PathOrigin origin = PathOrigin::clockwise;
  bool left_image = false;

  friend bool operator==(const PathTrace&, const PathTrace&) = default;
};

inline TracerState step(const TracerState& s, Angle alpha_cnn, int step_size) {
  const Angle candidate = wrap_angle(s.heading.deg() + alpha_cnn.deg());
  const Offset o = angle_to_offset(candidate, step_size);
  return {s.cp + o, offset_to_angle(o)};
}

/// Supplies the step size of each iteration.
using StepPolicy = std::function<int()>;

inline StepPolicy constant_step(int size) {
  require(size >= 1 && size <= 3, "step size must be 1, 2 or 3");
  return [size] { return size; };
}

/// Runs `steps` iterations or until the tracer leaves the image. Pixels of a
/// step that fall outside the image are not recorded.
inline PathTrace walk(const InputStack& stack, TracerState start, int steps, const DirectionPredictor& predictor,
                      const StepPolicy& policy = constant_step(1)) {
  require(stack.in_bounds(start.cp), "walk: start pixel outside the image");
  require(steps >= 0, "walk: negative step count");
  PathTrace path;
  path.pixels.push_back(start.cp);
  TracerState s = start;
  for (int i = 0; i < steps; ++i) {
    const Patch patch = extract_oriented_patch(stack, s.cp, s.heading);
    const Angle alpha = predictor.predict(std::span<const Patch>(&patch, 1), std::span<const TracerState>(&s, 1))[0];
    const TracerState next = step(s, alpha, policy());
    for (auto p : rasterize_segment(s.cp, next.cp)) {
      if (stack.in_bounds(p)) path.pixels.push_back(p);
    }
    s = next;
    if (!stack.in_bounds(s.cp)) {
      path.left_image = true;
      break;
    }
  }
  return path;
}

/// Path of a mirrored-scene walk expressed in the original image.
inline PathTrace mirror_path(const PathTrace& p, int width) {
  PathTrace out = p;
  for (auto& px : out.pixels) px.col = width - 1 - px.col;
  out.origin = p.origin == PathOrigin::clockwise ? PathOrigin::anticlockwise : PathOrigin::clockwise;
  return out;
}

}  // namespace wtl
