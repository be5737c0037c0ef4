#pragma once

// Contour completion: seed tracers at fragment ends of the thresholded soft
// map, advance them in synchronized batches with random step sizes, cull the
// ones that leave the image, wander off the contour or cross their own path,
// repeat on the mirrored scene, and sum every path into one map.

#include <array>
#include <chrono>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "wtl/errors.hpp"
#include "wtl/morphology.hpp"
#include "wtl/parallel.hpp"
#include "wtl/predictor.hpp"
#include "wtl/raster.hpp"
#include "wtl/rng.hpp"
#include "wtl/tracer.hpp"

namespace wtl {

struct CompletionConfig {
  double seed_threshold = 0.7;
  int checker_cell = 8;
  std::array<double, 3> step_probabilities{0.87, 0.12, 0.01};
  double bad_prob_threshold = 0.1;
  int loop_grace = 5;
  int max_steps_per_tracer = 0;  // 0 means 4 * (h + w)
  int min_fragment = 4;
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const {
    require(seed_threshold >= 0 && seed_threshold <= 1, "seed_threshold must be in [0, 1]");
    require(bad_prob_threshold >= 0 && bad_prob_threshold <= 1, "bad_prob_threshold must be in [0, 1]");
    require(checker_cell >= 1, "checker_cell must be positive");
    require(loop_grace >= 0, "loop_grace must be nonnegative");
    require(max_steps_per_tracer >= 0, "max_steps_per_tracer must be nonnegative");
    double sum = 0;
    for (double p : step_probabilities) {
      require(p >= 0, "step probabilities must be nonnegative");
      sum += p;
    }
    require(std::abs(sum - 1.0) < 1e-9, "step probabilities must sum to 1");
  }

  int max_steps(int h, int w) const { return max_steps_per_tracer > 0 ? max_steps_per_tracer : 4 * (h + w); }
};

/// Skeleton of the thresholded soft map with alternating checkerboard cells
/// removed.
inline BinaryMask fragment_skeleton(const Raster2D& softmap, const CompletionConfig& cfg) {
  auto skel = zhang_suen_thin(threshold(softmap, static_cast<float>(cfg.seed_threshold)));
  const int cell = cfg.checker_cell;
  for (int r = 0; r < skel.height(); ++r) {
    for (int c = 0; c < skel.width(); ++c) {
      if ((r / cell + c / cell) % 2 == 1) skel(r, c) = 0;
    }
  }
  return skel;
}

/// Start states at fragment endpoints, in raster order. The heading points
/// outward: from the fragment pixel three steps inward to the endpoint.
inline std::vector<TracerState> seed_tracers(const Raster2D& softmap, const CompletionConfig& cfg) {
  const auto frag = fragment_skeleton(softmap, cfg);
  const auto cc = connected_components(frag, 8);
  std::vector<TracerState> seeds;
  for (int r = 0; r < frag.height(); ++r) {
    for (int c = 0; c < frag.width(); ++c) {
      if (!frag(r, c) || neighbor_count(frag, r, c) != 1) continue;
      const int label = cc.labels(r, c);
      if (cc.sizes[static_cast<std::size_t>(label)] < static_cast<std::size_t>(cfg.min_fragment)) continue;
      const PixelCoord end{r, c};
      PixelCoord prev{-1, -1}, cur = end;
      for (int k = 0; k < 3; ++k) {
        PixelCoord next{-1, -1};
        // Axis neighbours first so staircases are followed pixel by pixel.
        for (int pass = 0; pass < 2 && next.row < 0; ++pass) {
          for (std::size_t j = static_cast<std::size_t>(pass); j < kNeighbors8.size(); j += 2) {
            const auto q = cur + kNeighbors8[j];
            if (frag.in_bounds(q) && frag[q] && q != prev && q != end) {
              next = q;
              break;
            }
          }
        }
        if (next.row < 0) break;
        prev = cur;
        cur = next;
      }
      seeds.push_back({end, offset_to_angle(end - cur)});
    }
  }
  return seeds;
}

/// Step size 1, 2 or 3 drawn with the configured probabilities.
inline int sample_step(Rng& rng, const std::array<double, 3>& probs = {0.87, 0.12, 0.01}) {
  const double u = uniform01(rng);
  if (u < probs[0]) return 1;
  if (u < probs[0] + probs[1]) return 2;
  return 3;
}

/// Outside the image, or nothing in the 3x3 neighbourhood reaches the threshold.
inline bool is_bad_location(const Raster2D& softmap, PixelCoord cp, const CompletionConfig& cfg) {
  if (!softmap.in_bounds(cp)) return true;
  float best = 0;
  for (int dr = -1; dr <= 1; ++dr) {
    for (int dc = -1; dc <= 1; ++dc) best = std::max(best, softmap.at_or(cp.row + dr, cp.col + dc, 0.0f));
  }
  return best < static_cast<float>(cfg.bad_prob_threshold);
}

/// Latest path position of every pixel a tracer has visited.
class VisitIndex {
 public:
  void record(PixelCoord p, std::size_t position) { last_[key(p)] = position; }
  const std::size_t* find(PixelCoord p) const {
    const auto it = last_.find(key(p));
    return it == last_.end() ? nullptr : &it->second;
  }

 private:
  static std::int64_t key(PixelCoord p) {
    return (static_cast<std::int64_t>(p.row) << 32) ^ static_cast<std::uint32_t>(p.col);
  }
  std::unordered_map<std::int64_t, std::size_t> last_;
};

/// True iff `cp_new` was visited before the last `loop_grace` path pixels.
inline bool is_looping(const PathTrace& path, const VisitIndex& visited, PixelCoord cp_new,
                       const CompletionConfig& cfg) {
  const auto* pos = visited.find(cp_new);
  if (!pos) return false;
  const auto n = path.pixels.size();
  const auto grace = static_cast<std::size_t>(cfg.loop_grace);
  return n > grace && *pos < n - grace;
}

enum class CullReason { out_of_bounds = 0, bad_location = 1, looping = 2, max_steps = 3 };
inline constexpr std::array<const char*, 4> kCullNames{"out_of_bounds", "bad_location", "looping", "max_steps"};

struct Tracer {
  TracerState state;
  PathTrace path;
  VisitIndex visits;
  int steps = 0;
  bool alive = true;
  CullReason reason = CullReason::max_steps;

  void visit(PixelCoord p) {
    visits.record(p, path.pixels.size());
    path.pixels.push_back(p);
  }
};

struct TracerPool {
  std::vector<Tracer> tracers;

  static TracerPool from_seeds(const std::vector<TracerState>& seeds, PathOrigin origin) {
    TracerPool pool;
    pool.tracers.reserve(seeds.size());
    for (const auto& s : seeds) {
      Tracer t;
      t.state = s;
      t.path.origin = origin;
      t.visit(s.cp);
      pool.tracers.push_back(std::move(t));
    }
    return pool;
  }

  std::size_t live() const {
    std::size_t n = 0;
    for (const auto& t : tracers) n += t.alive ? 1 : 0;
    return n;
  }
};

struct PassReport {
  std::size_t n0 = 0;
  std::size_t iterations = 0;
  std::array<std::size_t, 4> culls{};
  std::size_t path_pixels = 0;
  std::size_t max_batch = 0;
};

/// One synchronized iteration over the live tracers: batch prediction, one
/// step-size draw per tracer in pool order, then culling. Returns the number
/// of predictions made (the batch length).
inline std::size_t advance_pool(TracerPool& pool, const InputStack& stack, const DirectionPredictor& predictor,
                                const CompletionConfig& cfg, Rng& rng, PassReport* report = nullptr) {
  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < pool.tracers.size(); ++i) {
    if (pool.tracers[i].alive) live.push_back(i);
  }
  require(!live.empty(), "advance_pool: no live tracers");
  std::vector<Patch> patches(live.size());
  std::vector<TracerState> states(live.size());
  parallel_for(live.size(), cfg.threads, [&](std::size_t k) {
    states[k] = pool.tracers[live[k]].state;
    patches[k] = extract_oriented_patch(stack, states[k].cp, states[k].heading);
  });
  const auto alphas = predictor.predict(std::span<const Patch>(patches), std::span<const TracerState>(states));
  require(alphas.size() == live.size(), "predictor returned the wrong number of angles");

  const int max_steps = cfg.max_steps(stack.height(), stack.width());
  auto cull = [&](Tracer& t, CullReason why) {
    t.alive = false;
    t.reason = why;
    if (report) ++report->culls[static_cast<std::size_t>(why)];
  };
  for (std::size_t k = 0; k < live.size(); ++k) {
    Tracer& t = pool.tracers[live[k]];
    const TracerState next = step(t.state, alphas[k], sample_step(rng, cfg.step_probabilities));
    ++t.steps;
    bool stopped = false;
    for (auto p : rasterize_segment(t.state.cp, next.cp)) {
      if (!stack.in_bounds(p)) {
        t.path.left_image = true;
        cull(t, CullReason::out_of_bounds);
        stopped = true;
        break;
      }
      if (is_looping(t.path, t.visits, p, cfg)) {
        cull(t, CullReason::looping);
        stopped = true;
        break;
      }
      t.visit(p);
    }
    t.state = next;
    if (stopped) continue;
    if (is_bad_location(stack.softmap(), next.cp, cfg)) {
      cull(t, CullReason::bad_location);
    } else if (t.steps >= max_steps) {
      cull(t, CullReason::max_steps);
    }
  }
  return live.size();
}

struct PassResult {
  std::vector<PathTrace> paths;
  PassReport report;
};

/// One clockwise pass over `stack` until every tracer is culled.
inline PassResult run_pass(const InputStack& stack, const DirectionPredictor& predictor, const CompletionConfig& cfg,
                           int pass_index, PathOrigin origin = PathOrigin::clockwise) {
  cfg.validate();
  const auto seeds = seed_tracers(stack.softmap(), cfg);
  auto pool = TracerPool::from_seeds(seeds, origin);
  PassResult out;
  out.report.n0 = seeds.size();
  Rng rng = make_rng({cfg.seed, 0xC0117E7EULL, static_cast<std::uint64_t>(pass_index)});
  while (pool.live() > 0) {
    const auto n = advance_pool(pool, stack, predictor, cfg, rng, &out.report);
    out.report.max_batch = std::max(out.report.max_batch, n);
    ++out.report.iterations;
  }
  for (auto& t : pool.tracers) {
    out.report.path_pixels += t.path.pixels.size();
    out.paths.push_back(std::move(t.path));
  }
  return out;
}

/// Per-pixel number of path visits, with a [0, 1] view normalized by the max.
struct AccumulationMap {
  Grid<std::uint32_t> counts;

  std::uint32_t max_count() const {
    std::uint32_t m = 0;
    for (auto v : counts.values()) m = std::max(m, v);
    return m;
  }

  Raster2D normalized() const {
    Raster2D out(counts.height(), counts.width());
    const auto m = max_count();
    if (m == 0) return out;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      out.data()[i] = static_cast<float>(static_cast<double>(counts.data()[i]) / m);
    }
    return out;
  }
};

inline AccumulationMap accumulate(const std::vector<PathTrace>& paths, int h, int w) {
  AccumulationMap map{Grid<std::uint32_t>(h, w)};
  for (const auto& p : paths) {
    for (auto px : p.pixels) ++map.counts[px];
  }
  return map;
}

struct CompletionResult {
  AccumulationMap map;
  std::vector<PathTrace> paths;          // clockwise pass first, then mirrored-back pass
  std::array<PassReport, 2> passes;
  std::array<double, 2> seconds{};       // wall time per pass; not deterministic
};

/// Both passes: clockwise on the stack, then clockwise on the mirrored stack
/// (anticlockwise in the original) with paths mirrored back.
inline CompletionResult run_completion(const InputStack& stack, const DirectionPredictor& predictor,
                                       const CompletionConfig& cfg) {
  cfg.validate();
  if (seed_tracers(stack.softmap(), cfg).empty()) {
    fail(ErrorKind::empty_result, "completion: no tracer seeds at threshold " + std::to_string(cfg.seed_threshold));
  }
  CompletionResult out;
  using clock = std::chrono::steady_clock;
  auto t0 = clock::now();
  auto first = run_pass(stack, predictor, cfg, 0, PathOrigin::clockwise);
  out.seconds[0] = std::chrono::duration<double>(clock::now() - t0).count();

  t0 = clock::now();
  const auto mirrored_pred = predictor.mirrored(stack.width());
  auto second = run_pass(mirror_cols(stack), *mirrored_pred, cfg, 1, PathOrigin::clockwise);
  out.seconds[1] = std::chrono::duration<double>(clock::now() - t0).count();

  out.passes = {first.report, second.report};
  out.paths = std::move(first.paths);
  for (const auto& p : second.paths) out.paths.push_back(mirror_path(p, stack.width()));
  out.map = accumulate(out.paths, stack.height(), stack.width());
  return out;
}

}  // namespace wtl
