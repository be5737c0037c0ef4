#pragma once

// Training labels from a 1-px ground-truth contour: follow the clockwise chain
// three pixels to get the heading, three more to get the direction change,
// and capture the oriented patch where the tracer would stand.

#include <cmath>
#include <string>
#include <vector>

#include "wtl/chain.hpp"
#include "wtl/dataset.hpp"
#include "wtl/errors.hpp"
#include "wtl/parallel.hpp"
#include "wtl/raster.hpp"
#include "wtl/rng.hpp"

namespace wtl {

inline constexpr long kLookahead = 3;

/// Tracer position of a label record: chain[i + 3], optionally displaced one
/// pixel perpendicular to the heading (jitter -1 = left, +1 = right).
inline PixelCoord label_position(const ContourChain& chain, long i, int jitter) {
  const auto cp = chain.at(i + kLookahead);
  if (jitter == 0) return cp;
  const Angle a0 = offset_to_angle(cp - chain.at(i));
  return cp + angle_to_offset(wrap_angle(a0.deg() + 90.0 * jitter), 1);
}

/// Label angle of record (i, jitter); the unjittered case is
/// wrap(dir(chain[i+3] -> chain[i+6]) - dir(chain[i] -> chain[i+3])).
inline Angle label_angle(const ContourChain& chain, long i, int jitter) {
  const Angle a0 = offset_to_angle(chain.at(i + kLookahead) - chain.at(i));
  const auto cp = label_position(chain, i, jitter);
  return wrap_angle(offset_to_angle(chain.at(i + 2 * kLookahead) - cp).deg() - a0.deg());
}

inline LabelRecord make_label(const ContourChain& chain, const InputStack& stack, long i, int jitter = 0,
                              std::uint32_t image_id = 0) {
  require(chain.size() >= 7, "make_label: chain shorter than 7 pixels");
  require(jitter >= -1 && jitter <= 1, "make_label: jitter must be -1, 0 or +1");
  const Angle a0 = offset_to_angle(chain.at(i + kLookahead) - chain.at(i));
  const auto cp = label_position(chain, i, jitter);
  require(stack.in_bounds(cp), "make_label: tracer position outside the image");
  const long n = static_cast<long>(chain.size());
  LabelRecord rec;
  rec.patch = extract_oriented_patch(stack, cp, a0);
  rec.alpha_label = label_angle(chain, i, jitter);
  rec.image_id = image_id;
  rec.chain_index = static_cast<std::uint32_t>(((i % n) + n) % n);
  rec.jitter = jitter;
  return rec;
}

struct LabelScene {
  InputStack stack;
  BinaryMask gt_contour;
};

struct LabelGenConfig {
  std::uint64_t per_image = 1000;
  double validation_fraction = 0.1;
  double jitter_probability = 0.5;
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const {
    require(per_image >= 1, "per_image must be positive");
    require(validation_fraction >= 0 && validation_fraction < 1, "validation_fraction must be in [0, 1)");
    require(jitter_probability >= 0 && jitter_probability <= 1, "jitter_probability must be in [0, 1]");
  }
};

struct SceneFailure {
  std::uint32_t image_id;
  std::string message;
};

struct GeneratedDataset {
  DatasetSplit split;
  std::vector<SceneFailure> failures;
};

/// Per image: random chain indices (with replacement), jitter with the given
/// probability, shuffle, and split 90/10. Images are independent RNG streams
/// keyed by (seed, image id); invalid ground truths are reported, not fatal.
inline GeneratedDataset generate_dataset(const std::vector<LabelScene>& scenes, const LabelGenConfig& cfg = {}) {
  cfg.validate();
  struct Slot {
    std::vector<LabelRecord> train, validation;
    std::string error;
  };
  std::vector<Slot> slots(scenes.size());
  parallel_for(scenes.size(), cfg.threads, [&](std::size_t s) {
    const auto id = static_cast<std::uint32_t>(s);
    try {
      const auto chain = trace_gt_chain(scenes[s].gt_contour);
      if (chain.size() < 7) fail(ErrorKind::invalid_ground_truth, "ground-truth chain shorter than 7 pixels");
      const auto& stack = scenes[s].stack;
      Rng rng = make_rng({cfg.seed, id});
      std::vector<LabelRecord> recs;
      recs.reserve(cfg.per_image);
      const int last = static_cast<int>(chain.size()) - 1;
      for (std::size_t k = 0; k < cfg.per_image; ++k) {
        const long i = uniform_int(rng, 0, last);
        int jitter = 0;
        if (uniform01(rng) < cfg.jitter_probability) jitter = uniform01(rng) < 0.5 ? -1 : 1;
        if (jitter != 0) {
          const auto cp = label_position(chain, i, jitter);
          if (!stack.in_bounds(cp) || cp == chain.at(i + 2 * kLookahead)) jitter = 0;
        }
        recs.push_back(make_label(chain, stack, i, jitter, id));
      }
      shuffle(recs.begin(), recs.end(), rng);
      const auto n_val = static_cast<std::size_t>(std::lround(cfg.validation_fraction * static_cast<double>(recs.size())));
      const auto n_train = recs.size() - n_val;
      slots[s].train.assign(recs.begin(), recs.begin() + static_cast<long>(n_train));
      slots[s].validation.assign(recs.begin() + static_cast<long>(n_train), recs.end());
    } catch (const Error& e) {
      slots[s].error = e.what();
    }
  });
  GeneratedDataset out;
  out.split.split_seed = cfg.seed;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (!slots[s].error.empty()) {
      out.failures.push_back({static_cast<std::uint32_t>(s), slots[s].error});
      continue;
    }
    out.split.train.insert(out.split.train.end(), slots[s].train.begin(), slots[s].train.end());
    out.split.validation.insert(out.split.validation.end(), slots[s].validation.begin(), slots[s].validation.end());
  }
  return out;
}

}  // namespace wtl
