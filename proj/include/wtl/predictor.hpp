#pragma once

// Direction predictors. Each maps a batch of oriented patches (and the tracer
// states they were cut at) to direction changes relative to the current
// heading. The CNN is the real predictor; the oracle follows a known chain and
// the ridge baseline reads the soft-map orientation from the patch itself.

#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "wtl/chain.hpp"
#include "wtl/cnn.hpp"
#include "wtl/errors.hpp"
#include "wtl/parallel.hpp"
#include "wtl/raster.hpp"

namespace wtl {

struct TracerState {
  PixelCoord cp;
  Angle heading;

  friend bool operator==(const TracerState&, const TracerState&) = default;
};

class DirectionPredictor {
 public:
  virtual ~DirectionPredictor() = default;

  virtual std::string kind() const = 0;

  /// One relative direction change per patch; `states[i]` is where `patches[i]`
  /// was extracted.
  virtual std::vector<Angle> predict(std::span<const Patch> patches, std::span<const TracerState> states) const = 0;

  /// The predictor to use on the horizontally mirrored scene of width `width`.
  virtual std::unique_ptr<DirectionPredictor> mirrored(int width) const = 0;
};

/// Runs the trained network in inference mode; output x label scale, wrapped.
class CnnPredictor final : public DirectionPredictor {
 public:
  explicit CnnPredictor(cnn::Weights<float> weights, double label_scale = 180.0, int threads = 1)
      : weights_(std::make_shared<const cnn::Weights<float>>(std::move(weights))),
        label_scale_(label_scale),
        threads_(threads) {}

  std::string kind() const override { return "cnn"; }

  std::vector<Angle> predict(std::span<const Patch> patches, std::span<const TracerState>) const override {
    std::vector<Angle> out(patches.size());
    if (patches.empty()) return out;
    // Infer mode never writes to the weights.
    auto& w = const_cast<cnn::Weights<float>&>(*weights_);
    const std::size_t chunk = cnn::kInferChunk;
    const std::size_t chunks = (patches.size() + chunk - 1) / chunk;
    parallel_for(chunks, threads_, [&](std::size_t k) {
      const auto start = k * chunk;
      const auto n = std::min(chunk, patches.size() - start);
      const auto raw = cnn::forward(w, patches.subspan(start, n), cnn::Mode::infer);
      for (std::size_t i = 0; i < n; ++i) out[start + i] = wrap_angle(static_cast<double>(raw[i]) * label_scale_);
    });
    return out;
  }

  // The same network serves both passes: mirrored scenes are traced clockwise
  // in their own frame.
  std::unique_ptr<DirectionPredictor> mirrored(int) const override { return std::make_unique<CnnPredictor>(*this); }

  const cnn::Weights<float>& weights() const { return *weights_; }

 private:
  std::shared_ptr<const cnn::Weights<float>> weights_;
  double label_scale_;
  int threads_;
};

/// Ground-truth direction change at `state`: aim from cp at the chain pixel
/// three steps clockwise past the nearest chain pixel.
inline Angle oracle_predict(const ContourChain& chain, const TracerState& state) {
  require(!chain.empty(), "oracle_predict: empty chain");
  const auto& px = chain.pixels();
  long best = -1;
  long best_d2 = std::numeric_limits<long>::max();
  double best_align = -2;
  for (std::size_t i = 0; i < px.size(); ++i) {
    const long dr = px[i].row - state.cp.row, dc = px[i].col - state.cp.col;
    const long d2 = dr * dr + dc * dc;
    if (d2 > best_d2) continue;
    // Equal distance: prefer the pixel whose forward chain direction matches the heading.
    const auto ahead = chain.at(static_cast<long>(i) + 3) - px[i];
    const double align = std::cos((offset_to_angle(ahead).deg() - state.heading.deg()) * std::numbers::pi / 180.0);
    if (d2 < best_d2 || align > best_align) {
      best = static_cast<long>(i);
      best_d2 = d2;
      best_align = align;
    }
  }
  const auto target = chain.at(best + 3);
  return wrap_angle(offset_to_angle(target - state.cp).deg() - state.heading.deg());
}

class OraclePredictor final : public DirectionPredictor {
 public:
  explicit OraclePredictor(ContourChain chain) : chain_(std::move(chain)) {}

  std::string kind() const override { return "oracle"; }

  std::vector<Angle> predict(std::span<const Patch> patches, std::span<const TracerState> states) const override {
    require(patches.size() == states.size(), "oracle predictor needs one tracer state per patch");
    std::vector<Angle> out;
    out.reserve(states.size());
    for (const auto& s : states) out.push_back(oracle_predict(chain_, s));
    return out;
  }

  std::unique_ptr<DirectionPredictor> mirrored(int width) const override {
    return std::make_unique<OraclePredictor>(chain_.mirrored(width));
  }

  const ContourChain& chain() const { return chain_; }

 private:
  ContourChain chain_;
};

/// Orientation of the soft-map ridge in the patch frame from a Gaussian
/// weighted structure tensor, folded to the forward half-plane (-90, 90].
/// A flat patch gives 0.
inline Angle ridge_predict(const Patch& patch) {
  constexpr int n = Patch::kSide;
  constexpr int ch = Patch::kChannels - 1;
  constexpr double sigma = 3.0;
  double jxx = 0, jxy = 0, jyy = 0;
  for (int r = 1; r < n - 1; ++r) {
    for (int c = 1; c < n - 1; ++c) {
      const double gx = 0.5 * (patch(ch, r, c + 1) - patch(ch, r, c - 1));
      const double gy = 0.5 * (patch(ch, r + 1, c) - patch(ch, r - 1, c));
      const double d2 = (r - Patch::kCenter) * (r - Patch::kCenter) + (c - Patch::kCenter) * (c - Patch::kCenter);
      const double w = std::exp(-d2 / (2 * sigma * sigma));
      jxx += w * gx * gx;
      jxy += w * gx * gy;
      jyy += w * gy * gy;
    }
  }
  if (jxx + jyy < 1e-12) return Angle::degrees(0);
  // Dominant gradient orientation; the ridge runs perpendicular to it.
  const double grad = 0.5 * std::atan2(2 * jxy, jxx - jyy) * 180.0 / std::numbers::pi;
  double ridge = grad + 90.0;
  while (ridge > 90.0) ridge -= 180.0;
  while (ridge <= -90.0) ridge += 180.0;
  return Angle::degrees(ridge);
}

class RidgePredictor final : public DirectionPredictor {
 public:
  std::string kind() const override { return "ridge"; }

  std::vector<Angle> predict(std::span<const Patch> patches, std::span<const TracerState>) const override {
    std::vector<Angle> out;
    out.reserve(patches.size());
    for (const auto& p : patches) out.push_back(ridge_predict(p));
    return out;
  }

  std::unique_ptr<DirectionPredictor> mirrored(int) const override { return std::make_unique<RidgePredictor>(); }
};

}  // namespace wtl
