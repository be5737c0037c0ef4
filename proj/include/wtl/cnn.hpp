#pragma once

// The direction regression CNN: five 3x3 conv blocks with batch norm and ReLU,
// max pooling after blocks 2 and 3, and a single-output fully connected layer.
//
//   input  13x13x4
//   conv1  3x3x4x64     pad 1        -> 13x13x64
//   conv2  3x3x64x128   pad 1, pool  ->  6x6x128
//   conv3  3x3x128x256  pad 1, pool  ->  3x3x256
//   conv4  3x3x256x512  pad 1        ->  3x3x512
//   conv5  3x3x512x1024 no pad       ->  1x1x1024
//   fc     1024 -> 1
//
// Activations are stored NHWC as row-major (batch * h * w) x channels
// matrices so every convolution is one im2col GEMM. The scalar type is a
// template parameter: float for training and inference, double for gradient
// checking.

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "wtl/binary_io.hpp"
#include "wtl/dataset.hpp"
#include "wtl/errors.hpp"
#include "wtl/raster.hpp"
#include "wtl/rng.hpp"

namespace wtl::cnn {

inline constexpr int kConvLayers = 5;
inline constexpr std::array<int, kConvLayers> kBaseChannels{64, 128, 256, 512, 1024};
inline constexpr std::array<bool, kConvLayers> kPadded{true, true, true, true, false};
inline constexpr std::array<bool, kConvLayers> kPooled{false, true, true, false, false};
inline constexpr double kBnEpsilon = 1e-5;
inline constexpr double kBnMomentum = 0.1;

/// Five conv layers and one linear head, every channel count divided by `width_divisor`
/// (1 reproduces the full network; larger values give a cheap test network).
struct Architecture {
  int width_divisor = 1;

  int in_channels(int layer) const { return layer == 0 ? Patch::kChannels : out_channels(layer - 1); }
  int out_channels(int layer) const { return kBaseChannels[static_cast<std::size_t>(layer)] / width_divisor; }
  int fc_inputs() const { return out_channels(kConvLayers - 1); }

  void validate() const {
    require(width_divisor >= 1 && 64 % width_divisor == 0, "width divisor must divide 64");
  }
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct Shape {
  int h = 0, w = 0, c = 0;
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Per-sample output shape after each conv block, then the FC output.
inline std::vector<Shape> layer_output_shapes(const Architecture& arch) {
  std::vector<Shape> shapes;
  int side = Patch::kSide;
  for (int l = 0; l < kConvLayers; ++l) {
    side = kPadded[static_cast<std::size_t>(l)] ? side : side - 2;
    if (kPooled[static_cast<std::size_t>(l)]) side /= 2;
    shapes.push_back({side, side, arch.out_channels(l)});
  }
  shapes.push_back({1, 1, 1});
  return shapes;
}

template <typename S>
struct ConvParams {
  int in = 0;
  int out = 0;
  std::vector<S> kernel;  // [out][ky][kx][in]
  std::vector<S> bias;
  std::vector<S> gamma;
  std::vector<S> beta;
  std::vector<S> running_mean;
  std::vector<S> running_var;

  friend bool operator==(const ConvParams&, const ConvParams&) = default;
};

struct TensorInfo {
  std::string name;
  std::vector<std::uint32_t> dims;
  bool trainable = true;
};

/// All parameters of the network. Also used as the gradient container.
template <typename S>
struct Weights {
  Architecture arch;
  std::uint64_t seed = 0;
  std::array<ConvParams<S>, kConvLayers> conv;
  std::vector<S> fc_weight;
  std::vector<S> fc_bias;

  /// Zero kernels/biases/BN affine terms, unit running variance.
  static Weights zeros(Architecture arch) {
    arch.validate();
    Weights w;
    w.arch = arch;
    for (int l = 0; l < kConvLayers; ++l) {
      auto& c = w.conv[static_cast<std::size_t>(l)];
      c.in = arch.in_channels(l);
      c.out = arch.out_channels(l);
      const auto o = static_cast<std::size_t>(c.out);
      c.kernel.assign(o * 9 * static_cast<std::size_t>(c.in), S(0));
      c.bias.assign(o, S(0));
      c.gamma.assign(o, S(0));
      c.beta.assign(o, S(0));
      c.running_mean.assign(o, S(0));
      c.running_var.assign(o, S(1));
    }
    w.fc_weight.assign(static_cast<std::size_t>(arch.fc_inputs()), S(0));
    w.fc_bias.assign(1, S(0));
    return w;
  }

  /// He-normal kernels, BN scale 1 / shift 0, zero biases.
  static Weights he_init(Architecture arch, std::uint64_t seed) {
    Weights w = zeros(arch);
    w.seed = seed;
    Rng rng = make_rng({seed, 0x5eedULL});
    for (auto& c : w.conv) {
      const double stddev = std::sqrt(2.0 / (9.0 * c.in));
      for (auto& k : c.kernel) k = static_cast<S>(stddev * normal(rng));
      std::fill(c.gamma.begin(), c.gamma.end(), S(1));
    }
    const double stddev = std::sqrt(1.0 / arch.fc_inputs());
    for (auto& k : w.fc_weight) k = static_cast<S>(stddev * normal(rng));
    return w;
  }

  /// Visits every tensor in the fixed file order.
  template <typename F>
  void for_each_tensor(F&& f) {
    for_each_impl(*this, f);
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    for_each_impl(*this, f);
  }

  template <typename T>
  Weights<T> cast() const {
    Weights<T> out;
    out.arch = arch;
    out.seed = seed;
    auto conv_vec = [](const std::vector<S>& v) { return std::vector<T>(v.begin(), v.end()); };
    for (std::size_t l = 0; l < conv.size(); ++l) {
      const auto& a = conv[l];
      auto& b = out.conv[l];
      b.in = a.in;
      b.out = a.out;
      b.kernel = conv_vec(a.kernel);
      b.bias = conv_vec(a.bias);
      b.gamma = conv_vec(a.gamma);
      b.beta = conv_vec(a.beta);
      b.running_mean = conv_vec(a.running_mean);
      b.running_var = conv_vec(a.running_var);
    }
    out.fc_weight = conv_vec(fc_weight);
    out.fc_bias = conv_vec(fc_bias);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_tensor([&](const TensorInfo& info, const std::vector<S>& v) {
      if (info.trainable) n += v.size();
    });
    return n;
  }

  friend bool operator==(const Weights&, const Weights&) = default;

 private:
  template <typename Self, typename F>
  static void for_each_impl(Self& self, F& f) {
    for (int l = 0; l < kConvLayers; ++l) {
      auto& c = self.conv[static_cast<std::size_t>(l)];
      const std::string p = "conv" + std::to_string(l + 1) + ".";
      const auto o = static_cast<std::uint32_t>(c.out);
      const auto i = static_cast<std::uint32_t>(c.in);
      f(TensorInfo{p + "kernel", {o, 3, 3, i}, true}, c.kernel);
      f(TensorInfo{p + "bias", {o}, true}, c.bias);
      f(TensorInfo{p + "bn_scale", {o}, true}, c.gamma);
      f(TensorInfo{p + "bn_shift", {o}, true}, c.beta);
      f(TensorInfo{p + "bn_running_mean", {o}, false}, c.running_mean);
      f(TensorInfo{p + "bn_running_var", {o}, false}, c.running_var);
    }
    f(TensorInfo{"fc.weight", {static_cast<std::uint32_t>(self.fc_weight.size())}, true}, self.fc_weight);
    f(TensorInfo{"fc.bias", {1}, true}, self.fc_bias);
  }
};

enum class Mode { train, infer };

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;

/// Intermediate values kept by a forward pass for the backward pass.
template <typename S>
struct ForwardCache {
  struct Block {
    Shape in_shape;     // per-sample input shape
    Shape conv_shape;   // per-sample conv output shape (before pooling)
    Mat<S> columns;     // im2col, (batch*ho*wo) x (9*in)
    Mat<S> normalized;  // BN x-hat
    RowVec<S> inv_std;
    Mat<S> activated;   // after BN affine + ReLU
    std::vector<std::int32_t> pool_argmax;  // source row per pooled element
  };
  int batch = 0;
  std::array<Block, kConvLayers> blocks;
  std::vector<Shape> output_shapes;  // after each block, then FC
  Mat<S> fc_input;                   // batch x fc_inputs
  std::vector<S> output;
};

namespace detail {

inline const char* kLayerNames[] = {"conv1", "conv2", "conv3", "conv4", "conv5", "fc"};

template <typename S>
void check_finite(const Mat<S>& m, int layer) {
  if (!m.allFinite()) fail(ErrorKind::numeric, std::string("non-finite activation in ") + kLayerNames[layer]);
}

template <typename S>
Mat<S> im2col(const Mat<S>& in, int batch, Shape s, int pad) {
  const int ho = s.h + 2 * pad - 2;
  const int wo = s.w + 2 * pad - 2;
  Mat<S> cols = Mat<S>::Zero(static_cast<Eigen::Index>(batch) * ho * wo, 9 * s.c);
  for (int b = 0; b < batch; ++b) {
    for (int y = 0; y < ho; ++y) {
      for (int x = 0; x < wo; ++x) {
        const Eigen::Index row = (static_cast<Eigen::Index>(b) * ho + y) * wo + x;
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= s.h) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int sx = x + kx - pad;
            if (sx < 0 || sx >= s.w) continue;
            const Eigen::Index src = (static_cast<Eigen::Index>(b) * s.h + sy) * s.w + sx;
            cols.row(row).segment((ky * 3 + kx) * s.c, s.c) = in.row(src);
          }
        }
      }
    }
  }
  return cols;
}

template <typename S>
Mat<S> col2im(const Mat<S>& cols, int batch, Shape s, int pad) {
  const int ho = s.h + 2 * pad - 2;
  const int wo = s.w + 2 * pad - 2;
  Mat<S> out = Mat<S>::Zero(static_cast<Eigen::Index>(batch) * s.h * s.w, s.c);
  for (int b = 0; b < batch; ++b) {
    for (int y = 0; y < ho; ++y) {
      for (int x = 0; x < wo; ++x) {
        const Eigen::Index row = (static_cast<Eigen::Index>(b) * ho + y) * wo + x;
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= s.h) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int sx = x + kx - pad;
            if (sx < 0 || sx >= s.w) continue;
            const Eigen::Index dst = (static_cast<Eigen::Index>(b) * s.h + sy) * s.w + sx;
            out.row(dst) += cols.row(row).segment((ky * 3 + kx) * s.c, s.c);
          }
        }
      }
    }
  }
  return out;
}

template <typename S>
Mat<S> patches_to_nhwc(std::span<const Patch> patches) {
  constexpr int side = Patch::kSide;
  Mat<S> m(static_cast<Eigen::Index>(patches.size()) * side * side, Patch::kChannels);
  for (std::size_t b = 0; b < patches.size(); ++b) {
    for (int r = 0; r < side; ++r) {
      for (int c = 0; c < side; ++c) {
        const auto row = (static_cast<Eigen::Index>(b) * side + r) * side + c;
        for (int ch = 0; ch < Patch::kChannels; ++ch) m(row, ch) = static_cast<S>(patches[b](ch, r, c));
      }
    }
  }
  return m;
}

}  // namespace detail

/// Infer-mode batches run in zero-padded chunks of this many samples. Every
/// GEMM then has the same dimensions, hence the same blocking and rounding, so
/// a patch's output is independent of the batch it arrives in.
inline constexpr int kInferChunk = 16;

namespace detail {

template <typename S>
std::vector<S> forward_batch(Weights<S>& w, std::span<const Patch> patches, Mode mode, ForwardCache<S>* cache,
                             bool update_running_stats);

}  // namespace detail

/// Runs the network on a batch and returns one raw (scaled) output per patch.
/// Train mode normalizes with batch statistics and, when
/// `update_running_stats` is set, folds them into the running estimates.
/// A cache, when given, is filled for the backward pass (train mode only).
template <typename S>
std::vector<S> forward(Weights<S>& w, std::span<const Patch> patches, Mode mode,
                       std::type_identity_t<ForwardCache<S>>* cache = nullptr,
                       bool update_running_stats = true) {
  const int batch = static_cast<int>(patches.size());
  if (batch == 0) fail(ErrorKind::invalid_argument, "cnn_forward: empty batch");
  if (mode == Mode::train) {
    if (batch < 2) {
      fail(ErrorKind::invalid_argument, "cnn_forward: train mode needs at least 2 samples for batch variance");
    }
    return detail::forward_batch(w, patches, mode, cache, update_running_stats);
  }
  require(cache == nullptr, "cnn_forward: cache is only kept in train mode");
  std::vector<S> out;
  out.reserve(patches.size());
  std::array<Patch, kInferChunk> chunk{};
  for (std::size_t start = 0; start < patches.size(); start += kInferChunk) {
    const auto n = std::min<std::size_t>(kInferChunk, patches.size() - start);
    std::copy_n(patches.begin() + static_cast<std::ptrdiff_t>(start), n, chunk.begin());
    std::fill(chunk.begin() + static_cast<std::ptrdiff_t>(n), chunk.end(), Patch{});
    const auto y = detail::forward_batch<S>(w, std::span<const Patch>(chunk), mode, nullptr, false);
    out.insert(out.end(), y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n));
  }
  return out;
}

template <typename S>
std::vector<S> detail::forward_batch(Weights<S>& w, std::span<const Patch> patches, Mode mode,
                                     ForwardCache<S>* cache, bool update_running_stats) {
  const int batch = static_cast<int>(patches.size());
  ForwardCache<S> local;
  ForwardCache<S>& fc = cache ? *cache : local;
  fc.batch = batch;
  fc.output_shapes.clear();

  Mat<S> act = detail::patches_to_nhwc<S>(patches);
  Shape shape{Patch::kSide, Patch::kSide, Patch::kChannels};
  for (int l = 0; l < kConvLayers; ++l) {
    auto& p = w.conv[static_cast<std::size_t>(l)];
    auto& blk = fc.blocks[static_cast<std::size_t>(l)];
    const int pad = kPadded[static_cast<std::size_t>(l)] ? 1 : 0;
    blk.in_shape = shape;
    blk.columns = detail::im2col<S>(act, batch, shape, pad);
    const Shape conv_shape{shape.h + 2 * pad - 2, shape.w + 2 * pad - 2, p.out};
    blk.conv_shape = conv_shape;

    Eigen::Map<const Mat<S>> kernel(p.kernel.data(), p.out, 9 * p.in);
    Eigen::Map<const RowVec<S>> bias(p.bias.data(), p.out);
    // Samples run along the GEMM's column axis: every column follows the same
    // in-order FMA chain, so a patch's result does not depend on where it sits
    // in the batch (the row axis has tail kernels that round differently).
    Mat<S> y = (kernel * blk.columns.transpose()).transpose();
    y.rowwise() += bias;

    const auto m = static_cast<S>(y.rows());
    RowVec<S> mean(p.out), var(p.out);
    if (mode == Mode::train) {
      mean = y.colwise().sum() / m;
      var = (y.rowwise() - mean).array().square().colwise().sum() / m;
      if (update_running_stats) {
        const S mom = static_cast<S>(kBnMomentum);
        const S unbias = m > 1 ? m / (m - 1) : S(1);
        for (int c = 0; c < p.out; ++c) {
          p.running_mean[static_cast<std::size_t>(c)] = (1 - mom) * p.running_mean[static_cast<std::size_t>(c)] + mom * mean(c);
          p.running_var[static_cast<std::size_t>(c)] =
              (1 - mom) * p.running_var[static_cast<std::size_t>(c)] + mom * var(c) * unbias;
        }
      }
    } else {
      mean = Eigen::Map<const RowVec<S>>(p.running_mean.data(), p.out);
      var = Eigen::Map<const RowVec<S>>(p.running_var.data(), p.out);
    }
    blk.inv_std = (var.array() + static_cast<S>(kBnEpsilon)).rsqrt();
    blk.normalized = (y.rowwise() - mean).array().rowwise() * blk.inv_std.array();
    Eigen::Map<const RowVec<S>> gamma(p.gamma.data(), p.out);
    Eigen::Map<const RowVec<S>> beta(p.beta.data(), p.out);
    blk.activated = ((blk.normalized.array().rowwise() * gamma.array()).rowwise() + beta.array()).cwiseMax(S(0));
    detail::check_finite(blk.activated, l);

    if (kPooled[static_cast<std::size_t>(l)]) {
      const Shape pooled{conv_shape.h / 2, conv_shape.w / 2, conv_shape.c};
      Mat<S> out(static_cast<Eigen::Index>(batch) * pooled.h * pooled.w, pooled.c);
      blk.pool_argmax.assign(static_cast<std::size_t>(out.size()), 0);
      for (int b = 0; b < batch; ++b) {
        for (int y2 = 0; y2 < pooled.h; ++y2) {
          for (int x2 = 0; x2 < pooled.w; ++x2) {
            const Eigen::Index orow = (static_cast<Eigen::Index>(b) * pooled.h + y2) * pooled.w + x2;
            for (int c = 0; c < pooled.c; ++c) {
              Eigen::Index best_row = -1;
              S best = -std::numeric_limits<S>::infinity();
              for (int dy = 0; dy < 2; ++dy) {
                for (int dx = 0; dx < 2; ++dx) {
                  const Eigen::Index src =
                      (static_cast<Eigen::Index>(b) * conv_shape.h + 2 * y2 + dy) * conv_shape.w + 2 * x2 + dx;
                  if (blk.activated(src, c) > best) {
                    best = blk.activated(src, c);
                    best_row = src;
                  }
                }
              }
              out(orow, c) = best;
              blk.pool_argmax[static_cast<std::size_t>(orow * pooled.c + c)] = static_cast<std::int32_t>(best_row);
            }
          }
        }
      }
      act = std::move(out);
      shape = pooled;
    } else {
      act = blk.activated;
      shape = conv_shape;
    }
    fc.output_shapes.push_back(shape);
  }

  // conv5 output is 1x1, so rows are already one per sample.
  fc.fc_input = std::move(act);
  Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>> fcw(w.fc_weight.data(), static_cast<Eigen::Index>(w.fc_weight.size()));
  Eigen::Matrix<S, Eigen::Dynamic, 1> out(batch);
  for (int b = 0; b < batch; ++b) out(b) = fc.fc_input.row(b).dot(fcw.transpose()) + w.fc_bias[0];
  fc.output.assign(out.data(), out.data() + out.size());
  if (!out.allFinite()) fail(ErrorKind::numeric, "non-finite activation in fc");
  fc.output_shapes.push_back({1, 1, 1});
  return fc.output;
}

/// MSE loss of a train-mode forward pass and its gradient w.r.t. every
/// trainable parameter (running statistics get zero gradient).
template <typename S>
S backward(const Weights<S>& w, const ForwardCache<S>& fc, std::span<const S> labels, Weights<S>& grads) {
  const int batch = fc.batch;
  require(static_cast<int>(labels.size()) == batch, "cnn_backward: label count must equal batch size");
  grads = Weights<S>::zeros(w.arch);
  for (auto& c : grads.conv) std::fill(c.running_var.begin(), c.running_var.end(), S(0));

  S loss = 0;
  Eigen::Matrix<S, Eigen::Dynamic, 1> dout(batch);
  for (int b = 0; b < batch; ++b) {
    const S d = fc.output[static_cast<std::size_t>(b)] - labels[static_cast<std::size_t>(b)];
    loss += d * d;
    dout(b) = 2 * d / static_cast<S>(batch);
  }
  loss /= static_cast<S>(batch);

  Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>> gfc(grads.fc_weight.data(), static_cast<Eigen::Index>(grads.fc_weight.size()));
  gfc = fc.fc_input.transpose() * dout;
  grads.fc_bias[0] = dout.sum();
  Eigen::Map<const RowVec<S>> fcw(w.fc_weight.data(), static_cast<Eigen::Index>(w.fc_weight.size()));
  Mat<S> dact = dout * fcw;  // batch x fc_inputs

  for (int l = kConvLayers - 1; l >= 0; --l) {
    const auto& p = w.conv[static_cast<std::size_t>(l)];
    auto& g = grads.conv[static_cast<std::size_t>(l)];
    const auto& blk = fc.blocks[static_cast<std::size_t>(l)];
    const int pad = kPadded[static_cast<std::size_t>(l)] ? 1 : 0;

    Mat<S> dz;
    if (kPooled[static_cast<std::size_t>(l)]) {
      dz = Mat<S>::Zero(blk.activated.rows(), blk.activated.cols());
      const auto cols = dact.cols();
      for (Eigen::Index r = 0; r < dact.rows(); ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
          dz(blk.pool_argmax[static_cast<std::size_t>(r * cols + c)], c) += dact(r, c);
        }
      }
    } else {
      dz = std::move(dact);
    }
    dz = (blk.activated.array() > S(0)).select(dz, S(0));

    // batch norm
    const auto m = static_cast<S>(dz.rows());
    RowVec<S> dgamma = (dz.array() * blk.normalized.array()).colwise().sum();
    RowVec<S> dbeta = dz.colwise().sum();
    Eigen::Map<const RowVec<S>> gamma(p.gamma.data(), p.out);
    Mat<S> dxhat = dz.array().rowwise() * gamma.array();
    RowVec<S> sum_dxhat = dxhat.colwise().sum();
    RowVec<S> sum_dxhat_xhat = (dxhat.array() * blk.normalized.array()).colwise().sum();
    Mat<S> dy = ((dxhat * m).rowwise() - sum_dxhat).array() -
                (blk.normalized.array().rowwise() * sum_dxhat_xhat.array());
    dy = dy.array().rowwise() * (blk.inv_std.array() / m);

    for (int c = 0; c < p.out; ++c) {
      g.gamma[static_cast<std::size_t>(c)] = dgamma(c);
      g.beta[static_cast<std::size_t>(c)] = dbeta(c);
    }
    RowVec<S> dbias = dy.colwise().sum();
    for (int c = 0; c < p.out; ++c) g.bias[static_cast<std::size_t>(c)] = dbias(c);
    Eigen::Map<Mat<S>> dkernel(g.kernel.data(), p.out, 9 * p.in);
    dkernel.noalias() = dy.transpose() * blk.columns;

    if (l > 0) {
      Eigen::Map<const Mat<S>> kernel(p.kernel.data(), p.out, 9 * p.in);
      Mat<S> dcols = dy * kernel;
      dact = detail::col2im<S>(dcols, batch, blk.in_shape, pad);
    }
  }
  return loss;
}

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  int batch_size = 64;
  int epochs = 30;
  double label_scale = 180.0;
  std::uint64_t seed = 1;
  int width_divisor = 1;

  void validate() const {
    require(learning_rate > 0, "learning rate must be positive");
    require(momentum >= 0 && momentum < 1, "momentum must be in [0, 1)");
    require(batch_size >= 1, "batch size must be at least 1");
    require(epochs >= 1, "epoch count must be at least 1");
    require(label_scale > 0, "label scale must be positive");
  }
};

/// velocity <- momentum * velocity - lr * gradient; weight <- weight + velocity.
/// Running statistics are left untouched.
template <typename S>
void sgd_step(Weights<S>& w, const Weights<S>& grads, Weights<S>& velocity, const TrainConfig& cfg) {
  std::vector<std::vector<S>*> wt, vt;
  std::vector<const std::vector<S>*> gt;
  std::vector<bool> trainable;
  w.for_each_tensor([&](const TensorInfo& info, std::vector<S>& v) {
    wt.push_back(&v);
    trainable.push_back(info.trainable);
  });
  grads.for_each_tensor([&](const TensorInfo&, const std::vector<S>& v) { gt.push_back(&v); });
  velocity.for_each_tensor([&](const TensorInfo&, std::vector<S>& v) { vt.push_back(&v); });
  require(wt.size() == gt.size() && wt.size() == vt.size(), "sgd_step: tensor count mismatch");
  const S lr = static_cast<S>(cfg.learning_rate);
  const S mu = static_cast<S>(cfg.momentum);
  for (std::size_t t = 0; t < wt.size(); ++t) {
    if (!trainable[t]) continue;
    auto& wv = *wt[t];
    const auto& gv = *gt[t];
    auto& vv = *vt[t];
    require(wv.size() == gv.size() && wv.size() == vv.size(), "sgd_step: tensor shape mismatch");
    for (std::size_t i = 0; i < wv.size(); ++i) {
      vv[i] = mu * vv[i] - lr * gv[i];
      wv[i] += vv[i];
    }
  }
}

struct EpochLoss {
  int epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
};

struct TrainResult {
  Weights<float> weights;
  std::vector<EpochLoss> curve;
  int best_epoch = 0;
};

/// Mean squared error of infer-mode predictions against scaled labels.
template <typename S>
double evaluate_mse(Weights<S>& w, std::span<const LabelRecord> records, double label_scale, int batch_size = 256) {
  if (records.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = 0;
  std::vector<Patch> patches;
  for (std::size_t start = 0; start < records.size(); start += static_cast<std::size_t>(batch_size)) {
    const auto end = std::min(records.size(), start + static_cast<std::size_t>(batch_size));
    patches.clear();
    for (auto i = start; i < end; ++i) patches.push_back(records[i].patch);
    const auto out = forward(w, std::span<const Patch>(patches), Mode::infer);
    for (auto i = start; i < end; ++i) {
      const double d = static_cast<double>(out[i - start]) - records[i].alpha_label.deg() / label_scale;
      sum += d * d;
    }
  }
  return sum / static_cast<double>(records.size());
}

using EpochCallback = std::function<void(const EpochLoss&)>;

/// Mini-batch SGD with momentum on the MSE of scaled labels. Returns the
/// weights of the epoch with the lowest validation loss.
inline TrainResult train(const DatasetSplit& data, const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (data.train.empty()) fail(ErrorKind::invalid_argument, "train: empty training set");
  const Architecture arch{cfg.width_divisor};
  auto w = Weights<float>::he_init(arch, cfg.seed);
  auto velocity = Weights<float>::zeros(arch);
  for (auto& c : velocity.conv) std::fill(c.running_var.begin(), c.running_var.end(), 0.0f);
  Weights<float> grads;
  ForwardCache<float> cache;
  Rng rng = make_rng({cfg.seed, 0x7a1fULL});

  TrainResult result;
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(data.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<Patch> patches;
  std::vector<float> labels;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    std::size_t loss_n = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const auto end = std::min(order.size(), start + batch);
      if (end - start < 2) continue;  // batch norm needs two samples
      patches.clear();
      labels.clear();
      for (auto i = start; i < end; ++i) {
        const auto& rec = data.train[order[i]];
        patches.push_back(rec.patch);
        labels.push_back(static_cast<float>(rec.alpha_label.deg() / cfg.label_scale));
      }
      forward(w, std::span<const Patch>(patches), Mode::train, &cache);
      const float loss = backward(w, cache, std::span<const float>(labels), grads);
      sgd_step(w, grads, velocity, cfg);
      loss_sum += static_cast<double>(loss) * static_cast<double>(end - start);
      loss_n += end - start;
    }
    EpochLoss row{epoch, loss_n ? loss_sum / static_cast<double>(loss_n) : 0.0,
                  evaluate_mse(w, std::span<const LabelRecord>(data.validation), cfg.label_scale)};
    const double score = data.validation.empty() ? row.train_loss : row.val_loss;
    if (!std::isfinite(score)) fail(ErrorKind::numeric, "train: non-finite loss at epoch " + std::to_string(epoch));
    if (score < best) {
      best = score;
      result.weights = w;
      result.best_epoch = epoch;
    }
    result.curve.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  return result;
}

// Weights file layout (little-endian):
//   8 bytes  magic "WTLCNNW\0"
//   u32      format version (1)
//   u32      width divisor
//   u64      initialization seed
//   u32      tensor count
//   per tensor, in for_each_tensor order:
//     u32 name length, name bytes, u32 rank, rank x u32 dims, f32 payload

inline constexpr char kWeightsMagic[8] = {'W', 'T', 'L', 'C', 'N', 'N', 'W', '\0'};
inline constexpr std::uint32_t kWeightsVersion = 1;

inline void save_weights(const Weights<float>& w, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
  bin::Writer wr(out);
  wr.bytes(kWeightsMagic, 8);
  wr.u32(kWeightsVersion);
  wr.u32(static_cast<std::uint32_t>(w.arch.width_divisor));
  wr.u64(w.seed);
  std::uint32_t count = 0;
  w.for_each_tensor([&](const TensorInfo&, const std::vector<float>&) { ++count; });
  wr.u32(count);
  w.for_each_tensor([&](const TensorInfo& info, const std::vector<float>& v) {
    wr.u32(static_cast<std::uint32_t>(info.name.size()));
    wr.bytes(info.name.data(), info.name.size());
    wr.u32(static_cast<std::uint32_t>(info.dims.size()));
    for (auto d : info.dims) wr.u32(d);
    for (float x : v) wr.f32(x);
  });
  if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
}

inline Weights<float> load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open '" + path.string() + "'");
  bin::Reader rd(in, path.string());
  char magic[8];
  rd.bytes(magic, 8, "magic");
  if (std::string(magic, 8) != std::string(kWeightsMagic, 8)) {
    fail(ErrorKind::format, path.string() + ": bad magic, not a weights file");
  }
  const auto version = rd.u32("format version");
  if (version != kWeightsVersion) {
    fail(ErrorKind::format, path.string() + ": unsupported weights format version " + std::to_string(version) +
                                " (expected " + std::to_string(kWeightsVersion) + ")");
  }
  const auto divisor = static_cast<int>(rd.u32("width divisor"));
  if (divisor < 1 || 64 % divisor != 0) fail(ErrorKind::format, path.string() + ": invalid width divisor");
  auto w = Weights<float>::zeros(Architecture{divisor});
  w.seed = rd.u64("seed");
  std::uint32_t expected = 0;
  w.for_each_tensor([&](const TensorInfo&, const std::vector<float>&) { ++expected; });
  const auto count = rd.u32("tensor count");
  if (count != expected) {
    fail(ErrorKind::format, path.string() + ": tensor count " + std::to_string(count) + ", expected " +
                                std::to_string(expected));
  }
  w.for_each_tensor([&](const TensorInfo& info, std::vector<float>& v) {
    const auto len = rd.u32("name of tensor '" + info.name + "'");
    if (len > 256) fail(ErrorKind::format, path.string() + ": corrupt name for tensor '" + info.name + "'");
    std::string name(len, '\0');
    rd.bytes(name.data(), len, "name of tensor '" + info.name + "'");
    if (name != info.name) {
      fail(ErrorKind::format, path.string() + ": found tensor '" + name + "' where '" + info.name + "' was expected");
    }
    const auto rank = rd.u32("rank of tensor '" + info.name + "'");
    std::vector<std::uint32_t> dims;
    if (rank <= 8) {
      for (std::uint32_t i = 0; i < rank; ++i) dims.push_back(rd.u32("shape of tensor '" + info.name + "'"));
    }
    if (dims != info.dims) fail(ErrorKind::format, path.string() + ": shape mismatch for tensor '" + info.name + "'");
    for (float& x : v) x = rd.f32("payload of tensor '" + info.name + "'");
  });
  return w;
}

}  // namespace wtl::cnn
