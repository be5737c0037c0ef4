#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "support/gradcheck.hpp"
#include "support/temp_dir.hpp"
#include "wtl/cnn.hpp"

namespace wtl::cnn {
namespace {

using testing::random_patches;

const Architecture kSmall{8};

DatasetSplit dataset_from(const std::vector<Patch>& patches, const std::vector<double>& labels_deg, int n_val) {
  DatasetSplit ds;
  for (std::size_t i = 0; i < patches.size(); ++i) {
    LabelRecord rec{patches[i], Angle::degrees(labels_deg[i]), 0, static_cast<std::uint32_t>(i), 0};
    (static_cast<int>(i) < n_val ? ds.validation : ds.train).push_back(rec);
  }
  return ds;
}

TEST(CnnShapes, MatchTableOne) {
  const auto shapes = layer_output_shapes(Architecture{1});
  const std::vector<Shape> want{{13, 13, 64}, {6, 6, 128}, {3, 3, 256}, {3, 3, 512}, {1, 1, 1024}, {1, 1, 1}};
  EXPECT_EQ(shapes, want);
}

TEST(CnnShapes, ForwardCacheAgreesWithTable) {
  auto w = Weights<float>::he_init(Architecture{1}, 3);
  const auto patches = random_patches(2, 1);
  ForwardCache<float> cache;
  const auto out = forward(w, std::span<const Patch>(patches), Mode::train, &cache);
  EXPECT_EQ(out.size(), 2u);
  EXPECT_EQ(cache.output_shapes, layer_output_shapes(Architecture{1}));
}

TEST(CnnShapes, ParameterCountOfFullNetwork) {
  // Kernels + conv biases + BN scale/shift, then the FC layer.
  std::size_t want = 0;
  const int ch[] = {4, 64, 128, 256, 512, 1024};
  for (int l = 0; l < 5; ++l) want += 9u * ch[l] * ch[l + 1] + 3u * ch[l + 1];
  want += 1024 + 1;
  EXPECT_EQ(Weights<float>::zeros(Architecture{1}).parameter_count(), want);
}

TEST(CnnForward, ZeroWeightsGiveFcBias) {
  auto w = Weights<float>::zeros(kSmall);
  w.fc_bias[0] = 0.375f;
  const auto patches = random_patches(3, 2);
  for (auto mode : {Mode::train, Mode::infer}) {
    for (float v : forward(w, std::span<const Patch>(patches), mode)) EXPECT_EQ(v, 0.375f);
  }
}

TEST(CnnForward, DuplicatePatchInferIsIdentical) {
  auto w = Weights<float>::he_init(kSmall, 4);
  auto patches = random_patches(3, 5);
  patches[2] = patches[0];
  const auto a = forward(w, std::span<const Patch>(patches), Mode::infer);
  EXPECT_EQ(a[0], a[2]);
  const auto b = forward(w, std::span<const Patch>(patches), Mode::infer);
  EXPECT_EQ(a, b);
}

TEST(CnnForward, InferDoesNotTouchRunningStats) {
  auto w = Weights<float>::he_init(kSmall, 4);
  const auto before = w;
  const auto patches = random_patches(4, 5);
  forward(w, std::span<const Patch>(patches), Mode::infer);
  EXPECT_EQ(w, before);
  forward(w, std::span<const Patch>(patches), Mode::train);
  EXPECT_NE(w.conv[0].running_mean, before.conv[0].running_mean);
}

TEST(CnnForward, ReluOutputsNonnegative) {
  auto w = Weights<float>::he_init(kSmall, 6);
  for (auto& c : w.conv) {
    for (auto& b : c.beta) b = -0.3f;
  }
  const auto patches = random_patches(5, 6);
  ForwardCache<float> cache;
  forward(w, std::span<const Patch>(patches), Mode::train, &cache);
  for (const auto& blk : cache.blocks) EXPECT_GE(blk.activated.minCoeff(), 0.0f);
  EXPECT_GE(cache.fc_input.minCoeff(), 0.0f);
}

TEST(CnnForward, BatchSizeErrors) {
  auto w = Weights<float>::he_init(kSmall, 1);
  const std::vector<Patch> none;
  const auto one = random_patches(1, 1);
  try {
    forward(w, std::span<const Patch>(none), Mode::infer);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_argument);
  }
  EXPECT_THROW(forward(w, std::span<const Patch>(one), Mode::train), Error);
  EXPECT_EQ(forward(w, std::span<const Patch>(one), Mode::infer).size(), 1u);
}

TEST(CnnForward, NonFiniteNamesLayer) {
  auto w = Weights<float>::he_init(kSmall, 1);
  w.conv[2].kernel[0] = std::numeric_limits<float>::infinity();
  const auto patches = random_patches(2, 1);
  try {
    forward(w, std::span<const Patch>(patches), Mode::infer);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::numeric);
    EXPECT_NE(std::string(e.what()).find("conv3"), std::string::npos);
  }
}

TEST(CnnBackward, PerfectPredictionHasZeroLossAndFcGradient) {
  auto w = Weights<double>::he_init(kSmall, 2);
  const auto patches = random_patches(4, 3);
  ForwardCache<double> cache;
  const auto out = forward(w, std::span<const Patch>(patches), Mode::train, &cache, false);
  Weights<double> g;
  const double loss = backward(w, cache, std::span<const double>(out), g);
  EXPECT_EQ(loss, 0.0);
  for (double v : g.fc_weight) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(g.fc_bias[0], 0.0);
}

TEST(CnnBackward, OpposingLabelsOnIdenticalInputs) {
  auto w = Weights<double>::he_init(kSmall, 2);
  auto patches = random_patches(2, 3);
  patches[1] = patches[0];
  ForwardCache<double> cache;
  forward(w, std::span<const Patch>(patches), Mode::train, &cache, false);
  Weights<double> g;
  const std::vector<double> labels{1.0, -1.0};
  EXPECT_GE(backward(w, cache, std::span<const double>(labels), g), 1.0);
}

TEST(CnnBackward, LabelCountMustMatch) {
  auto w = Weights<double>::he_init(kSmall, 2);
  const auto patches = random_patches(3, 3);
  ForwardCache<double> cache;
  forward(w, std::span<const Patch>(patches), Mode::train, &cache, false);
  Weights<double> g;
  const std::vector<double> labels{0.1, 0.2};
  EXPECT_THROW(backward(w, cache, std::span<const double>(labels), g), Error);
}

TEST(CnnBackward, MatchesFiniteDifferences) {
  const auto w = Weights<double>::he_init(kSmall, 42);
  const auto patches = random_patches(4, 7);
  const std::vector<double> labels{0.3, -0.2, 0.1, 0.5};
  const auto reports = testing::check_gradients(w, patches, labels, 20, 1e-3, 1);
  ASSERT_EQ(reports.size(), 6u);
  for (const auto& r : reports) {
    EXPECT_EQ(r.samples.size(), 20u) << r.layer;
    EXPECT_LT(r.max_rel_error, 1e-4) << r.layer;
  }
}

TEST(CnnBackward, FloatAgreesWithDouble) {
  const auto wd = Weights<double>::he_init(kSmall, 8);
  auto wf = wd.cast<float>();
  auto wd2 = wf.cast<double>();
  const auto patches = random_patches(4, 8);
  const std::vector<double> ld{0.1, 0.2, -0.3, 0.0};
  const std::vector<float> lf(ld.begin(), ld.end());
  ForwardCache<double> cd;
  ForwardCache<float> cf;
  forward(wd2, std::span<const Patch>(patches), Mode::train, &cd, false);
  forward(wf, std::span<const Patch>(patches), Mode::train, &cf, false);
  Weights<double> gd;
  Weights<float> gf;
  backward(wd2, cd, std::span<const double>(ld), gd);
  backward(wf, cf, std::span<const float>(lf), gf);
  for (std::size_t i = 0; i < gd.fc_weight.size(); ++i) EXPECT_NEAR(gf.fc_weight[i], gd.fc_weight[i], 1e-4);
}

TrainConfig sgd_cfg(double lr, double mu) {
  TrainConfig cfg;
  cfg.learning_rate = lr;
  cfg.momentum = mu;
  return cfg;
}

Weights<double> filled(double v) {
  auto w = Weights<double>::zeros(kSmall);
  w.for_each_tensor([&](const TensorInfo&, std::vector<double>& t) { std::fill(t.begin(), t.end(), v); });
  return w;
}

TEST(SgdStep, PlainGradientDescent) {
  auto w = filled(1.0);
  auto v = filled(0.0);
  const auto g = filled(2.0);
  sgd_step(w, g, v, sgd_cfg(0.1, 0.0));
  EXPECT_DOUBLE_EQ(w.conv[1].kernel[5], 0.8);
  EXPECT_DOUBLE_EQ(w.fc_bias[0], 0.8);
  // Running statistics are not trained.
  EXPECT_DOUBLE_EQ(w.conv[1].running_var[0], 1.0);
}

TEST(SgdStep, VelocityMovesWeightsWithZeroGradient) {
  auto w = filled(1.0);
  auto v = filled(0.5);
  const auto g = filled(0.0);
  sgd_step(w, g, v, sgd_cfg(0.1, 0.9));
  EXPECT_DOUBLE_EQ(w.fc_weight[3], 1.45);
  EXPECT_DOUBLE_EQ(v.fc_weight[3], 0.45);
}

TEST(SgdStep, TwoStepsUnrollRecurrence) {
  const double lr = 0.05, mu = 0.7, gv = 1.5;
  auto w = filled(0.0);
  auto v = filled(0.0);
  const auto g = filled(gv);
  sgd_step(w, g, v, sgd_cfg(lr, mu));
  sgd_step(w, g, v, sgd_cfg(lr, mu));
  EXPECT_NEAR(w.conv[0].gamma[0], -lr * gv * (2 + mu), 1e-15);
}

TEST(TrainConfigTest, Validation) {
  EXPECT_THROW(sgd_cfg(0.0, 0.5).validate(), Error);
  EXPECT_THROW(sgd_cfg(0.1, 1.0).validate(), Error);
  auto cfg = sgd_cfg(0.1, 0.5);
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Train, EmptyDatasetRejected) {
  try {
    train(DatasetSplit{}, TrainConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_argument);
  }
}

TEST(Train, ConstantLabelsConverge) {
  const auto patches = random_patches(1000, 11);
  const auto ds = dataset_from(patches, std::vector<double>(patches.size(), 0.0), 100);
  TrainConfig cfg;
  cfg.width_divisor = 8;
  cfg.epochs = 5;
  cfg.batch_size = 16;
  const auto res = train(ds, cfg);
  ASSERT_EQ(res.curve.size(), 5u);
  // Epoch-1 validation loss is around 1e-2 from the random initial features.
  EXPECT_LT(res.curve.back().val_loss, 1e-4);
}

TEST(Train, SeedDeterminism) {
  const auto patches = random_patches(120, 12);
  std::vector<double> labels;
  for (const auto& p : patches) labels.push_back(90.0 * (p(3, 6, 7) - 0.5));
  const auto ds = dataset_from(patches, labels, 20);
  TrainConfig cfg;
  cfg.width_divisor = 8;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  const auto a = train(ds, cfg);
  const auto b = train(ds, cfg);
  ASSERT_EQ(a.curve.size(), b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    EXPECT_EQ(a.curve[i].train_loss, b.curve[i].train_loss);
    EXPECT_EQ(a.curve[i].val_loss, b.curve[i].val_loss);
  }
  EXPECT_EQ(a.weights, b.weights);
}

TEST(Train, LinearToyLossDecreases) {
  // Label is a fixed linear function of one soft-map pixel.
  const auto patches = random_patches(600, 13);
  std::vector<double> labels;
  for (const auto& p : patches) labels.push_back(120.0 * (p(3, 6, 8) - 0.5));
  const auto ds = dataset_from(patches, labels, 60);
  TrainConfig cfg;
  cfg.width_divisor = 8;
  cfg.epochs = 4;
  cfg.batch_size = 32;
  const auto res = train(ds, cfg);
  int non_decreasing = 0;
  for (std::size_t i = 1; i < res.curve.size(); ++i) {
    if (res.curve[i].train_loss >= res.curve[i - 1].train_loss) ++non_decreasing;
  }
  EXPECT_LE(non_decreasing, 1);
  EXPECT_LT(res.curve.back().train_loss, res.curve.front().train_loss);
}

TEST(Train, ReturnsBestValidationEpoch) {
  const auto patches = random_patches(100, 14);
  std::vector<double> labels;
  for (const auto& p : patches) labels.push_back(60.0 * (p(3, 6, 6) - 0.5));
  const auto ds = dataset_from(patches, labels, 20);
  TrainConfig cfg;
  cfg.width_divisor = 8;
  cfg.epochs = 4;
  cfg.batch_size = 16;
  const auto res = train(ds, cfg);
  double best = 1e300;
  int best_epoch = 0;
  for (const auto& row : res.curve) {
    if (row.val_loss < best) {
      best = row.val_loss;
      best_epoch = row.epoch;
    }
  }
  EXPECT_EQ(res.best_epoch, best_epoch);
  auto w = res.weights;
  EXPECT_DOUBLE_EQ(evaluate_mse(w, std::span<const LabelRecord>(ds.validation), cfg.label_scale), best);
}

TEST(WeightsFile, RoundTripIsBitExact) {
  wtl::testing::TempDir dir;
  auto w = Weights<float>::he_init(kSmall, 77);
  w.conv[3].running_var[2] = 0.123f;
  const auto path = dir.path() / "w.bin";
  save_weights(w, path);
  EXPECT_EQ(load_weights(path), w);
}

TEST(WeightsFile, TruncatedNamesTensor) {
  wtl::testing::TempDir dir;
  const auto path = dir.path() / "w.bin";
  save_weights(Weights<float>::he_init(kSmall, 1), path);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 10);
  try {
    load_weights(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::format);
    EXPECT_NE(std::string(e.what()).find("fc.bias"), std::string::npos) << e.what();
  }
}

TEST(WeightsFile, WrongVersion) {
  wtl::testing::TempDir dir;
  const auto path = dir.path() / "w.bin";
  save_weights(Weights<float>::he_init(kSmall, 1), path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8);
    const char v = 9;
    f.write(&v, 1);
  }
  try {
    load_weights(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::format);
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
}

TEST(WeightsFile, ShapeMismatchNamesTensor) {
  wtl::testing::TempDir dir;
  const auto path = dir.path() / "w.bin";
  save_weights(Weights<float>::he_init(kSmall, 1), path);
  // First tensor header: magic 8, version 4, divisor 4, seed 8, count 4,
  // name length 4, "conv1.kernel" 12, rank 4, then dims[0].
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8 + 4 + 4 + 8 + 4 + 4 + 12 + 4);
    const char d = 99;
    f.write(&d, 1);
  }
  try {
    load_weights(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::format);
    EXPECT_NE(std::string(e.what()).find("conv1.kernel"), std::string::npos);
  }
}

TEST(WeightsFile, MissingFileIsIoError) {
  try {
    load_weights("/nonexistent/w.bin");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::io);
  }
}

}  // namespace
}  // namespace wtl::cnn
