#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "mrs/losses.hpp"
#include "mrs/ops.hpp"
#include "mrs/optimizer.hpp"
#include "oracles.hpp"

namespace mrs {
namespace {

using ops::Mode;

Tensord random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Tensord t(std::move(shape));
  Rng rng(seed);
  for (Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

std::vector<double> to_vec(const Tensord& t) { return {t.data(), t.data() + t.size()}; }

// --- conv2d ----------------------------------------------------------------

TEST(Conv2D, IdentityKernelReproducesInput) {
  const Tensord x = random_tensor({2, 1, 5, 7}, 1);
  Tensord k({1, 1, 3, 3});
  k.at(0, 0, 1, 1) = 1.0;
  const Tensord y = ops::conv2d(x, k, Tensord({1}));
  EXPECT_EQ(y, x);
}

TEST(Conv2D, ZeroInputGivesBias) {
  const Tensord x({1, 2, 4, 4});
  const Tensord k = random_tensor({3, 2, 3, 3}, 2);
  const Tensord b({3}, {0.5, -1.0, 2.0});
  const Tensord y = ops::conv2d(x, k, b);
  for (Index ch = 0; ch < 3; ++ch)
    for (Index i = 0; i < 16; ++i) EXPECT_EQ(y[ch * 16 + i], b[ch]);
}

TEST(Conv2D, MatchesBruteForceOracle) {
  const Tensord x = random_tensor({1, 1, 5, 5}, 3);
  const Tensord k = random_tensor({2, 1, 3, 3}, 4);
  const Tensord b = random_tensor({2}, 5);
  const Tensord y = ops::conv2d(x, k, b);
  const auto expected = oracle::conv2d(to_vec(x), 1, 1, 5, 5, to_vec(k), 2, to_vec(b));
  ASSERT_EQ(y.shape(), (Shape{1, 2, 5, 5}));
  for (Index i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], expected[i], 1e-10);
}

TEST(Conv2D, ChannelMismatchNamesAxes) {
  try {
    ops::conv2d(Tensord({1, 2, 4, 4}), Tensord({1, 3, 3, 3}), Tensord({1}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("input axis 1"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("kernels axis 1"), std::string::npos);
  }
}

TEST(Conv2D, RejectsNonThreeByThreeKernel) {
  EXPECT_THROW(ops::conv2d(Tensord({1, 1, 4, 4}), Tensord({1, 1, 5, 5}), Tensord({1})), DimensionError);
}

// --- maxpool2d -------------------------------------------------------------

TEST(MaxPool2D, SingleWindow) {
  const Tensord x({1, 1, 2, 2}, {1, 2, 3, 4});
  const auto r = ops::maxpool2d(x);
  EXPECT_EQ(r.output, Tensord({1, 1, 1, 1}, {4}));
}

TEST(MaxPool2D, ConstantInput) {
  const auto r = ops::maxpool2d(Tensord::constant({1, 2, 4, 6}, 3.5));
  EXPECT_EQ(r.output, Tensord::constant({1, 2, 2, 3}, 3.5));
}

TEST(MaxPool2D, MatchesBruteForceOracle) {
  const Tensord x = random_tensor({1, 1, 6, 6}, 6);
  const auto r = ops::maxpool2d(x);
  const auto expected = oracle::maxpool2d(to_vec(x), 1, 6, 6);
  for (Index i = 0; i < r.output.size(); ++i) EXPECT_EQ(r.output[i], expected[static_cast<std::size_t>(i)]);
}

TEST(MaxPool2D, OddExtentsDropTrailingRowAndColumn) {
  Tensord x({1, 1, 5, 3});
  for (Index i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
  const auto r = ops::maxpool2d(x);
  ASSERT_EQ(r.output.shape(), (Shape{1, 1, 2, 1}));
  EXPECT_EQ(r.output[0], 4.0);   // rows 0-1, cols 0-1
  EXPECT_EQ(r.output[1], 10.0);  // rows 2-3, cols 0-1
}

TEST(MaxPool2D, TiesRouteToFirstIndexInScanOrder) {
  const Tensord x = Tensord::constant({1, 1, 2, 2}, 1.0);
  const auto r = ops::maxpool2d(x);
  const Tensord d = ops::maxpool2d_backward(x.shape(), r.argmax, Tensord({1, 1, 1, 1}, {5.0}));
  EXPECT_EQ(d, Tensord({1, 1, 2, 2}, {5, 0, 0, 0}));
}

TEST(MaxPool2D, BackwardConservesGradientMass) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Tensord x = random_tensor({2, 3, 8, 8}, seed);
    const auto r = ops::maxpool2d(x);
    const Tensord up = random_tensor(r.output.shape(), seed + 100);
    const Tensord d = ops::maxpool2d_backward(x.shape(), r.argmax, up);
    // Every upstream value lands in exactly one slot, so sums agree term by term.
    EXPECT_NEAR(d.values().sum(), up.values().sum(), 1e-12);
    EXPECT_EQ((d.values() != 0.0).count(), (up.values() != 0.0).count());
  }
}

TEST(MaxPool2D, TooSmallInputThrows) {
  EXPECT_THROW(ops::maxpool2d(Tensord({1, 1, 1, 4})), DimensionError);
}

// --- batchnorm2d -----------------------------------------------------------

ops::BatchNormStats<double> fresh_stats(Index c) {
  return {Tensord({c}), Tensord::constant({c}, 1.0)};
}

TEST(BatchNorm2D, ZeroGammaGivesBeta) {
  const Tensord x = random_tensor({4, 2, 3, 3}, 7);
  auto stats = fresh_stats(2);
  const auto r = ops::batchnorm2d(x, Tensord({2}), Tensord({2}, {0.25, -3.0}), Mode::Train, stats);
  for (Index n = 0; n < 4; ++n)
    for (Index i = 0; i < 9; ++i) {
      EXPECT_EQ(r.output[(n * 2 + 0) * 9 + i], 0.25);
      EXPECT_EQ(r.output[(n * 2 + 1) * 9 + i], -3.0);
    }
}

TEST(BatchNorm2D, StandardizedBatchIsNearlyUnchanged) {
  Tensord x({4, 1, 2, 2});
  for (Index i = 0; i < 16; ++i) x[i] = (i % 2 == 0) ? 1.0 : -1.0;  // mean 0, variance 1
  auto stats = fresh_stats(1);
  const auto r = ops::batchnorm2d(x, Tensord::constant({1}, 1.0), Tensord({1}), Mode::Train, stats);
  EXPECT_LT(max_abs_diff(r.output, x), 1e-3);
}

TEST(BatchNorm2D, RandomBatchMomentsMatchOracle) {
  const Tensord x = random_tensor({5, 3, 4, 4}, 8, -4.0, 9.0);
  auto stats = fresh_stats(3);
  const auto r = ops::batchnorm2d(x, Tensord::constant({3}, 1.0), Tensord({3}), Mode::Train, stats);
  for (Index c = 0; c < 3; ++c) {
    double mean = 0, sq = 0;
    int m = 0;
    for (Index n = 0; n < 5; ++n)
      for (Index i = 0; i < 16; ++i, ++m) mean += r.output[(n * 3 + c) * 16 + i];
    mean /= m;
    for (Index n = 0; n < 5; ++n)
      for (Index i = 0; i < 16; ++i) sq += std::pow(r.output[(n * 3 + c) * 16 + i] - mean, 2);
    EXPECT_LT(std::abs(mean), 1e-6);
    EXPECT_LT(std::abs(sq / m - 1.0), 1e-3);
  }
}

TEST(BatchNorm2D, TrainModeUpdatesRunningStatsWithMomentum) {
  const Tensord x({2, 1, 1, 2}, {1, 3, 5, 7});  // mean 4, biased var 5
  auto stats = fresh_stats(1);
  ops::batchnorm2d(x, Tensord::constant({1}, 1.0), Tensord({1}), Mode::Train, stats);
  EXPECT_NEAR(stats.running_mean[0], 0.1 * 4.0, 1e-12);
  EXPECT_NEAR(stats.running_var[0], 0.9 * 1.0 + 0.1 * 5.0, 1e-12);
}

TEST(BatchNorm2D, InferModeUsesRunningStats) {
  const Tensord x({1, 1, 1, 2}, {2, 4});
  ops::BatchNormStats<double> stats{Tensord({1}, {1.0}), Tensord({1}, {4.0})};
  const auto r = ops::batchnorm2d(x, Tensord::constant({1}, 1.0), Tensord({1}), Mode::Infer, stats, 0.0);
  EXPECT_NEAR(r.output[0], 0.5, 1e-12);
  EXPECT_NEAR(r.output[1], 1.5, 1e-12);
}

TEST(BatchNorm2D, SingleSampleTrainBatchIsDegenerate) {
  auto stats = fresh_stats(1);
  EXPECT_THROW(ops::batchnorm2d(Tensord({1, 1, 2, 2}), Tensord({1}), Tensord({1}), Mode::Train, stats),
               DegenerateBatchError);
}

// --- dropout ---------------------------------------------------------------

TEST(Dropout, ZeroRateIsIdentityInBothModes) {
  const Tensord x = random_tensor({3, 4}, 9);
  EXPECT_EQ(ops::dropout(x, 0.0, Mode::Train, 1).output, x);
  EXPECT_EQ(ops::dropout(x, 0.0, Mode::Infer, 1).output, x);
}

TEST(Dropout, InferModeIsIdentity) {
  const Tensord x = random_tensor({3, 4}, 10);
  EXPECT_EQ(ops::dropout(x, 0.5, Mode::Infer, 1).output, x);
}

TEST(Dropout, InvertedScalingPreservesMean) {
  const Tensord ones = Tensord::constant({100000}, 1.0);
  double across_seeds = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const double mean = ops::dropout(ones, 0.5, Mode::Train, seed).output.values().mean();
    EXPECT_NEAR(mean, 1.0, 0.01);
    across_seeds += mean;
  }
  EXPECT_NEAR(across_seeds / 10, 1.0, 0.01);
}

TEST(Dropout, SurvivorsScaledAndDeterministic) {
  const Tensord x = Tensord::constant({1000}, 2.0);
  const auto a = ops::dropout(x, 0.25, Mode::Train, 77);
  const auto b = ops::dropout(x, 0.25, Mode::Train, 77);
  EXPECT_EQ(a.output, b.output);
  for (Index i = 0; i < x.size(); ++i) {
    EXPECT_TRUE(a.output[i] == 0.0 || std::abs(a.output[i] - 2.0 / 0.75) < 1e-12);
  }
}

TEST(Dropout, RateOneIsRejected) {
  EXPECT_THROW(ops::dropout(Tensord({2}), 1.0, Mode::Train, 0), ParameterError);
  EXPECT_THROW(ops::dropout(Tensord({2}), -0.1, Mode::Train, 0), ParameterError);
}

// --- dense -----------------------------------------------------------------

TEST(Dense, IdentityWeights) {
  const Tensord x = random_tensor({3, 4}, 11);
  Tensord w({4, 4});
  for (Index i = 0; i < 4; ++i) w.at(i, i) = 1.0;
  EXPECT_EQ(ops::dense(x, w, Tensord({4})), x);
}

TEST(Dense, ZeroInputGivesBiasRows) {
  const Tensord b({2}, {1.5, -2});
  const Tensord y = ops::dense(Tensord({3, 4}), random_tensor({4, 2}, 12), b);
  for (Index r = 0; r < 3; ++r) {
    EXPECT_EQ(y.at(r, 0), 1.5);
    EXPECT_EQ(y.at(r, 1), -2.0);
  }
}

TEST(Dense, MatchesTripleLoopOracle) {
  const Tensord x = random_tensor({3, 4}, 13);
  const Tensord w = random_tensor({4, 2}, 14);
  const Tensord b = random_tensor({2}, 15);
  const Tensord y = ops::dense(x, w, b);
  const auto expected = oracle::matmul(to_vec(x), 3, 4, to_vec(w), 2, to_vec(b));
  for (Index i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], expected[static_cast<std::size_t>(i)], 1e-12);
}

TEST(Dense, InnerDimensionMismatch) {
  EXPECT_THROW(ops::dense(Tensord({3, 4}), Tensord({5, 2}), Tensord({2})), DimensionError);
}

// --- activations -----------------------------------------------------------

TEST(Activations, Relu) {
  const Tensord y = ops::relu(Tensord({2}, {-3, 2}));
  EXPECT_EQ(y, Tensord({2}, {0, 2}));
}

TEST(Activations, SoftmaxUniform) {
  const Tensord y = ops::softmax(Tensord({1, 4}));
  for (Index i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(y[i], 0.25);
}

TEST(Activations, SoftmaxShiftInvariance) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensord x = random_tensor({3, 5}, seed, -10, 10);
    Tensord shifted = x;
    const double c = Rng(seed + 1000).uniform(-50, 50);
    shifted.values() += c;
    EXPECT_LT(max_abs_diff(ops::softmax(x), ops::softmax(shifted)), 1e-12);
  }
}

TEST(Activations, SoftmaxRowsAreDistributions) {
  const Tensord y = ops::softmax(random_tensor({6, 4}, 16, -30, 30));
  for (Index r = 0; r < 6; ++r) {
    EXPECT_NEAR(y.values().segment(r * 4, 4).sum(), 1.0, 1e-9);
    EXPECT_TRUE((y.values().segment(r * 4, 4) >= 0.0).all());
  }
}

TEST(Activations, SoftmaxSurvivesHugeLogits) {
  const Tensord y = ops::softmax(Tensord({1, 3}, {1000, 1000, -1000}));
  EXPECT_TRUE(y.all_finite());
  EXPECT_NEAR(y[0], 0.5, 1e-12);
}

// --- losses ----------------------------------------------------------------

TEST(Losses, CrossEntropyPerfectPrediction) {
  const Tensord p({1, 4}, {0, 1, 0, 0});
  EXPECT_DOUBLE_EQ(losses::categorical_cross_entropy(p, p), 0.0);
}

TEST(Losses, CrossEntropyUniformPrediction) {
  const Tensord p = Tensord::constant({2, 4}, 0.25);
  const Tensord t({2, 4}, {1, 0, 0, 0, 0, 0, 0, 1});
  EXPECT_NEAR(losses::categorical_cross_entropy(p, t), 1.386294, 1e-6);
  EXPECT_NEAR(losses::categorical_cross_entropy(p, t), std::log(4.0), 1e-15);
}

TEST(Losses, CrossEntropyClampsZeroProbability) {
  const Tensord p({1, 2}, {0, 1});
  const Tensord t({1, 2}, {1, 0});
  EXPECT_NEAR(losses::categorical_cross_entropy(p, t), -std::log(1e-12), 1e-9);
}

TEST(Losses, MalformedOneHotIsLabelError) {
  const Tensord p = Tensord::constant({1, 4}, 0.25);
  EXPECT_THROW(losses::categorical_cross_entropy(p, Tensord({1, 4}, {1, 1, 0, 0})), LabelError);
  EXPECT_THROW(losses::categorical_cross_entropy(p, Tensord({1, 4}, {0.5, 0.5, 0, 0})), LabelError);
  EXPECT_THROW(losses::categorical_cross_entropy(Tensord::constant({1, 4}, 0.3), Tensord({1, 4}, {1, 0, 0, 0})),
               LabelError);
}

TEST(Losses, RegressionLosses) {
  const Tensord a({3}, {1, 2, 3});
  EXPECT_DOUBLE_EQ(losses::mse(a, a), 0.0);
  EXPECT_DOUBLE_EQ(losses::mae(Tensord({1}, {3}), Tensord({1}, {1})), 2.0);
  EXPECT_DOUBLE_EQ(losses::mse(Tensord({2}, {3, 0}), Tensord({2}, {1, 0})), 2.0);
}

// --- optimizer -------------------------------------------------------------

TEST(Optimizer, SgdStep) {
  Tensord w({1}, {1.0});
  const Tensord g({1}, {1.0});
  OptimizerState<double> state;
  std::vector<Tensord*> params{&w};
  std::vector<const Tensord*> grads{&g};
  optimizer_step<double>(params, grads, state, {OptimizerKind::Sgd, 0.1});
  EXPECT_DOUBLE_EQ(w[0], 0.9);
}

TEST(Optimizer, ZeroGradientLeavesParametersUnchanged) {
  for (auto kind : {OptimizerKind::Sgd, OptimizerKind::Adam}) {
    Tensord w = random_tensor({5}, 17);
    const Tensord before = w;
    const Tensord g({5});
    OptimizerState<double> state;
    std::vector<Tensord*> params{&w};
    std::vector<const Tensord*> grads{&g};
    optimizer_step<double>(params, grads, state, {kind, 0.01});
    EXPECT_EQ(w, before);
  }
}

TEST(Optimizer, AdamFirstStepIsLearningRateSized) {
  // Closed form: m-hat = g, v-hat = g^2, so the step is lr * |g| / (|g| + eps).
  const double lr = 1e-3;
  for (double scale : {1e-3, 1.0, 1e3, 1e6}) {
    Tensord w({4});
    const Tensord g = Tensord({4}, {1.0, -2.0, 0.5, -0.25});
    Tensord scaled = g;
    scaled.values() *= scale;
    OptimizerState<double> state;
    std::vector<Tensord*> params{&w};
    std::vector<const Tensord*> grads{&scaled};
    optimizer_step<double>(params, grads, state, {OptimizerKind::Adam, lr});
    for (Index i = 0; i < 4; ++i) {
      EXPECT_NEAR(std::abs(w[i]), lr, 1e-6) << "scale " << scale;
      EXPECT_LT(w[i] * g[i], 0.0);
    }
  }
}

TEST(Optimizer, ShapeMismatchIsRejected) {
  Tensord w({2});
  const Tensord g({3});
  OptimizerState<double> state;
  std::vector<Tensord*> params{&w};
  std::vector<const Tensord*> grads{&g};
  EXPECT_THROW(optimizer_step<double>(params, grads, state, {}), DimensionError);
}

// --- purity ----------------------------------------------------------------

TEST(Purity, ForwardOpsAreBitIdenticalOnRepeat) {
  const Tensord x = random_tensor({2, 3, 8, 8}, 18);
  const Tensord k = random_tensor({4, 3, 3, 3}, 19);
  const Tensord b = random_tensor({4}, 20);
  EXPECT_EQ(ops::conv2d(x, k, b), ops::conv2d(x, k, b));
  EXPECT_EQ(ops::maxpool2d(x).output, ops::maxpool2d(x).output);
  EXPECT_EQ(ops::dropout(x, 0.3, Mode::Train, 5).output, ops::dropout(x, 0.3, Mode::Train, 5).output);
  EXPECT_EQ(ops::softmax(x), ops::softmax(x));
}

}  // namespace
}  // namespace mrs
