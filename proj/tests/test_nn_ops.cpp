#include <gtest/gtest.h>

#include <cmath>

#include "dgm/grad_check.hpp"
#include "dgm/nn.hpp"
#include "dgm/ops.hpp"
#include "test_util.hpp"

using namespace dgm;
using dgm::testing::random_tensor;
using dgm::testing::separated_tensor;

namespace {

// Loss projection with fixed random weights so gradients are non-uniform.
ScalarFn project(std::function<Tensor(Tape*, const Tensor&)> op, const Tensor& weights) {
  return [op, weights](Tape* tape, const Tensor& x) {
    Tensor y = op(tape, x);
    return reduce_sum(tape, mul(tape, y, weights));
  };
}

}  // namespace

TEST(Conv2d, PaperStemOutputSize) {
  // 224x224 stem: 7x7 stride 2 pad 3 -> 112x112.
  Tensor x = Tensor::full({1, 3, 224, 224}, 0.5f);
  Tensor w = Tensor::full({64, 3, 7, 7}, 0.01f);
  Tensor y = conv2d(nullptr, x, w, 2, 3);
  EXPECT_EQ(y.shape(), (Shape{1, 64, 112, 112}));
}

TEST(Conv2d, IdentityOneByOneKernel) {
  RngStream rng(1);
  Tensor x = random_tensor({2, 3, 5, 5}, rng);
  Tensor w = Tensor::zeros({3, 3, 1, 1});
  for (int i = 0; i < 3; ++i) w.mutable_data()[i * 3 + i] = 1.0f;
  Tensor y = conv2d(nullptr, x, w, 1, 0);
  EXPECT_TRUE(y.bitwise_equal(x));
}

TEST(Conv2d, OnesDotProduct) {
  Tensor x = Tensor::full({1, 1, 3, 3}, 1.0f);
  Tensor w = Tensor::full({1, 1, 3, 3}, 1.0f);
  Tensor y = conv2d(nullptr, x, w, 1, 0);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_FLOAT_EQ(y.scalar(), 9.0f);
}

TEST(Conv2d, SamePaddingPreservesSpatialDims) {
  RngStream rng(2);
  for (int k : {1, 3, 5}) {
    Tensor x = random_tensor({1, 2, 7, 9}, rng);
    Tensor w = random_tensor({4, 2, k, k}, rng, -0.5f, 0.5f);
    Tensor y = conv2d(nullptr, x, w, 1, (k - 1) / 2);
    EXPECT_EQ(y.dim(2), 7) << "k=" << k;
    EXPECT_EQ(y.dim(3), 9) << "k=" << k;
  }
}

TEST(Conv2d, ChannelMismatchError) {
  Tensor x = Tensor::zeros({1, 3, 4, 4});
  Tensor w = Tensor::zeros({2, 4, 3, 3});
  EXPECT_THROW(conv2d(nullptr, x, w, 1, 0), Error);
}

TEST(Conv2d, GradientMatchesFiniteDifferences) {
  RngStream rng(3);
  Tensor w0 = random_tensor({4, 3, 3, 3}, rng, 0.2f, 0.7f);
  Tensor x0 = random_tensor({2, 3, 5, 5}, rng);
  Tensor wy = dgm::testing::projection_weights({2, 4, 3, 3}, rng);

  ScalarFn wrt_x = project(
      [w0](Tape* t, const Tensor& x) { return conv2d(t, x, w0, 2, 1); }, wy);
  ScalarFn wrt_w = project(
      [x0](Tape* t, const Tensor& w) { return conv2d(t, x0, w, 2, 1); }, wy);
  // conv is linear in each argument, so a wide step has no truncation error
  // and stays clear of float32 rounding noise.
  for (int trial = 0; trial < 3; ++trial) {
    EXPECT_LT(grad_check(wrt_x, random_tensor({2, 3, 5, 5}, rng), 1e-2f), 1e-3f);
    EXPECT_LT(grad_check(wrt_w, random_tensor({4, 3, 3, 3}, rng), 1e-2f), 1e-3f);
  }
}

TEST(BatchNorm, TrainModeNormalizes) {
  RngStream rng(4);
  Tensor x = random_tensor({4, 3, 6, 6}, rng, -3.0f, 5.0f);
  BatchNormState st = BatchNormState::make(3);
  Tensor y = batch_norm(nullptr, x, st, Mode::kTrain);
  int64_t m = 4 * 6 * 6;
  for (int c = 0; c < 3; ++c) {
    double mean = 0.0, var = 0.0;
    for (int n = 0; n < 4; ++n)
      for (int i = 0; i < 36; ++i)
        mean += y.data()[(static_cast<int64_t>(n) * 3 + c) * 36 + i];
    mean /= static_cast<double>(m);
    for (int n = 0; n < 4; ++n)
      for (int i = 0; i < 36; ++i) {
        double d = y.data()[(static_cast<int64_t>(n) * 3 + c) * 36 + i] - mean;
        var += d * d;
      }
    var /= static_cast<double>(m);
    EXPECT_LT(std::fabs(mean), 1e-4);
    EXPECT_LT(std::fabs(var - 1.0), 1e-3);
  }
}

TEST(BatchNorm, EvalModeUsesRunningStats) {
  RngStream rng(5);
  Tensor x = random_tensor({2, 2, 3, 3}, rng);
  BatchNormState st = BatchNormState::make(2);
  Tensor y = batch_norm(nullptr, x, st, Mode::kEval);
  float scale = 1.0f / std::sqrt(1.0f + st.epsilon);
  for (int64_t i = 0; i < x.numel(); ++i)
    EXPECT_FLOAT_EQ(y.data()[i], x.data()[i] * scale);
}

TEST(BatchNorm, RunningStatsFollowEma) {
  RngStream rng(6);
  Tensor x = random_tensor({2, 1, 4, 4}, rng, 1.0f, 3.0f);
  BatchNormState st = BatchNormState::make(1);
  batch_norm(nullptr, x, st, Mode::kTrain);
  // One step from (0,1) with momentum 0.1 moves 10% toward the batch stats.
  double mean = 0.0;
  for (int64_t i = 0; i < x.numel(); ++i) mean += x.data()[i];
  mean /= static_cast<double>(x.numel());
  EXPECT_NEAR(st.running_mean.data()[0], 0.9 * 0.0 + 0.1 * mean, 1e-5);
  EXPECT_GT(st.running_var.data()[0], 0.0f);
}

TEST(BatchNorm, TrainModeRejectsSingleElementBatch) {
  BatchNormState st = BatchNormState::make(2);
  Tensor x = Tensor::zeros({1, 2, 1, 1});
  EXPECT_THROW(batch_norm(nullptr, x, st, Mode::kTrain), Error);
  EXPECT_NO_THROW(batch_norm(nullptr, x, st, Mode::kEval));
}

TEST(BatchNorm, GradientBothModes) {
  RngStream rng(7);
  Tensor gamma = random_tensor({3}, rng, 0.5f, 1.5f);
  Tensor beta = random_tensor({3}, rng, -0.5f, 0.5f);
  Tensor wy = dgm::testing::projection_weights({2, 3, 4, 4}, rng);

  for (Mode mode : {Mode::kTrain, Mode::kEval}) {
    // Fresh state per evaluation keeps the probe function pure.
    ScalarFn wrt_x = project(
        [gamma, beta, mode](Tape* t, const Tensor& x) {
          BatchNormState st = BatchNormState::make(3);
          st.gamma = gamma.with_requires_grad(false);
          st.beta = beta.with_requires_grad(false);
          st.running_mean = Tensor({3}, {0.3f, -0.2f, 0.1f});
          st.running_var = Tensor({3}, {1.5f, 0.7f, 1.1f});
          return batch_norm(t, x, st, mode);
        },
        wy);
    for (int trial = 0; trial < 3; ++trial)
      EXPECT_LT(grad_check(wrt_x, random_tensor({2, 3, 4, 4}, rng), 1e-2f), 1e-3f)
          << (mode == Mode::kTrain ? "train" : "eval");
  }

  // With respect to gamma and beta in train mode.
  Tensor x0 = random_tensor({2, 3, 4, 4}, rng);
  ScalarFn wrt_gamma = project(
      [x0, beta](Tape* t, const Tensor& g) {
        BatchNormState st = BatchNormState::make(3);
        st.gamma = g;
        st.beta = beta.with_requires_grad(false);
        return batch_norm(t, x0, st, Mode::kTrain);
      },
      wy);
  ScalarFn wrt_beta = project(
      [x0, gamma](Tape* t, const Tensor& b) {
        BatchNormState st = BatchNormState::make(3);
        st.gamma = gamma.with_requires_grad(false);
        st.beta = b;
        return batch_norm(t, x0, st, Mode::kTrain);
      },
      wy);
  EXPECT_LT(grad_check(wrt_gamma, random_tensor({3}, rng, 0.5f, 1.5f), 1e-2f), 1e-3f);
  EXPECT_LT(grad_check(wrt_beta, random_tensor({3}, rng), 1e-2f), 1e-3f);
}

TEST(Relu, Definition) {
  Tensor x({3}, {-1, 0, 2});
  Tensor y = relu(nullptr, x);
  EXPECT_EQ(y.values(), (std::vector<float>{0, 0, 2}));
  Tensor neg = Tensor::full({5}, -3.0f);
  Tensor yneg = relu(nullptr, neg);
  for (float v : yneg.values()) EXPECT_EQ(v, 0.0f);
}

TEST(Relu, GradientMaskIsIndicator) {
  Tensor x({4}, {1.5f, -2.0f, 0.25f, -0.1f});
  Tensor x_rg = x.clone().with_requires_grad(true);
  Tape tape;
  Tensor loss = reduce_sum(&tape, relu(&tape, x_rg));
  Tensor g = tape.backward(loss).grad_for(x_rg);
  EXPECT_EQ(g.values(), (std::vector<float>{1, 0, 1, 0}));

  // And the mask agrees with finite differences away from the kink.
  ScalarFn f = [](Tape* t, const Tensor& v) { return reduce_sum(t, relu(t, v)); };
  RngStream rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor xt = separated_tensor({8}, rng);
    EXPECT_LT(grad_check(f, xt, 1e-3f), 1e-3f);
  }
}

TEST(Pool2d, PaperStemMaxPoolSize) {
  Tensor x = Tensor::full({1, 64, 112, 112}, 1.0f);
  Tensor y = pool2d(nullptr, x, PoolKind::kMax, 3, 2, 1);
  EXPECT_EQ(y.shape(), (Shape{1, 64, 56, 56}));
}

TEST(Pool2d, AvgOfTwoByTwoBlock) {
  Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor y = pool2d(nullptr, x, PoolKind::kAvg, 2, 2, 0);
  EXPECT_FLOAT_EQ(y.scalar(), 2.5f);
}

TEST(Pool2d, MaxOverConstantInput) {
  Tensor x = Tensor::full({1, 2, 6, 6}, 1.25f);
  Tensor y = pool2d(nullptr, x, PoolKind::kMax, 3, 2, 1);
  for (float v : y.values()) EXPECT_FLOAT_EQ(v, 1.25f);
}

TEST(Pool2d, WindowExceedingPaddedInputIsError) {
  Tensor x = Tensor::zeros({1, 1, 2, 2});
  EXPECT_THROW(pool2d(nullptr, x, PoolKind::kMax, 5, 1, 1), Error);
}

TEST(Pool2d, GradientBothKinds) {
  RngStream rng(9);
  Tensor wy_max = dgm::testing::projection_weights({1, 2, 3, 3}, rng);
  Tensor wy_avg = dgm::testing::projection_weights({1, 2, 3, 3}, rng);
  ScalarFn f_max = project(
      [](Tape* t, const Tensor& x) { return pool2d(t, x, PoolKind::kMax, 3, 2, 1); }, wy_max);
  ScalarFn f_avg = project(
      [](Tape* t, const Tensor& x) { return pool2d(t, x, PoolKind::kAvg, 2, 2, 0); }, wy_avg);
  for (int trial = 0; trial < 5; ++trial) {
    // Well-separated values keep each window's argmax stable under probes.
    Tensor x = separated_tensor({1, 2, 6, 6}, rng);
    EXPECT_LT(grad_check(f_max, x, 1e-2f), 1e-3f);
    EXPECT_LT(grad_check(f_avg, x, 1e-2f), 1e-3f);
  }
}

TEST(GlobalAvgPool, ShapeAndConstant) {
  Tensor x = Tensor::full({1, 1920, 7, 7}, 0.25f);
  Tensor y = global_avg_pool(nullptr, x);
  EXPECT_EQ(y.shape(), (Shape{1, 1920}));
  for (float v : y.values()) EXPECT_FLOAT_EQ(v, 0.25f);
}

TEST(GlobalAvgPool, GradientIsUniformBroadcast) {
  RngStream rng(10);
  Tensor x = random_tensor({2, 3, 4, 5}, rng);
  Tensor x_rg = x.clone().with_requires_grad(true);
  Tape tape;
  Tensor loss = reduce_sum(&tape, global_avg_pool(&tape, x_rg));
  Tensor g = tape.backward(loss).grad_for(x_rg);
  for (int64_t i = 0; i < g.numel(); ++i) EXPECT_FLOAT_EQ(g.data()[i], 1.0f / 20.0f);

  Tensor wy = dgm::testing::projection_weights({2, 3}, rng);
  ScalarFn f = project([](Tape* t, const Tensor& v) { return global_avg_pool(t, v); }, wy);
  EXPECT_LT(grad_check(f, x, 1e-2f), 1e-3f);
}

TEST(Dense, IdentityAndHandCase) {
  RngStream rng(11);
  Tensor x = random_tensor({3, 4}, rng);
  Tensor w = Tensor::zeros({4, 4});
  for (int i = 0; i < 4; ++i) w.mutable_data()[i * 4 + i] = 1.0f;
  Tensor b = Tensor::zeros({4});
  EXPECT_TRUE(dense(nullptr, x, w, b).bitwise_equal(x));

  Tensor x2({1, 2}, {1, 2});
  Tensor w2({2, 1}, {1, 1});
  Tensor b2({1}, {0.5f});
  EXPECT_FLOAT_EQ(dense(nullptr, x2, w2, b2).scalar(), 3.5f);
}

TEST(Dense, GradientAllInputs) {
  RngStream rng(12);
  Tensor x0 = random_tensor({3, 4}, rng);
  Tensor w0 = random_tensor({4, 2}, rng, 0.2f, 0.7f);
  Tensor b0 = random_tensor({2}, rng);
  Tensor wy = dgm::testing::projection_weights({3, 2}, rng);
  ScalarFn wrt_x = project([w0, b0](Tape* t, const Tensor& x) { return dense(t, x, w0, b0); }, wy);
  ScalarFn wrt_w = project([x0, b0](Tape* t, const Tensor& w) { return dense(t, x0, w, b0); }, wy);
  ScalarFn wrt_b = project([x0, w0](Tape* t, const Tensor& b) { return dense(t, x0, w0, b); }, wy);
  EXPECT_LT(grad_check(wrt_x, x0, 1e-2f), 1e-3f);
  EXPECT_LT(grad_check(wrt_w, w0, 1e-2f), 1e-3f);
  EXPECT_LT(grad_check(wrt_b, b0, 1e-2f), 1e-3f);
}

TEST(Dropout, NoOpCases) {
  RngStream rng(13);
  Tensor x = random_tensor({100}, rng);
  RngStream stream(99);
  EXPECT_TRUE(dropout(nullptr, x, {0.0f, Mode::kTrain}, stream).bitwise_equal(x));
  EXPECT_TRUE(dropout(nullptr, x, {0.7f, Mode::kEval}, stream).bitwise_equal(x));
  EXPECT_THROW(dropout(nullptr, x, {1.0f, Mode::kTrain}, stream), Error);
}

TEST(Dropout, ZeroFractionWithinConfidenceInterval) {
  const int64_t n = 100000;
  Tensor x = Tensor::full({100, 1000}, 1.0f);
  for (float p : {0.1f, 0.5f}) {
    RngStream stream(mix64(2024, static_cast<uint64_t>(p * 10)));
    Tensor y = dropout(nullptr, x, {p, Mode::kTrain}, stream);
    int64_t zeros = 0;
    double sum = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      if (y.data()[i] == 0.0f) ++zeros;
      sum += y.data()[i];
    }
    double frac = static_cast<double>(zeros) / static_cast<double>(n);
    double ci = 2.576 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));  // 99% binomial CI
    EXPECT_LT(std::fabs(frac - p), ci) << "p=" << p;
    // Inverted scaling keeps the expectation at the input value.
    EXPECT_NEAR(sum / static_cast<double>(n), 1.0, 0.01) << "p=" << p;
  }
}

TEST(Dropout, FixedMaskGradient) {
  RngStream rng(14);
  RngStream mask_rng(15);
  Tensor mask = dropout_mask({2, 6}, 0.3f, mask_rng);
  ScalarFn f = [mask](Tape* t, const Tensor& x) { return reduce_sum(t, mul(t, x, mask)); };
  for (int trial = 0; trial < 5; ++trial)
    EXPECT_LT(grad_check(f, random_tensor({2, 6}, rng), 1e-3f), 1e-3f);
}

TEST(SoftmaxXent, UniformLogits) {
  Tensor logits = Tensor::full({1, 3}, 0.7f);
  Tensor labels({1, 3}, {0, 1, 0});
  auto r = softmax_cross_entropy(nullptr, logits, labels);
  for (float v : r.probs.values()) EXPECT_NEAR(v, 1.0f / 3.0f, 1e-6f);
  EXPECT_NEAR(r.loss.scalar(), std::log(3.0f), 1e-6f);
}

TEST(SoftmaxXent, ExtremeLogitsAreStable) {
  Tensor logits({1, 3}, {1000.0f, 0.0f, 0.0f});
  Tensor labels({1, 3}, {1, 0, 0});
  auto r = softmax_cross_entropy(nullptr, logits, labels);
  EXPECT_NEAR(r.loss.scalar(), 0.0f, 1e-6f);
  EXPECT_NEAR(r.probs.data()[0], 1.0f, 1e-6f);
}

TEST(SoftmaxXent, RowsSumToOneForLargeRange) {
  RngStream rng(16);
  Tensor logits = random_tensor({8, 5}, rng, -1e4f, 1e4f);
  Tensor probs = softmax(logits);
  for (int n = 0; n < 8; ++n) {
    double s = 0.0;
    for (int j = 0; j < 5; ++j) s += probs.data()[n * 5 + j];
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(SoftmaxXent, RejectsNonOneHotLabels) {
  Tensor logits = Tensor::zeros({2, 3});
  Tensor two_hot({2, 3}, {1, 1, 0, 0, 0, 1});
  EXPECT_THROW(softmax_cross_entropy(nullptr, logits, two_hot), Error);
  Tensor soft({2, 3}, {0.5f, 0.5f, 0, 1, 0, 0});
  EXPECT_THROW(softmax_cross_entropy(nullptr, logits, soft), Error);
}

TEST(SoftmaxXent, GradientIsProbsMinusLabelsOverN) {
  RngStream rng(17);
  Tensor labels = dgm::testing::one_hot_batch({2, 0, 1, 2}, 3);
  Tensor logits = random_tensor({4, 3}, rng);
  Tensor logits_rg = logits.clone().with_requires_grad(true);
  Tape tape;
  auto r = softmax_cross_entropy(&tape, logits_rg, labels);
  Tensor g = tape.backward(r.loss).grad_for(logits_rg);
  for (int64_t i = 0; i < g.numel(); ++i)
    EXPECT_NEAR(g.data()[i], (r.probs.data()[i] - labels.data()[i]) / 4.0f, 1e-6f);
}
