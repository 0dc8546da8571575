#include <gtest/gtest.h>

#include <cmath>

#include "dgm/optim.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dgm;
using dgm::testing::quadratic_min_distance;

TEST(OptimizerHyper, BoundsEnforced) {
  OptimizerHyper h = OptimizerHyper::adam();
  h.learning_rate = -1.0f;
  EXPECT_THROW(h.validate(), Error);
  OptimizerHyper s = OptimizerHyper::sgd();
  s.momentum = 1.0f;
  EXPECT_THROW(s.validate(), Error);
  OptimizerHyper r = OptimizerHyper::rmsprop();
  r.rho = 0.0f;
  EXPECT_THROW(r.validate(), Error);
  Tensor p = Tensor::zeros({2});
  std::vector<Tensor*> params{&p};
  EXPECT_THROW(init_state(params, h), Error);
  EXPECT_THROW(init_state({}, OptimizerHyper::adam()), Error);
}

TEST(OptimizerState, ZeroInit) {
  Tensor a = Tensor::full({3}, 1.0f), b = Tensor::full({2, 2}, 2.0f);
  std::vector<Tensor*> params{&a, &b};
  OptimizerState st = init_state(params, OptimizerHyper::adam());
  EXPECT_EQ(st.t, 0);
  ASSERT_EQ(st.m.size(), 2u);
  EXPECT_EQ(st.m[0].shape(), a.shape());
  EXPECT_EQ(st.v[1].shape(), b.shape());
  for (float v : st.m[0].values()) EXPECT_EQ(v, 0.0f);

  OptimizerState sgd0 = init_state(params, OptimizerHyper::sgd(0.01f, 0.0f));
  EXPECT_EQ(sgd0.m[0].numel(), 3);
  for (float v : sgd0.m[0].values()) EXPECT_EQ(v, 0.0f);
}

TEST(Step, ZeroGradientIsFixedPoint) {
  for (OptKind k : {OptKind::kAdam, OptKind::kSgd, OptKind::kRmsprop}) {
    Tensor p({3}, {1.0f, -2.0f, 0.5f});
    Tensor before = p.clone();
    std::vector<Tensor*> params{&p};
    OptimizerState st = init_state(params, OptimizerHyper::defaults_for(k));
    step(st, params, {Tensor::zeros({3})});
    EXPECT_TRUE(p.bitwise_equal(before)) << opt_kind_name(k);
    EXPECT_EQ(st.t, 1);
  }
}

TEST(Step, AdamFirstStepMagnitudeIsLearningRate) {
  RngStream rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor p = Tensor::zeros({4});
    std::vector<Tensor*> params{&p};
    OptimizerHyper h = OptimizerHyper::adam();
    OptimizerState st = init_state(params, h);
    Tensor g = dgm::testing::random_tensor({4}, rng);
    for (int64_t i = 0; i < g.numel(); ++i)
      if (std::fabs(g.data()[i]) < 0.01f) g.mutable_data()[i] = 0.01f;
    step(st, params, {g});
    // t=1: mhat/sqrt(vhat) = sign(g), so |delta| = lr up to epsilon effects.
    for (int64_t i = 0; i < p.numel(); ++i)
      EXPECT_NEAR(std::fabs(p.data()[i]), h.learning_rate, 0.01f * h.learning_rate);
  }
}

TEST(Step, AdamScaleInvarianceAtDefaultEpsilon) {
  Tensor p1 = Tensor::zeros({3}), p2 = Tensor::zeros({3});
  std::vector<Tensor*> a{&p1}, b{&p2};
  OptimizerState s1 = init_state(a, OptimizerHyper::adam());
  OptimizerState s2 = init_state(b, OptimizerHyper::adam());
  Tensor g({3}, {0.2f, -1.0f, 0.05f});
  Tensor g10({3}, {2.0f, -10.0f, 0.5f});
  step(s1, a, {g});
  step(s2, b, {g10});
  for (int64_t i = 0; i < 3; ++i) {
    float d1 = p1.data()[i], d2 = p2.data()[i];
    EXPECT_LT(std::fabs(d1 - d2) / std::fabs(d1), 0.01f);
  }
}

TEST(Step, RmspropEmaStaysNonnegative) {
  RngStream rng(4);
  Tensor p = Tensor::zeros({8});
  std::vector<Tensor*> params{&p};
  OptimizerState st = init_state(params, OptimizerHyper::rmsprop());
  for (int i = 0; i < 50; ++i) {
    step(st, params, {dgm::testing::random_tensor({8}, rng, -5.0f, 5.0f)});
    for (float v : st.v[0].values()) EXPECT_GE(v, 0.0f);
  }
}

TEST(Step, SgdZeroMomentumIsVanillaGradientDescent) {
  RngStream rng(5);
  Tensor p1 = dgm::testing::random_tensor({6}, rng);
  Tensor p2 = p1.clone();
  std::vector<Tensor*> a{&p1}, b{&p2};
  OptimizerHyper h = OptimizerHyper::sgd(0.05f, 0.0f);
  OptimizerState st = init_state(a, h);
  for (int i = 0; i < 20; ++i) {
    Tensor g = dgm::testing::random_tensor({6}, rng);
    step(st, a, {g});
    // Hand-rolled vanilla update on the reference copy.
    Tensor upd = p2.clone();
    for (int64_t j = 0; j < 6; ++j)
      upd.mutable_data()[j] = p2.data()[j] - h.learning_rate * g.data()[j];
    p2 = upd;
    EXPECT_TRUE(p1.bitwise_equal(p2)) << "step " << i;
  }
}

TEST(Step, GradShapeMismatchIsError) {
  Tensor p = Tensor::zeros({3});
  std::vector<Tensor*> params{&p};
  OptimizerState st = init_state(params, OptimizerHyper::sgd());
  EXPECT_THROW(step(st, params, {Tensor::zeros({4})}), Error);
}

TEST(Convergence, QuadraticWithinFiveHundredStepsAtDefaults) {
  EXPECT_LT(quadratic_min_distance(OptimizerHyper::adam(), 500), 1e-3f);
  EXPECT_LT(quadratic_min_distance(OptimizerHyper::sgd(), 500), 1e-3f);
  EXPECT_LT(quadratic_min_distance(OptimizerHyper::rmsprop(), 500), 1e-3f);
}
