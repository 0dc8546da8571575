#include <gtest/gtest.h>

#include <cmath>

#include "dgm/ops.hpp"
#include "dgm/tensor.hpp"
#include "test_util.hpp"

using namespace dgm;

TEST(Tensor, ShapeAndData) {
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.numel(), 6);
  EXPECT_EQ(t.dim(0), 2);
  EXPECT_EQ(t.dim(1), 3);
  EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), Error);
  EXPECT_THROW(Tensor::zeros({0, 3}), Error);
}

TEST(Tensor, CopiesShareStorageClonesDoNot) {
  Tensor a = Tensor::full({4}, 1.0f);
  Tensor b = a;
  Tensor c = a.clone();
  EXPECT_EQ(a.storage_id(), b.storage_id());
  EXPECT_NE(a.storage_id(), c.storage_id());
  EXPECT_TRUE(a.bitwise_equal(c));
}

TEST(PrimitiveOps, AddElementwise) {
  Tensor a({2}, {1, 2}), b({2}, {3, 4});
  Tensor c = add(nullptr, a, b);
  EXPECT_EQ(c.values(), (std::vector<float>{4, 6}));
}

TEST(PrimitiveOps, MatmulOnes) {
  Tensor a = Tensor::full({2, 3}, 1.0f), b = Tensor::full({3, 2}, 1.0f);
  Tensor c = matmul(nullptr, a, b);
  EXPECT_EQ(c.shape(), (Shape{2, 2}));
  for (float v : c.values()) EXPECT_FLOAT_EQ(v, 3.0f);
}

TEST(PrimitiveOps, ConcatChannelArithmetic) {
  RngStream rng(7);
  Tensor a = dgm::testing::random_tensor({2, 4, 3, 3}, rng);
  Tensor b = dgm::testing::random_tensor({2, 8, 3, 3}, rng);
  Tensor c = concat_channels(nullptr, {a, b});
  // Channel-axis arithmetic oracle: output channels are the plain sum.
  EXPECT_EQ(c.shape(), (Shape{2, 4 + 8, 3, 3}));
  EXPECT_TRUE(slice_channels(c, 0, 4).bitwise_equal(a));
  EXPECT_TRUE(slice_channels(c, 4, 12).bitwise_equal(b));
}

TEST(PrimitiveOps, ShapeErrorsNameTheOp) {
  Tensor a = Tensor::zeros({2, 3}), b = Tensor::zeros({2, 2});
  try {
    matmul(nullptr, a, b);
    FAIL() << "expected shape error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
    EXPECT_NE(std::string(e.what()).find("matmul"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("2x3"), std::string::npos);
  }
  EXPECT_THROW(add(nullptr, a, b), Error);
  EXPECT_THROW(concat_channels(nullptr, {Tensor::zeros({1, 2, 3, 3}), Tensor::zeros({1, 2, 4, 3})}),
               Error);
}

TEST(PrimitiveOps, NonFiniteResultIsAnError) {
  Tensor big = Tensor::full({4}, 3e38f);
  EXPECT_THROW(add(nullptr, big, big), Error);
  try {
    add(nullptr, big, big);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFinite);
  }
}

TEST(PrimitiveOps, ReshapeRoundTripIsIdentity) {
  RngStream rng(3);
  Tensor a = dgm::testing::random_tensor({3, 4, 2}, rng);
  Tensor b = reshape(nullptr, a, {6, 4});
  Tensor c = reshape(nullptr, b, {3, 4, 2});
  EXPECT_TRUE(c.bitwise_equal(a));
  EXPECT_THROW(reshape(nullptr, a, {5, 5}), Error);
}

TEST(PrimitiveOps, ConcatSliceRecoversInputs) {
  RngStream rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    int c1 = 1 + static_cast<int>(rng.next_below(5));
    int c2 = 1 + static_cast<int>(rng.next_below(5));
    Tensor a = dgm::testing::random_tensor({2, c1, 2, 3}, rng);
    Tensor b = dgm::testing::random_tensor({2, c2, 2, 3}, rng);
    Tensor c = concat_channels(nullptr, {a, b});
    EXPECT_TRUE(slice_channels(c, 0, c1).bitwise_equal(a));
    EXPECT_TRUE(slice_channels(c, c1, c1 + c2).bitwise_equal(b));
  }
}

TEST(PrimitiveOps, ReduceSumAndMean) {
  Tensor a({3}, {1, 2, 3});
  EXPECT_FLOAT_EQ(reduce_sum(nullptr, a).scalar(), 6.0f);
  EXPECT_FLOAT_EQ(reduce_mean(nullptr, a).scalar(), 2.0f);
}

TEST(PrimitiveOps, ScalarMul) {
  Tensor a({2}, {1.5f, -2.0f});
  Tensor b = scalar_mul(nullptr, a, 2.0f);
  EXPECT_EQ(b.values(), (std::vector<float>{3.0f, -4.0f}));
}
