#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"
#include "wagf/errors.hpp"
#include "wagf/ops.hpp"
#include "wagf/wavelet.hpp"

using namespace wagf;
using testutil::rand_tensor;

TEST(HaarDwt, ConstantChannel) {
  const auto b = haar_dwt2(Tensor::full({4, 6}, 1.5));
  EXPECT_EQ(b.ll, Tensor::full({2, 3}, 3));
  EXPECT_EQ(b.lh, Tensor::zeros({2, 3}));
  EXPECT_EQ(b.hl, Tensor::zeros({2, 3}));
  EXPECT_EQ(b.hh, Tensor::zeros({2, 3}));
}

TEST(HaarDwt, SingleBlock) {
  const auto b = haar_dwt2(Tensor({2, 2}, std::vector<Real>{1, 2, 3, 4}));
  EXPECT_EQ(b.ll[0], 5);
  EXPECT_EQ(b.lh[0], -1);
  EXPECT_EQ(b.hl[0], -2);
  EXPECT_EQ(b.hh[0], 0);
}

TEST(HaarDwt, OddSizeRejected) {
  EXPECT_THROW(haar_dwt2(Tensor::zeros({3, 4})), ShapeError);
  EXPECT_THROW(haar_dwt2(Tensor::zeros({4, 4, 1})), ShapeError);
  Tape t;
  EXPECT_THROW(haar_dwt2(t.constant(Tensor::zeros({4, 5, 2}))), ShapeError);
}

TEST(HaarIdwt, ZeroAndConstantBands) {
  const Tensor z = Tensor::zeros({2, 2});
  EXPECT_EQ(haar_idwt2({z, z, z, z}), Tensor::zeros({4, 4}));
  EXPECT_EQ(haar_idwt2({Tensor::full({2, 2}, 1.4), z, z, z}), Tensor::full({4, 4}, 0.7));
}

TEST(HaarProperties, RoundTripAndEnergy) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t H = 2 * (1 + rng() % 6), W = 2 * (1 + rng() % 6);
    const Tensor x = rand_tensor({H, W}, rng(), -5, 5);
    const auto b = haar_dwt2(x);
    const double e = testutil::sq_norm(b.ll) + testutil::sq_norm(b.lh) + testutil::sq_norm(b.hl) +
                     testutil::sq_norm(b.hh);
    EXPECT_NEAR(e, testutil::sq_norm(x), 1e-5 * testutil::sq_norm(x));
    EXPECT_LE(testutil::max_abs_diff(haar_idwt2(b), x), 1e-5 * 5);
  }
}

TEST(HaarProperties, TapeFormMatchesChannelForm) {
  const Tensor x = rand_tensor({4, 6, 3}, 9);
  const Tensor packed = testutil::eval([&](Tape& t) { return haar_dwt2(t.constant(x)); });
  ASSERT_EQ(packed.shape(), (Shape{4, 2, 3, 3}));
  for (std::size_t c = 0; c < 3; ++c) {
    Tensor ch({4, 6});
    for (std::size_t p = 0; p < 24; ++p) ch[p] = x[p * 3 + c];
    const auto b = haar_dwt2(ch);
    const Tensor* bands[] = {&b.ll, &b.lh, &b.hl, &b.hh};
    for (std::size_t k = 0; k < 4; ++k)
      for (std::size_t p = 0; p < 6; ++p) EXPECT_EQ(packed[(k * 6 + p) * 3 + c], (*bands[k])[p]);
  }
  const Tensor back = testutil::eval([&](Tape& t) { return haar_idwt2(haar_dwt2(t.constant(x))); });
  EXPECT_LE(testutil::max_abs_diff(back, x), 1e-6);
}

TEST(BoundaryFeatures, ConstantInputHasNoBoundaries) {
  EXPECT_EQ(boundary_features(Tensor::full({4, 4, 2}, 0.75)), Tensor::zeros({4, 4, 2}));
}

TEST(BoundaryFeatures, SubtractsBlockMean) {
  const auto f = boundary_features(Tensor({2, 2, 1}, std::vector<Real>{1, 2, 3, 4}));
  EXPECT_EQ(f, Tensor({2, 2, 1}, std::vector<Real>{-1.5, -0.5, 0.5, 1.5}));
}

TEST(BoundaryFeatures, ZeroBlockMeanIdempotentLinear) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t H = 2 * (1 + rng() % 4), W = 2 * (1 + rng() % 4), C = 1 + rng() % 3;
    const Tensor x = rand_tensor({H, W, C}, rng()), y = rand_tensor({H, W, C}, rng());
    const Tensor fx = boundary_features(x);
    for (std::size_t i = 0; i < H; i += 2)
      for (std::size_t j = 0; j < W; j += 2)
        for (std::size_t c = 0; c < C; ++c) {
          const double s = fx.at({i, j, c}) + fx.at({i, j + 1, c}) + fx.at({i + 1, j, c}) + fx.at({i + 1, j + 1, c});
          EXPECT_NEAR(s, 0, 1e-6);
        }
    EXPECT_LE(testutil::max_abs_diff(boundary_features(fx), fx), 1e-6);
    const Real a = Real(0.7), b = Real(-1.3);
    Tensor mix(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) mix[i] = a * x[i] + b * y[i];
    const Tensor fy = boundary_features(y), fm = boundary_features(mix);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(fm[i], a * fx[i] + b * fy[i], 1e-5);
  }
}

TEST(BoundaryFeatures, GlobalMeanVanishes) {
  // Every 2x2 block sums to zero, so pooling the boundary map gives zero.
  const Tensor x = rand_tensor({8, 8, 4}, 12);
  const Tensor pooled = testutil::eval([&](Tape& t) { return global_average_pool(boundary_features(t.constant(x))); });
  EXPECT_LT(pooled.max_abs(), 1e-6);
}

TEST(BoundaryFeatures, TapeAndTensorFormsAgree) {
  const Tensor x = rand_tensor({6, 4, 2}, 13);
  EXPECT_LE(testutil::max_abs_diff(testutil::eval([&](Tape& t) { return boundary_features(t.constant(x)); }),
                                   boundary_features(x)),
            1e-6);
}
