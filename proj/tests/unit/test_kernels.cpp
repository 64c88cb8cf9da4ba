#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "vebm/kernels.hpp"

using namespace vebm;

namespace {
const Tensor* const kNoBias = nullptr;
}

TEST(Conv3d, DeltaKernelIsIdentity) {
  const Tensor x = oracle::random_tensor({1, 1, 3, 3, 3}, 1);
  const Tensor w({1, 1, 1, 1, 1}, 1.0f);
  const Tensor y = conv3d(x, w, kNoBias, 1);
  EXPECT_EQ(y, x);
}

TEST(Conv3d, MatchesLoopOracleStride2) {
  const Tensor x = oracle::random_tensor({2, 2, 4, 4, 4}, 2);
  const Tensor w = oracle::random_tensor({3, 2, 2, 2, 2}, 3);
  const Tensor b = oracle::random_tensor({3}, 4);
  const Tensor y = conv3d(x, w, &b, 2);
  const TensorD ref = oracle::conv3d(oracle::to_double(x), oracle::to_double(w),
                                     {b[0], b[1], b[2]}, 2);
  ASSERT_EQ(y.shape(), ref.shape());
  EXPECT_LT(oracle::max_abs_diff(ref.data(), y.data()), 1e-5);
}

TEST(Conv3d, OddKernelAndBorders) {
  const Tensor x = oracle::random_tensor({1, 1, 5, 6, 5}, 5);
  const Tensor w = oracle::random_tensor({2, 1, 3, 3, 3}, 6);
  for (std::size_t s : {1u, 2u, 3u}) {
    const Tensor y = conv3d(x, w, kNoBias, s);
    const TensorD ref = oracle::conv3d(oracle::to_double(x), oracle::to_double(w), {}, s);
    ASSERT_EQ(y.shape(), ref.shape());
    EXPECT_LT(oracle::max_abs_diff(ref.data(), y.data()), 1e-5) << "stride " << s;
  }
}

TEST(Conv3d, PaperGeometryShape) {
  const ConvGeometry g = ConvGeometry::same({32, 32, 32}, 16, 3);
  EXPECT_EQ(g.out, (Extent3{11, 11, 11}));
}

TEST(Conv3d, BackwardMatchesFiniteDifferences) {
  const TensorD x = oracle::random_tensor({1, 2, 4, 4, 4}, 7).cast<double>();
  const TensorD w = oracle::random_tensor({2, 2, 3, 3, 3}, 8).cast<double>();
  const TensorD b({2}, std::vector<double>{0.1, -0.2});
  const TensorD dy = oracle::random_tensor({1, 2, 2, 2, 2}, 9).cast<double>();
  const ConvGrads<double> g = conv3d_backward(x, w, true, 2, dy);
  auto loss = [&](const TensorD& xx, const TensorD& ww, const TensorD& bb) {
    return dot<double>(conv3d(xx, ww, &bb, 2).data(), dy.data());
  };
  const double h = 1e-6;
  for (std::size_t i = 0; i < x.size(); i += 7) {
    TensorD p = x, m = x;
    p[i] += h;
    m[i] -= h;
    EXPECT_NEAR(g.dx[i], (loss(p, w, b) - loss(m, w, b)) / (2 * h), 1e-6);
  }
  for (std::size_t i = 0; i < w.size(); i += 5) {
    TensorD p = w, m = w;
    p[i] += h;
    m[i] -= h;
    EXPECT_NEAR(g.dw[i], (loss(x, p, b) - loss(x, m, b)) / (2 * h), 1e-6);
  }
  double dy_sum0 = 0.0;
  for (std::size_t i = 0; i < 8; ++i) dy_sum0 += dy[i];
  EXPECT_NEAR(g.db[0], dy_sum0, 1e-12);
}

TEST(Deconv3d, UnitFactorDeltaIsIdentity) {
  const Tensor x = oracle::random_tensor({1, 1, 3, 3, 3}, 10);
  const Tensor w({1, 1, 1, 1, 1}, 1.0f);
  EXPECT_EQ(deconv3d(x, w, kNoBias, 1), x);
}

TEST(Deconv3d, UpsamplesShape) {
  const Tensor x = oracle::random_tensor({1, 2, 4, 4, 4}, 11);
  const Tensor w = oracle::random_tensor({2, 3, 4, 4, 4}, 12);
  EXPECT_EQ(deconv3d(x, w, kNoBias, 2).shape(), (Shape{1, 3, 8, 8, 8}));
}

TEST(Deconv3d, MatchesScatterOracle) {
  for (std::size_t k : {1u, 2u, 3u, 4u}) {
    for (std::size_t s : {1u, 2u, 3u}) {
      const Tensor x = oracle::random_tensor({2, 2, 2, 3, 2}, 20 + k * 5 + s);
      const Tensor w = oracle::random_tensor({2, 3, k, k, k}, 40 + k * 5 + s);
      const Tensor b = oracle::random_tensor({3}, 60 + k);
      const Tensor y = deconv3d(x, w, &b, s);
      const oracle::TensorD want = oracle::deconv3d(
          oracle::to_double(x), oracle::to_double(w), {b[0], b[1], b[2]}, s);
      ASSERT_EQ(y.shape(), want.shape());
      EXPECT_LT(oracle::max_abs_diff(want.data(), y.data()), 1e-5) << "k=" << k << " s=" << s;
    }
  }
}

TEST(Deconv3d, IsAdjointOfConv) {
  for (std::size_t k : {2u, 3u, 4u}) {
    for (std::size_t s : {1u, 2u}) {
      const Tensor w = oracle::random_tensor({3, 2, k, k, k}, 100 + k * 10 + s);
      const Tensor x = oracle::random_tensor({2, 2, 6, 6, 6}, 200 + k);
      const Tensor y = oracle::random_tensor({2, 3, 6 / s, 6 / s, 6 / s}, 300 + s);
      const double lhs = dot<float>(conv3d(x, w, kNoBias, s).data(), y.data());
      const double rhs = dot<float>(x.data(), deconv3d(y, w, kNoBias, s).data());
      EXPECT_NEAR(lhs, rhs, 1e-4 * std::max(1.0, std::abs(lhs))) << "k=" << k << " s=" << s;
    }
  }
}

TEST(MaxPool3d, ConstantGridStaysConstant) {
  const Tensor x({1, 1, 4, 4, 4}, 2.5f);
  const auto r = maxpool3d(x, 2);
  for (float v : r.y.data()) EXPECT_EQ(v, 2.5f);
}

TEST(MaxPool3d, SpikeLandsInItsBlock) {
  Tensor x({1, 1, 4, 4, 4}, 0.0f);
  x[(3 * 4 + 1) * 4 + 2] = 7.0f;  // z=3, y=1, x=2 -> block (1, 0, 1)
  const auto r = maxpool3d(x, 2);
  for (std::size_t i = 0; i < r.y.size(); ++i) {
    EXPECT_EQ(r.y[i], i == (1 * 2 + 0) * 2 + 1 ? 7.0f : 0.0f);
  }
}

TEST(MaxPool3d, MatchesLoopOracle) {
  const Tensor x = oracle::random_tensor({2, 2, 8, 8, 8}, 13);
  const auto r = maxpool3d(x, 2);
  const TensorD ref = oracle::maxpool3d(oracle::to_double(x), 2);
  ASSERT_EQ(r.y.shape(), ref.shape());
  EXPECT_LT(oracle::max_abs_diff(ref.data(), r.y.data()), 1e-7);
  const Tensor odd = oracle::random_tensor({1, 1, 5, 5, 5}, 14);
  const auto ro = maxpool3d(odd, 2);
  const TensorD refo = oracle::maxpool3d(oracle::to_double(odd), 2);
  ASSERT_EQ(ro.y.shape(), refo.shape());
  EXPECT_LT(oracle::max_abs_diff(refo.data(), ro.y.data()), 1e-7);
}

TEST(MaxPool3d, TiesRouteGradientToLowestIndex) {
  const Tensor x({1, 1, 2, 2, 2}, 1.0f);
  const auto r = maxpool3d(x, 2);
  ASSERT_EQ(r.argmax.size(), 1u);
  EXPECT_EQ(r.argmax[0], 0u);
  const Tensor dx = maxpool3d_backward(x.shape(), r.argmax, Tensor({1, 1, 1, 1, 1}, 3.0f));
  EXPECT_EQ(dx[0], 3.0f);
  for (std::size_t i = 1; i < 8; ++i) EXPECT_EQ(dx[i], 0.0f);
}

TEST(BatchNorm3d, NormalizedInputPassesThrough) {
  // Two samples, one channel, values ±1: batch mean 0, biased variance 1.
  Tensor x({2, 1, 1, 1, 2}, std::vector<float>{1, -1, -1, 1});
  const Tensor gamma({1}, 1.0f), beta({1}, 0.0f), rm({1}, 0.0f), rv({1}, 1.0f);
  const auto r = batchnorm3d(x, gamma, beta, rm, rv, BatchNormMode::kTraining, 1e-5);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(r.y[i], x[i] / std::sqrt(1.0 + 1e-5), 1e-6);
  }
}

TEST(BatchNorm3d, ZeroScaleGivesShift) {
  const Tensor x = oracle::random_tensor({3, 2, 2, 2, 2}, 15);
  const Tensor gamma({2}, 0.0f), beta({2}, 5.0f), rm({2}, 0.0f), rv({2}, 1.0f);
  for (auto mode : {BatchNormMode::kTraining, BatchNormMode::kInference}) {
    const auto r = batchnorm3d(x, gamma, beta, rm, rv, mode, 1e-5);
    for (float v : r.y.data()) EXPECT_EQ(v, 5.0f);
  }
}

TEST(BatchNorm3d, BackwardMatchesFiniteDifferences) {
  const TensorD x = oracle::random_tensor({3, 2, 2, 2, 2}, 16).cast<double>();
  const TensorD gamma({2}, std::vector<double>{1.3, 0.7});
  const TensorD beta({2}, std::vector<double>{0.2, -0.4});
  const TensorD rm({2}, 0.0), rv({2}, 1.0);
  const TensorD dy = oracle::random_tensor(x.shape(), 17).cast<double>();
  const auto mode = BatchNormMode::kTraining;
  const auto fwd = batchnorm3d(x, gamma, beta, rm, rv, mode, 1e-5);
  const auto g = batchnorm3d_backward(x, gamma, fwd.mean, fwd.var, mode, 1e-5, dy);
  auto loss = [&](const TensorD& xx, const TensorD& gg, const TensorD& bb) {
    return dot<double>(batchnorm3d(xx, gg, bb, rm, rv, mode, 1e-5).y.data(), dy.data());
  };
  const double h = 1e-6;
  for (std::size_t i = 0; i < x.size(); ++i) {
    TensorD p = x, m = x;
    p[i] += h;
    m[i] -= h;
    EXPECT_NEAR(g.dx[i], (loss(p, gamma, beta) - loss(m, gamma, beta)) / (2 * h), 1e-6);
  }
  for (std::size_t c = 0; c < 2; ++c) {
    TensorD p = gamma, m = gamma;
    p[c] += h;
    m[c] -= h;
    EXPECT_NEAR(g.dgamma[c], (loss(x, p, beta) - loss(x, m, beta)) / (2 * h), 1e-6);
    TensorD pb = beta, mb = beta;
    pb[c] += h;
    mb[c] -= h;
    EXPECT_NEAR(g.dbeta[c], (loss(x, gamma, pb) - loss(x, gamma, mb)) / (2 * h), 1e-6);
  }
}

TEST(FullyConnected, MatchesMatrixProduct) {
  const Tensor x({2, 1, 1, 1, 3}, std::vector<float>{1, 2, 3, -1, 0, 1});
  const Tensor w({2, 3}, std::vector<float>{1, 0, -1, 2, 1, 0});
  const Tensor b({2}, std::vector<float>{0.5f, -0.5f});
  const Tensor y = fully_connected(x, w, &b);
  ASSERT_EQ(y.shape(), (Shape{2, 2}));
  EXPECT_FLOAT_EQ(y[0], 1 - 3 + 0.5f);
  EXPECT_FLOAT_EQ(y[1], 2 + 2 - 0.5f);
  EXPECT_FLOAT_EQ(y[2], -1 - 1 + 0.5f);
  EXPECT_FLOAT_EQ(y[3], -2 + 0 - 0.5f);
}
