#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "msglab/autodiff.hpp"

using namespace msglab::ad;

TEST(Autodiff, EveryOpMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 3; ++seed)
    for (const auto& r : gradcheck::all_ops(seed)) EXPECT_TRUE(r.ok) << r.name << " worst " << r.worst;
}

TEST(Autodiff, TwoLayerNetworkMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto r = gradcheck::two_layer_network(seed);
    EXPECT_TRUE(r.ok) << "seed " << seed << " worst " << r.worst;
  }
}

TEST(Autodiff, MatmulShapeMismatchThrows) {
  const Tensor a = Tensor::parameter(Matrix::Ones(2, 3));
  const Tensor b = Tensor::parameter(Matrix::Ones(2, 3));
  EXPECT_THROW(matmul(a, b), ShapeError);
  EXPECT_THROW(add(a, Tensor::constant(Matrix::Ones(3, 2))), ShapeError);
}

TEST(Autodiff, GradientsAccumulateAcrossUses) {
  const Tensor x = Tensor::parameter(Matrix::Constant(1, 1, 3.0));
  const Tensor y = add(mul(x, x), x);  // x^2 + x
  y.backward();
  EXPECT_DOUBLE_EQ(x.grad()(0, 0), 7.0);
}

TEST(Autodiff, BackwardNeedsScalar) {
  const Tensor x = Tensor::parameter(Matrix::Ones(2, 2));
  EXPECT_THROW(tanh(x).backward(), ShapeError);
}

TEST(Autodiff, ZeroGradResets) {
  Tensor x = Tensor::parameter(Matrix::Ones(2, 2));
  sum(x).backward();
  EXPECT_DOUBLE_EQ(x.grad().sum(), 4.0);
  x.zero_grad();
  EXPECT_DOUBLE_EQ(x.grad().sum(), 0.0);
}

TEST(Autodiff, SoftmaxRowsSumToOne) {
  std::mt19937_64 rng(4);
  const Tensor x = Tensor::constant(gradcheck::random_matrix(5, 7, rng, -30.0, 30.0));
  const Matrix p = softmax(x).value();
  for (Eigen::Index r = 0; r < p.rows(); ++r) EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-12);
  EXPECT_TRUE(log_softmax(x).value().allFinite());
}

TEST(Autodiff, DetachBlocksGradient) {
  const Tensor x = Tensor::parameter(Matrix::Constant(1, 1, 2.0));
  sum(mul(detach(x), x)).backward();
  EXPECT_DOUBLE_EQ(x.grad()(0, 0), 2.0);
}

TEST(Autodiff, HardGumbelIsOneHotWithSoftGradient) {
  std::mt19937_64 rng(9);
  Tensor logits = Tensor::parameter(gradcheck::random_matrix(6, 4, rng));
  const Matrix noise = gumbel_noise(6, 4, rng);
  const Tensor hard = gumbel_softmax(logits, noise, 0.5, true);
  for (Eigen::Index r = 0; r < 6; ++r) {
    EXPECT_DOUBLE_EQ(hard.value().row(r).sum(), 1.0);
    EXPECT_DOUBLE_EQ(hard.value().row(r).maxCoeff(), 1.0);
    Eigen::Index arg;
    (logits.value().row(r) + noise.row(r)).maxCoeff(&arg);
    EXPECT_DOUBLE_EQ(hard.value()(r, arg), 1.0);
  }
  const Tensor w = Tensor::constant(gradcheck::random_matrix(6, 4, rng));
  sum(mul(hard, w)).backward();
  const Matrix g_hard = logits.grad();
  logits.zero_grad();
  sum(mul(gumbel_softmax(logits, noise, 0.5, false), w)).backward();
  EXPECT_TRUE(g_hard.isApprox(logits.grad(), 1e-12));
}

TEST(Autodiff, Uniform01InUnitInterval) {
  std::mt19937_64 rng(1);
  double mean = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = uniform01(rng);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    mean += u;
  }
  EXPECT_NEAR(mean / 100000.0, 0.5, 0.005);
}

TEST(Autodiff, SampleCategoricalFrequencies) {
  std::mt19937_64 rng(2);
  Vector p(3);
  p << 0.2, 0.5, 0.3;
  Vector counts = Vector::Zero(3);
  const int n = 200000;
  for (int i = 0; i < n; ++i) counts[sample_categorical(p, rng)] += 1.0;
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(counts[k] / n, p[k], 0.005);
}

TEST(Autodiff, NonFiniteLossIsReported) {
  const Tensor x = Tensor::parameter(Matrix::Constant(1, 1, -1.0));
  EXPECT_THROW(sum(log(x)).backward(), NumericError);
}
