// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "pct/pct.hpp"

using namespace pct;

namespace {

Matrix gaussian(Eigen::Index r, Eigen::Index c, Rng& rng) {
  std::normal_distribution<double> g;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

}  // namespace

TEST(Linear, InitBoundAndZeroBias) {
  Rng rng(1);
  Linear lin(16, 8, true, rng);
  EXPECT_LE(lin.weight.value().cwiseAbs().maxCoeff(), 1.0 / std::sqrt(16.0));
  EXPECT_EQ(lin.bias.value(), Matrix::Zero(1, 8));
  Linear nobias(16, 8, false, rng);
  EXPECT_FALSE(nobias.bias.defined());
}

TEST(Linear, ForwardIsAffine) {
  Rng rng(2);
  Linear lin(3, 2, true, rng);
  lin.bias.mutable_value() << 0.5, -1.0;
  const Matrix x = gaussian(4, 3, rng);
  const Matrix y = lin.forward(Tensor::from(x)).value();
  const Matrix expect = (x * lin.weight.value()).rowwise() + lin.bias.value().row(0);
  EXPECT_LE((y - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Lbr, IdentityWeightsGiveRelu) {
  Rng rng(3);
  Lbr lbr(4, 4, rng);
  lbr.linear.weight.mutable_value() = Matrix::Identity(4, 4);
  lbr.set_mode(Mode::inference);
  const Matrix x = gaussian(5, 4, rng);
  const Matrix y = lbr.forward(Tensor::from(x)).value();
  // running stats (0, 1): BN reduces to x / sqrt(1 + eps)
  EXPECT_LE((y - x.cwiseMax(0.0) / std::sqrt(1.0 + BatchNorm::kEps)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Lbr, ConstantColumnIsZeroInTraining) {
  Rng rng(4);
  Lbr lbr(2, 2, rng);
  lbr.linear.weight.mutable_value() = Matrix::Identity(2, 2);
  Matrix x = gaussian(6, 2, rng);
  x.col(1).setConstant(3.0);
  const Matrix y = lbr.forward(Tensor::from(x)).value();
  EXPECT_EQ(y.col(1), Matrix::Zero(6, 1));
}

TEST(Lbr, WrongWidth) {
  Rng rng(5);
  Lbr lbr(3, 2, rng);
  EXPECT_THROW(lbr.forward(Tensor::zeros(4, 5)), DimensionError);
}

TEST(Lbr, GradientOfMeanOutput) {
  Rng rng(6);
  Lbr lbr(4, 3, rng);
  lbr.set_mode(Mode::inference);
  lbr.bn.running_mean.mutable_value() << 0.1, -0.2, 0.05;
  lbr.bn.running_var.mutable_value() << 0.8, 1.3, 0.6;
  const Tensor x = Tensor::from(gaussian(6, 4, rng));
  // A draw with every pre-activation comfortably away from the relu kink.
  MarginMonitor mon;
  lbr.forward(x);
  ASSERT_GT(mon.margin().relu, 1e-3);
  EXPECT_LE(gradcheck([&] { return mean(lbr.forward(x)); }, lbr.linear.weight, 1e-6), 1e-5);
}

TEST(Lbr, DropoutOnlyInTraining) {
  Rng rng(7);
  Lbr lbr(3, 3, rng, 0.5);
  const Tensor x = Tensor::from(gaussian(8, 3, rng));
  lbr.set_mode(Mode::inference);
  Rng a(1), b(2);
  EXPECT_EQ(lbr.forward(x, a).value(), lbr.forward(x, b).value());
}

TEST(Params, CountsAndNames) {
  Rng rng(8);
  Lbr lbr(5, 4, rng);
  ParamList p;
  lbr.collect(p, "x.");
  EXPECT_EQ(count_trainable(p), 5u * 4 + 4 + 4 + 4);
  EXPECT_EQ(p.front().name, "x.linear.weight");
  EXPECT_EQ(p.size(), 6u);
}

TEST(Sgd, TwoStepsOfMomentum) {
  // Constant gradient 1, lr 1, mu 0.9: steps 1 then 1.9.
  Tensor w = Tensor::from(Matrix::Zero(1, 1), true);
  Sgd sgd({{"w", w, true}}, 0.9);
  for (int i = 0; i < 2; ++i) {
    sgd.zero_grad();
    sum(w).backward();
    sgd.step(1.0);
  }
  EXPECT_DOUBLE_EQ(w.value()(0, 0), -2.9);
}

TEST(Sgd, WeightDecayTerm) {
  Tensor w = Tensor::from(Matrix::Constant(1, 1, 2.0), true);
  Sgd sgd({{"w", w, true}}, 0.0, 0.5);
  sum(w).backward();
  sgd.step(0.1);
  EXPECT_DOUBLE_EQ(w.value()(0, 0), 2.0 - 0.1 * (1.0 + 0.5 * 2.0));
}

TEST(Sgd, NanGradientLeavesParametersAlone) {
  Tensor a = Tensor::from(Matrix::Constant(1, 1, 1.0), true);
  Tensor b = Tensor::from(Matrix::Constant(1, 1, 1.0), true);
  Sgd sgd({{"a", a, true}, {"b", b, true}});
  sum(a).backward();
  sum(affine(b, std::nan(""))).backward();
  EXPECT_THROW(sgd.step(0.1), NumericError);
  EXPECT_EQ(a.value()(0, 0), 1.0);
}

TEST(Sgd, SkipsFrozenTensors) {
  Tensor w = Tensor::from(Matrix::Zero(1, 1), true);
  Tensor frozen = Tensor::from(Matrix::Zero(1, 1));
  Sgd sgd({{"w", w, true}, {"stats", frozen, false}});
  EXPECT_EQ(sgd.params().size(), 1u);
}

TEST(CosineLr, Endpoints) {
  const Schedule s{0.01, 0.001, 100};
  EXPECT_DOUBLE_EQ(cosine_lr(0, s), 0.01);
  EXPECT_NEAR(cosine_lr(100, s), 0.001, 1e-15);
  EXPECT_NEAR(cosine_lr(50, s), 0.0055, 1e-15);
  EXPECT_THROW(cosine_lr(101, s), RangeError);
}

TEST(CosineLr, Monotone) {
  const Schedule s{0.1, 0.0, 40};
  for (int t = 1; t <= 40; ++t) EXPECT_LE(cosine_lr(t, s), cosine_lr(t - 1, s));
}
