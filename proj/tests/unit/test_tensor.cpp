// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <thread>

#include "pct/pct.hpp"

using namespace pct;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

}  // namespace

TEST(Tensor, ShapesByRank) {
  EXPECT_EQ(Tensor::scalar(2.0).rank(), 0u);
  EXPECT_EQ(Tensor::vector(RowVector::Ones(4)).shape(), (Shape{4}));
  EXPECT_EQ(Tensor::zeros(2, 3).shape(), (Shape{2, 3}));
  EXPECT_THROW(Tensor::from(Matrix::Zero(2, 2), Shape{3}, false), DimensionError);
}

TEST(Tensor, ItemRequiresScalar) {
  EXPECT_DOUBLE_EQ(Tensor::scalar(1.5).item(), 1.5);
  EXPECT_THROW(Tensor::zeros(2, 1).item(), DimensionError);
}

TEST(Tensor, CopiesAlias) {
  Tensor a = Tensor::zeros(1, 1);
  Tensor b = a;
  b.mutable_value()(0, 0) = 4.0;
  EXPECT_EQ(a.value()(0, 0), 4.0);
  EXPECT_TRUE(a.same_as(b));
  EXPECT_FALSE(a.detach().same_as(a));
}

TEST(Backward, SumGivesOnes) {
  Tensor w = Tensor::from(mat({{1, 2}, {3, 4}}), true);
  sum(w).backward();
  EXPECT_EQ(w.grad(), Matrix::Ones(2, 2));
}

TEST(Backward, MatmulPattern) {
  // d/dA sum(A B) = 1 B^T
  Tensor a = Tensor::from(mat({{1, 2, 3}, {4, 5, 6}}), true);
  Tensor b = Tensor::from(mat({{1, -1}, {0, 2}, {3, 0.5}}), false);
  sum(matmul(a, b)).backward();
  const Matrix expect = Matrix::Ones(2, 2) * b.value().transpose();
  EXPECT_LE((a.grad() - expect).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(gradcheck([&] { return sum(matmul(a, b)); }, a, 1e-6), 1e-6);
}

TEST(Backward, SecondCallDoubles) {
  Tensor x = Tensor::from(mat({{0.5, -2}}), true);
  Tensor y = sum(mul(x, x));
  y.backward();
  const Matrix once = x.grad();
  y.backward();
  EXPECT_EQ(x.grad(), 2.0 * once);
}

TEST(Backward, NonScalarSeedRejected) {
  Tensor x = Tensor::from(mat({{1, 2}}), true);
  EXPECT_THROW(affine(x, 2.0).backward(), DimensionError);
}

TEST(Backward, SharedSubexpression) {
  // y = sum(x * x + x) -> dy/dx = 2x + 1
  Tensor x = Tensor::from(mat({{1, -3, 0.25}}), true);
  sum(add(mul(x, x), x)).backward();
  EXPECT_EQ(x.grad(), (2.0 * x.value().array() + 1.0).matrix());
}

TEST(NoGrad, BuildsNoGraph) {
  Tensor x = Tensor::from(mat({{1, 2}}), true);
  Tensor y;
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_enabled());
    y = sum(mul(x, x));
  }
  EXPECT_TRUE(grad_enabled());
  EXPECT_FALSE(y.requires_grad());
}

TEST(NoGrad, IsPerThread) {
  NoGradGuard guard;
  bool other = false;
  std::thread t([&] { other = grad_enabled(); });
  t.join();
  EXPECT_TRUE(other);
  EXPECT_FALSE(grad_enabled());
}

TEST(Gradcheck, QuadraticIsExact) {
  Tensor x = Tensor::from(mat({{1, 2}}), true);
  EXPECT_LE(gradcheck([&] { return sum(mul(x, x)); }, x, 1e-4), 1e-8);
}

TEST(Gradcheck, ConstantMap) {
  Tensor x = Tensor::from(mat({{1, 2}}), true);
  Tensor c = Tensor::scalar(3.0);
  EXPECT_EQ(gradcheck([&] { return add(c, affine(sum(x), 0.0)); }, x), 0.0);
}

TEST(Gradcheck, EpsRange) {
  Tensor x = Tensor::from(mat({{1}}), true);
  auto f = [&] { return sum(x); };
  EXPECT_THROW(gradcheck(f, x, 1e-8), RangeError);
  EXPECT_THROW(gradcheck(f, x, 1e-2), RangeError);
}

TEST(Gradcheck, DetectsWrongGradient) {
  // An op whose backward is off by a factor 2 must be caught.
  Tensor x = Tensor::from(mat({{0.3, -0.7}}), true);
  auto broken = [&] {
    Matrix v = x.value().array().square();
    Tensor y = make_result(v, {x}, [](detail::Node& n) {
      detail::parent(n, 0).accumulate(4.0 * n.grad.cwiseProduct(detail::parent(n, 0).value));
    });
    return sum(y);
  };
  EXPECT_GT(gradcheck(broken, x), 0.4);
}

TEST(Threads, ResultIndependentOfThreadCount) {
  Rng rng(3);
  std::normal_distribution<double> g;
  Matrix a(64, 48), b(48, 40);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = g(rng);
  set_num_threads(1);
  const Matrix one = matmul(Tensor::from(a), Tensor::from(b)).value();
  set_num_threads(4);
  const Matrix four = matmul(Tensor::from(a), Tensor::from(b)).value();
  set_num_threads(1);
  EXPECT_LE((one - four).cwiseAbs().maxCoeff(), 1e-10 * one.cwiseAbs().maxCoeff());
}
