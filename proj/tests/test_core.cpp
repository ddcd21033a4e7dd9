#include <gtest/gtest.h>

#include <random>

#include "tikhonov/core.hpp"
#include "tikhonov/problems.hpp"

using namespace tikhonov;

namespace {

Vector random_vector(std::mt19937_64& rng, Index n) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = nd(rng);
  return v;
}

}  // namespace

TEST(InnerProduct, DiagonalMatchesDenseOracle) {
  const Vector w = (Vector(4) << 1.0, 2.0, 0.5, 3.0).finished();
  const auto ip = InnerProduct::diagonal(w);
  const Matrix dense = w.asDiagonal();
  std::mt19937_64 rng(7);
  const Vector a = random_vector(rng, 4), b = random_vector(rng, 4);
  EXPECT_NEAR(ip.dot(a, b), a.dot(dense * b), 1e-14);
  EXPECT_LT((ip.solve(ip.apply(a)) - a).norm(), 1e-14);
  EXPECT_TRUE(ip.is_diagonal());
}

TEST(InnerProduct, TridiagonalMatchesDenseOracle) {
  const Index n = 9;
  const Vector diag = Vector::Constant(n, 4.0);
  const Vector off = Vector::Constant(n - 1, -1.0);
  const auto ip = InnerProduct::tridiagonal(diag, off);
  Matrix dense = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) dense(i, i) = 4.0;
  for (Index i = 0; i + 1 < n; ++i) dense(i, i + 1) = dense(i + 1, i) = -1.0;
  std::mt19937_64 rng(11);
  const Vector a = random_vector(rng, n), b = random_vector(rng, n);
  EXPECT_NEAR(ip.dot(a, b), a.dot(dense * b), 1e-12);
  EXPECT_LT((ip.solve(b) - dense.lu().solve(b)).norm(), 1e-12);
  EXPECT_LT((ip.matrix() - dense).norm(), 0.0 + 1e-15);
}

TEST(InnerProduct, DenseWeightAndSymmetry) {
  std::mt19937_64 rng(3);
  Matrix a(5, 5);
  for (Index j = 0; j < 5; ++j) a.col(j) = random_vector(rng, 5);
  const Matrix spd = a * a.transpose() + Matrix::Identity(5, 5);
  const auto ip = InnerProduct::dense(spd);
  const Vector x = random_vector(rng, 5), y = random_vector(rng, 5);
  EXPECT_NEAR(ip.dot(x, y), ip.dot(y, x), 1e-12);
  EXPECT_GT(ip.squared_norm(x), 0.0);
  EXPECT_LT((spd * ip.solve(x) - x).norm(), 1e-10);
}

TEST(InnerProduct, RejectsIndefiniteWeights) {
  EXPECT_THROW(InnerProduct::diagonal((Vector(2) << 1.0, 0.0).finished()), std::invalid_argument);
  EXPECT_THROW(InnerProduct::tridiagonal(Vector::Constant(3, 1.0), Vector::Constant(2, 2.0)),
               std::invalid_argument);
  Matrix nonsym = Matrix::Identity(2, 2);
  nonsym(0, 1) = 0.5;
  EXPECT_THROW(InnerProduct::dense(nonsym), std::invalid_argument);
  EXPECT_THROW(InnerProduct::dense(-Matrix::Identity(2, 2)), std::invalid_argument);
}

TEST(InnerProduct, DimensionMismatchThrows) {
  const auto ip = InnerProduct::identity(3);
  EXPECT_THROW(ip.apply(Vector::Ones(2)), DimensionMismatch);
}

TEST(ConstraintSet, ProjectionIsIdempotentAndNonexpansive) {
  const ConstraintSet c((Vector(3) << -1.0, 0.0, 2.0).finished(), (Vector(3) << 1.0, 5.0, 2.0).finished());
  std::mt19937_64 rng(5);
  for (int k = 0; k < 50; ++k) {
    const Vector a = 3.0 * random_vector(rng, 3), b = 3.0 * random_vector(rng, 3);
    const Vector pa = c.project(a), pb = c.project(b);
    EXPECT_TRUE(c.contains(pa));
    EXPECT_EQ(c.project(pa), pa);
    EXPECT_LE((pa - pb).norm(), (a - b).norm() + 1e-15);
  }
}

TEST(ConstraintSet, SignPattern) {
  const ConstraintSet c((Vector(4) << 0.0, 0.0, 0.0, 1.0).finished(), (Vector(4) << 1.0, 1.0, 1.0, 1.0).finished());
  const auto pat = c.multiplier_sign_pattern((Vector(4) << 0.0, 0.5, 1.0, 1.0).finished());
  EXPECT_EQ(pat[0], MultiplierSign::NonNegative);
  EXPECT_EQ(pat[1], MultiplierSign::Zero);
  EXPECT_EQ(pat[2], MultiplierSign::NonPositive);
  EXPECT_EQ(pat[3], MultiplierSign::Free);
  const Vector m = clamp_to_pattern((Vector(4) << -1.0, 2.0, 3.0, -4.0).finished(), pat);
  EXPECT_EQ(m, (Vector(4) << 0.0, 0.0, 0.0, -4.0).finished());
}

TEST(ConstraintSet, RejectsInvertedBoundsAndInfeasiblePoints) {
  EXPECT_THROW(ConstraintSet::box(2, 1.0, 0.0), std::invalid_argument);
  const auto c = ConstraintSet::lower_bound(2, 0.0);
  EXPECT_THROW(c.multiplier_sign_pattern((Vector(2) << -1.0, 0.0).finished()), InfeasiblePoint);
}

TEST(TikhonovValue, ScalarByHand) {
  const ScalarQuadratic p(0.1);
  const auto c = ConstraintSet::unconstrained(1);
  const Vector u = Vector::Constant(1, 0.3);
  const Vector g = Vector::Constant(1, 0.01);
  const double r = 0.1 * 0.3 * 0.7 - 0.01;
  EXPECT_NEAR(tikhonov_value(p, c, 0.5, g, u), 0.5 * r * r + 0.25 * 0.09, 1e-16);
  EXPECT_THROW(tikhonov_value(p, c, 0.0, g, u), std::invalid_argument);
}

TEST(Jacobian, ScalarColumnIsDerivative) {
  const ScalarQuadratic p(0.2);
  const auto lin = p.linearize(Vector::Constant(1, 0.25));
  EXPECT_DOUBLE_EQ(jacobian(lin, 1)(0, 0), 0.2 * 0.5);
}
