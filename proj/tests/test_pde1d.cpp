#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "tikhonov/pde1d.hpp"
#include "tikhonov/tridiagonal.hpp"

using namespace tikhonov;
using namespace tikhonov::pde1d;

namespace {

Vector random_vector(std::mt19937_64& rng, Index n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> ud(lo, hi);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = ud(rng);
  return v;
}

}  // namespace

TEST(Tridiagonal, SolveMatchesDenseLU) {
  std::mt19937_64 rng(1);
  for (Index n : {1, 2, 5, 40}) {
    Vector sub = random_vector(rng, n), sup = random_vector(rng, n);
    Vector diag = random_vector(rng, n, 3.0, 4.0);
    TridiagonalSystem sys(sub, diag, sup);
    const Vector rhs = random_vector(rng, n);
    const Matrix a = sys.dense();
    const Vector oracle = a.fullPivLu().solve(rhs);
    const TridiagonalFactor f(sys);
    EXPECT_LT((f.solve(rhs) - oracle).norm(), 1e-12 * (1.0 + oracle.norm()));
    const Vector oracle_t = a.transpose().fullPivLu().solve(rhs);
    EXPECT_LT((f.solve_transposed(rhs) - oracle_t).norm(), 1e-12 * (1.0 + oracle_t.norm()));
    EXPECT_LT((sys.multiply(rhs) - a * rhs).norm(), 1e-13);
  }
}

TEST(Tridiagonal, ZeroPivotIsReported) {
  TridiagonalSystem sys(Vector::Zero(2), (Vector(2) << 0.0, 1.0).finished(), Vector::Zero(2));
  try {
    TridiagonalFactor f(sys);
    FAIL() << "expected ZeroPivot";
  } catch (const ZeroPivot& e) {
    EXPECT_EQ(e.row(), 0);
  }
}

TEST(Grid, NodesAndSpacing) {
  Grid1D g(9);
  EXPECT_DOUBLE_EQ(g.h(), 0.1);
  EXPECT_DOUBLE_EQ(g.x(0), 0.1);
  EXPECT_NEAR(g.x(8), 0.9, 1e-15);
  EXPECT_THROW(Grid1D(2), std::invalid_argument);
}

TEST(DifferenceOperators, TransposesAreExact) {
  std::mt19937_64 rng(2);
  const Index n = 12;
  const Vector y = random_vector(rng, n), d = random_vector(rng, n + 1);
  EXPECT_NEAR(forward_differences(y).dot(d), y.dot(forward_differences_transpose(d)), 1e-14);
  EXPECT_NEAR(midpoint_average(y).dot(d), y.dot(midpoint_average_transpose(d)), 1e-14);
}

// -y'' = pi^2 sin(pi x) has y = sin(pi x); the 3-point stencil is second order.
TEST(Laplacian, ManufacturedSolutionConvergesAtSecondOrder) {
  const double pi = std::numbers::pi;
  double prev = 0.0;
  for (Index n : {19, 39, 79, 159}) {
    Grid1D g(n);
    const Vector f = g.sample([&](double x) { return pi * pi * std::sin(pi * x); });
    const Vector exact = g.sample([&](double x) { return std::sin(pi * x); });
    const Vector y = solve_tridiagonal(laplacian(g), f);
    const double err = (y - exact).cwiseAbs().maxCoeff();
    if (prev > 0.0) EXPECT_NEAR(prev / err, 4.0, 0.1);
    prev = err;
  }
}

// -(a y')' = f with a = 1 + x, y = x(1-x): f = -(a' y' + a y'') = -(1-2x) + 2(1+x) = 1 + 4x.
TEST(ConductivityOperator, ManufacturedSolutionConverges) {
  double prev = 0.0;
  for (Index n : {19, 39, 79}) {
    Grid1D g(n);
    const Vector a = g.sample([](double x) { return 1.0 + x; });
    const Vector f = g.sample([](double x) { return 1.0 + 4.0 * x; });
    const Vector exact = g.sample([](double x) { return x * (1.0 - x); });
    const Vector y = solve_tridiagonal(assemble_operator(g, a, OperatorKind::conductivity), f);
    const double err = (y - exact).cwiseAbs().maxCoeff();
    if (prev > 0.0) EXPECT_GT(prev / err, 1.8);
    prev = err;
  }
  EXPECT_LT(prev, 1e-3);
}

TEST(PotentialOperator, MatchesDenseAssembly) {
  Grid1D g(7);
  std::mt19937_64 rng(4);
  const Vector u = random_vector(rng, 7, 0.0, 3.0);
  const Matrix a = assemble_operator(g, u, OperatorKind::potential).dense();
  const double ih2 = 1.0 / (g.h() * g.h());
  for (Index i = 0; i < 7; ++i) {
    EXPECT_NEAR(a(i, i), 2.0 * ih2 + u(i), 1e-9);
    if (i + 1 < 7) EXPECT_NEAR(a(i, i + 1), -ih2, 1e-9);
  }
  EXPECT_TRUE(a.isApprox(a.transpose()));
}

TEST(Operators, RejectLossOfEllipticity) {
  Grid1D g(5);
  Vector u = Vector::Ones(5);
  u(2) = -0.1;
  EXPECT_THROW(assemble_operator(g, u, OperatorKind::potential), EllipticityError);
  u(2) = 0.0;
  try {
    assemble_operator(g, u, OperatorKind::conductivity);
    FAIL() << "expected EllipticityError";
  } catch (const EllipticityError& e) {
    EXPECT_EQ(e.node(), 2);
  }
}

TEST(Norms, DiscreteH1ApproximatesContinuous) {
  const double pi = std::numbers::pi;
  Grid1D g(199);
  const auto w = discrete_h1_norms(g);
  const Vector s = g.sample([&](double x) { return std::sin(pi * x); });
  EXPECT_NEAR(w.mass.squared_norm(s), 0.5, 1e-10);
  EXPECT_NEAR(w.stiffness.squared_norm(s), pi * pi / 2.0, 1e-3);
  // Parameter weight: constants carry no seminorm, only mass.
  const auto wp = parameter_h1_weight(g);
  EXPECT_NEAR(wp.squared_norm(Vector::Ones(199)), 199 * g.h(), 1e-12);
}
