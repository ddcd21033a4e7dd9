#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tikhonov/diagnostics.hpp"
#include "tikhonov/problems.hpp"

using namespace tikhonov;

namespace {

Vector uniform(std::mt19937_64& rng, Index n, double lo, double hi) {
  std::uniform_real_distribution<double> ud(lo, hi);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = ud(rng);
  return v;
}

template <class P>
double adjoint_identity_error(const P& p, const Vector& u, const Vector& v, const Vector& w) {
  const double lhs = p.data_ip().dot(p.deriv_apply(u, v), w);
  const double rhs = p.param_ip().dot(v, p.adjoint_apply(u, w));
  return std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), 1e-300});
}

// Central-difference remainder of K(u + t d) - K(u) - t K'(u) d; halving t must quarter it.
template <class P>
void expect_taylor_second_order(const P& p, const Vector& u, const Vector& d) {
  const Vector k = p.evaluate(u);
  const Vector kd = p.deriv_apply(u, d);
  double prev = 0.0;
  for (double t : {1e-1, 5e-2, 2.5e-2, 1.25e-2}) {
    const double rem = p.data_ip().norm(p.evaluate(u + t * d) - k - t * kd);
    if (prev > 0.0) EXPECT_NEAR(prev / rem, 4.0, 0.3);
    prev = rem;
  }
}

}  // namespace

TEST(ScalarQuadratic, ClosedForms) {
  // eps u (1-u) = 0.016 at eps = 0.1 has roots 0.2 and 0.8.
  EXPECT_NEAR(scalar_exact_solution(0.1, 0.016), 0.2, 1e-15);
  EXPECT_NEAR(scalar_source_representer(0.1, 0.016), 0.2 / (0.1 * 0.6), 1e-13);
  // 0.0246 = 0.1 u (1-u): u = (1 - sqrt(0.016)) / 2.
  const double u2 = 0.5 * (1.0 - std::sqrt(1.0 - 4.0 * 0.246));
  EXPECT_NEAR(scalar_exact_solution(0.1, 0.0246), u2, 1e-14);
  EXPECT_EQ(scalar_exact_solution(0.1, 0.0), 0.0);
  EXPECT_THROW(scalar_exact_solution(0.1, 0.03), std::domain_error);
  EXPECT_THROW(scalar_exact_solution(0.1, -0.01), std::domain_error);
  EXPECT_THROW(ScalarQuadratic(0.0), std::invalid_argument);
}

TEST(ScalarQuadratic, CubicMinimizerMatchesGridScan) {
  const auto c = ConstraintSet::unconstrained(1);
  for (double g : {0.0, 0.016, 0.0246, 0.03, -0.01}) {
    for (double eta : {1e-6, 1e-3, 1e-1, 10.0}) {
      const double u = scalar_tikhonov_minimizer(0.1, g, eta, c);
      auto J = [&](double x) {
        const double r = 0.1 * x * (1.0 - x) - g;
        return 0.5 * r * r + 0.5 * eta * x * x;
      };
      double best = -3.0, best_v = J(-3.0);
      for (int k = 0; k <= 600000; ++k) {
        const double x = -3.0 + 6.0 * k / 600000.0;
        if (J(x) < best_v) {
          best_v = J(x);
          best = x;
        }
      }
      EXPECT_LE(J(u), best_v + 1e-15) << "g=" << g << " eta=" << eta;
      EXPECT_NEAR(u, best, 2e-5) << "g=" << g << " eta=" << eta;
    }
  }
}

TEST(ScalarQuadratic, BoundedMinimizerRespectsBox) {
  const ConstraintSet c(Vector::Constant(1, 0.3), Vector::Constant(1, 0.4));
  const double u = scalar_tikhonov_minimizer(0.1, 0.016, 1e-4, c);
  EXPECT_DOUBLE_EQ(u, 0.3);
}

TEST(ScalarQuadratic, SecantRatioReproducesSecondOrderError) {
  const ScalarQuadratic p(0.1);
  const Vector ur = Vector::Constant(1, 0.2);
  for (double x : {-0.5, 0.0, 0.1, 0.35, 0.9}) {
    const Vector u = Vector::Constant(1, x);
    const double e = second_order_error(p, u, ur)(0);
    EXPECT_NEAR(e, -0.1 * (x - 0.2) * (x - 0.2), 1e-15);
    const double via_ratio = p.derivative(0.2) * p.local_eu_ratio(u, ur)(0) * (x - 0.2);
    EXPECT_NEAR(via_ratio, e, 1e-15);
  }
  EXPECT_THROW(p.local_eu_ratio(ur, Vector::Constant(1, 0.5)), std::domain_error);
}

TEST(AdjointIdentity, AllProblemsTwentyRandomTriples) {
  std::mt19937_64 rng(2024);
  const ScalarQuadratic s(0.1);
  const auto pot = make_potential(49);
  const auto con = make_conductivity(49);
  for (int k = 0; k < 20; ++k) {
    EXPECT_LE(adjoint_identity_error(s, uniform(rng, 1, -1, 1), uniform(rng, 1, -1, 1), uniform(rng, 1, -1, 1)),
              1e-10);
    EXPECT_LE(adjoint_identity_error(pot, uniform(rng, 49, 0, 3), uniform(rng, 49, -1, 1), uniform(rng, 49, -1, 1)),
              1e-10);
    EXPECT_LE(adjoint_identity_error(con, uniform(rng, 49, 0.5, 2), uniform(rng, 49, -1, 1),
                                     uniform(rng, 49, -1, 1)),
              1e-10);
  }
}

TEST(Derivative, TaylorRemainderIsSecondOrder) {
  std::mt19937_64 rng(9);
  const auto pot = make_potential(39);
  expect_taylor_second_order(pot, uniform(rng, 39, 0.5, 2.0), uniform(rng, 39, -1, 1));
  const auto con = make_conductivity(39);
  expect_taylor_second_order(con, uniform(rng, 39, 1.0, 2.0), uniform(rng, 39, -0.5, 0.5));
}

TEST(Derivative, MatchesFiniteDifferenceJacobian) {
  std::mt19937_64 rng(10);
  const auto con = make_conductivity(15);
  const Vector u = uniform(rng, 15, 1.0, 2.0);
  const Matrix jac = jacobian(con.linearize(u), 15);
  const double t = 1e-6;
  for (Index j = 0; j < 15; ++j) {
    Vector e = Vector::Zero(15);
    e(j) = t;
    const Vector fd = (con.evaluate(u + e) - con.evaluate(u - e)) / (2 * t);
    EXPECT_LT((fd - jac.col(j)).norm(), 1e-6 * (1.0 + fd.norm()));
  }
}

TEST(StateEquation, EuTransposeIsTransposeOfEuApply) {
  std::mt19937_64 rng(12);
  const auto pot = make_potential(21);
  const auto con = make_conductivity(21);
  const Vector y = uniform(rng, 21, -1, 1), du = uniform(rng, 21, -1, 1), rho = uniform(rng, 21, -1, 1);
  EXPECT_NEAR(rho.dot(pot.eu_apply(y, du)), du.dot(pot.eu_transpose(y, rho)), 1e-12);
  EXPECT_NEAR(rho.dot(con.eu_apply(y, du)), du.dot(con.eu_transpose(y, rho)), 1e-9);
}

TEST(StateEquation, ResidualVanishesAtState) {
  const auto con = make_conductivity(31);
  const Vector u = con.grid().sample([](double x) { return 1.0 + 0.5 * std::sin(6.283185307179586 * x); });
  const Vector y = con.state(u);
  EXPECT_LT((con.state_operator_apply(u, y) - con.source()).norm(), 1e-9 * con.source().norm());
}

TEST(PotentialProblem, BilinearRatioReproducesSecondOrderError) {
  std::mt19937_64 rng(13);
  const auto pot = make_potential(29);
  const Vector ur = uniform(rng, 29, 0.5, 1.5), u = uniform(rng, 29, 0.0, 2.0);
  const Vector e = second_order_error(pot, u, ur);
  // E = -A(ur)^{-1} e_u(u - ur)(y(u) - y(ur)), i.e. -A^{-1}[(y - y_ref) (u - ur)].
  const auto lin = pot.linearize(ur);
  const Vector oracle = -lin.factor().solve((pot.state(u) - pot.state(ur)).cwiseProduct(u - ur));
  EXPECT_LT((e - oracle).norm(), 1e-10 * (1.0 + oracle.norm()));
}

TEST(Factories, DefaultConstraints) {
  const auto pot = make_potential(5);
  EXPECT_EQ(pot.default_constraint().lower()(0), 0.0);
  EXPECT_TRUE(std::isinf(pot.default_constraint().upper()(0)));
  const auto con = make_conductivity(5, {}, 0.2, 5.0);
  EXPECT_EQ(con.default_constraint().lower()(3), 0.2);
  EXPECT_EQ(con.default_constraint().upper()(3), 5.0);
  EXPECT_THROW(make_conductivity(5, {}, 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(make_potential(5, Vector::Ones(4)), DimensionMismatch);
}
