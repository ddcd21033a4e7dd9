#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "tikhonov/problems.hpp"
#include "tikhonov/solver.hpp"

using namespace tikhonov;

namespace {

// K(u) = A u with weighted spaces; the minimizer is available by enumeration.
struct LinearProblem {
  Matrix a;
  InnerProduct wx, wh;

  Index param_dim() const { return a.cols(); }
  Index data_dim() const { return a.rows(); }
  const InnerProduct& param_ip() const { return wx; }
  const InnerProduct& data_ip() const { return wh; }
  struct Lin {
    const LinearProblem* p;
    Vector k;
    const Vector& value() const { return k; }
    Vector apply(const Vector& d) const { return p->a * d; }
    Vector adjoint(const Vector& v) const { return p->wx.solve(p->a.transpose() * p->wh.apply(v)); }
  };
  Lin linearize(const Vector& u) const { return {this, a * u}; }
  Vector evaluate(const Vector& u) const { return a * u; }
  Vector deriv_apply(const Vector&, const Vector& d) const { return a * d; }
  Vector adjoint_apply(const Vector& u, const Vector& v) const { return linearize(u).adjoint(v); }
};

// Nonlinear map that overflows: J is not finite anywhere except u = 0.
struct Exploding {
  InnerProduct ip = InnerProduct::identity(1);
  Index param_dim() const { return 1; }
  Index data_dim() const { return 1; }
  const InnerProduct& param_ip() const { return ip; }
  const InnerProduct& data_ip() const { return ip; }
  struct Lin {
    Vector k;
    const Vector& value() const { return k; }
    Vector apply(const Vector& d) const { return d; }
    Vector adjoint(const Vector& v) const { return v; }
  };
  Lin linearize(const Vector& u) const {
    return {Vector::Constant(1, std::numeric_limits<double>::infinity() * u(0))};
  }
  Vector evaluate(const Vector& u) const { return linearize(u).k; }
  Vector deriv_apply(const Vector&, const Vector& d) const { return d; }
  Vector adjoint_apply(const Vector&, const Vector& v) const { return v; }
};

// Enumerate every assignment of {free, lower, upper} to the components and
// keep the best KKT point of the box-constrained quadratic.
Vector box_qp_oracle(const LinearProblem& p, double eta, const Vector& g, const ConstraintSet& c) {
  const Index n = p.param_dim();
  const Matrix wx = p.wx.matrix(), wh = p.wh.matrix();
  const Matrix h = p.a.transpose() * wh * p.a + eta * wx;
  const Vector b = p.a.transpose() * wh * g;
  auto J = [&](const Vector& u) {
    const Vector r = p.a * u - g;
    return 0.5 * r.dot(wh * r) + 0.5 * eta * u.dot(wx * u);
  };
  Vector best;
  double best_v = std::numeric_limits<double>::infinity();
  int combos = 1;
  for (Index i = 0; i < n; ++i) combos *= 3;
  for (int code = 0; code < combos; ++code) {
    Vector u = Vector::Zero(n);
    std::vector<Index> free;
    int x = code;
    bool ok = true;
    for (Index i = 0; i < n; ++i, x /= 3) {
      const int s = x % 3;
      if (s == 0) free.push_back(i);
      else if (s == 1) ok = ok && std::isfinite(c.lower()(i)), u(i) = c.lower()(i);
      else ok = ok && std::isfinite(c.upper()(i)), u(i) = c.upper()(i);
    }
    if (!ok) continue;
    if (!free.empty()) {
      const Index nf = static_cast<Index>(free.size());
      Matrix hf(nf, nf);
      Vector rf(nf);
      for (Index a = 0; a < nf; ++a) {
        rf(a) = b(free[a]);
        for (Index j = 0; j < n; ++j)
          if (std::find(free.begin(), free.end(), j) == free.end()) rf(a) -= h(free[a], j) * u(j);
        for (Index bb = 0; bb < nf; ++bb) hf(a, bb) = h(free[a], free[bb]);
      }
      const Vector sf = hf.llt().solve(rf);
      for (Index a = 0; a < nf; ++a) u(free[a]) = sf(a);
    }
    if (!c.contains(u)) continue;
    if (J(u) < best_v) {
      best_v = J(u);
      best = u;
    }
  }
  return best;
}

LinearProblem random_linear(std::mt19937_64& rng, Index m, Index n) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix a(m, n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j) a(i, j) = nd(rng);
  Matrix q(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) q(i, j) = 0.3 * nd(rng);
  Vector wh(m);
  for (Index i = 0; i < m; ++i) wh(i) = 0.5 + std::abs(nd(rng));
  return {a, InnerProduct::dense(q * q.transpose() + Matrix::Identity(n, n)), InnerProduct::diagonal(wh)};
}

}  // namespace

TEST(Minimize, ScalarAgreesWithCubic) {
  const ScalarQuadratic p(0.1);
  const auto c = ConstraintSet::unconstrained(1);
  for (double g : {0.016, 0.0246, 0.02})
    for (double eta : {1e-6, 1e-4, 1e-2, 1.0}) {
      const auto r = minimize(p, c, eta, Vector::Constant(1, g));
      EXPECT_TRUE(r.converged) << r.status;
      EXPECT_NEAR(r.u(0), scalar_tikhonov_minimizer(0.1, g, eta, c), 1e-9) << "g=" << g << " eta=" << eta;
    }
}

TEST(Minimize, LinearUnconstrainedMatchesNormalEquations) {
  std::mt19937_64 rng(21);
  const auto p = random_linear(rng, 6, 4);
  std::normal_distribution<double> nd(0.0, 1.0);
  Vector g(6);
  for (Index i = 0; i < 6; ++i) g(i) = nd(rng);
  const double eta = 0.05;
  const Matrix h = p.a.transpose() * p.wh.matrix() * p.a + eta * p.wx.matrix();
  const Vector oracle = h.llt().solve(p.a.transpose() * p.wh.matrix() * g);
  const auto r = minimize(p, ConstraintSet::unconstrained(4), eta, g);
  EXPECT_TRUE(r.converged);
  EXPECT_LT((r.u - oracle).norm(), 1e-9 * (1.0 + oracle.norm()));
  EXPECT_NEAR(r.value, 0.5 * r.residual_norm * r.residual_norm + eta * r.penalty, 1e-15);
}

TEST(Minimize, BoxConstrainedMatchesEnumerationOracle) {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = random_linear(rng, 5, 4);
    Vector g(5);
    for (Index i = 0; i < 5; ++i) g(i) = 2.0 * nd(rng);
    const ConstraintSet c((Vector(4) << -0.3, 0.0, -1.0, -0.2).finished(),
                          (Vector(4) << 0.3, 1.0, 1.0, 0.2).finished());
    const double eta = 1e-2;
    const Vector oracle = box_qp_oracle(p, eta, g, c);
    const auto r = minimize(p, c, eta, g);
    EXPECT_TRUE(r.converged) << r.status;
    EXPECT_TRUE(c.contains(r.u));
    EXPECT_LT((r.u - oracle).norm(), 1e-7) << "trial " << trial;
  }
}

TEST(Minimize, PotentialSatisfiesProjectedStationarity) {
  const auto p = make_potential(49);
  const auto c = p.default_constraint();
  const Vector u_true = p.grid().sample([](double x) { return 5.0 * std::max(0.0, std::sin(6.283185307179586 * x)); });
  const Vector g = p.evaluate(u_true);
  const auto r = minimize(p, c, 1e-6, g);
  EXPECT_TRUE(r.converged) << r.status;
  EXPECT_TRUE(c.contains(r.u));
  const auto lin = p.linearize(r.u);
  const Vector riesz = lin.adjoint(lin.value() - g) + 1e-6 * r.u;
  const Vector grad = p.param_ip().apply(riesz);
  for (Index i = 0; i < 49; ++i) {
    if (r.u(i) == 0.0) EXPECT_GE(grad(i), -1e-12);  // active lower bound
  }
  EXPECT_LE(p.param_ip().norm(r.u - c.project(r.u - riesz)), 1e-9 * p.param_ip().norm(riesz) + 1e-14);
}

TEST(Minimize, ConductivityRecoversSmoothCoefficientFromExactData) {
  const auto p = make_conductivity(49);
  const Vector u_true = p.grid().sample([](double x) { return 1.0 + 0.5 * std::sin(6.283185307179586 * x); });
  const auto r = minimize(p, p.default_constraint(), 1e-7, p.evaluate(u_true), Vector::Ones(49));
  EXPECT_TRUE(r.converged) << r.status;
  EXPECT_LT(p.param_ip().norm(r.u - u_true) / p.param_ip().norm(u_true), 0.05);
}

TEST(Minimize, IterationLimitIsReported) {
  const auto p = make_conductivity(29);
  SolverOptions o;
  o.max_iter = 1;
  const Vector u_true = Vector::Constant(29, 2.0);
  const auto r = minimize(p, p.default_constraint(), 1e-8, p.evaluate(u_true), Vector::Ones(29), o);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.status, "iteration limit");
  EXPECT_EQ(r.iterations, 1);
}

TEST(Minimize, RejectsInvalidInput) {
  const ScalarQuadratic p(0.1);
  const auto c = ConstraintSet::unconstrained(1);
  const Vector g = Vector::Constant(1, 0.01);
  EXPECT_THROW(minimize(p, c, 0.0, g), std::invalid_argument);
  EXPECT_THROW(minimize(p, c, -1.0, g), std::invalid_argument);
  EXPECT_THROW(minimize(p, c, 1.0, Vector::Ones(2)), DimensionMismatch);
  SolverOptions bad;
  bad.armijo_c = 2.0;
  EXPECT_THROW(minimize(p, c, 1.0, g, bad), std::invalid_argument);
}

TEST(Minimize, NonFiniteObjectiveThrows) {
  Exploding p;
  EXPECT_THROW(minimize(p, ConstraintSet::unconstrained(1), 1.0, Vector::Zero(1), Vector::Ones(1)), SolverError);
}

TEST(Sweep, ValueFunctionMonotonicity) {
  const auto p = make_potential(39);
  const Vector u_true = p.grid().sample([](double x) { return 10.0 * x * (1.0 - x) * std::sin(3.141592653589793 * x); });
  const Vector g = p.evaluate(u_true) + 1e-4 * p.grid().sample([](double x) { return std::cos(40.0 * x); });
  std::vector<double> etas;
  for (int k = 0; k <= 16; ++k) etas.push_back(std::pow(10.0, 1.0 - 0.5 * k));
  const auto res = value_function_sweep(p, p.default_constraint(), g, etas);
  ASSERT_EQ(res.size(), etas.size());
  for (std::size_t i = 1; i < res.size(); ++i) {
    EXPECT_TRUE(res[i].converged);
    // Smaller eta: residual does not grow, penalty does not shrink, F decreases.
    EXPECT_LE(res[i].residual_norm, res[i - 1].residual_norm * (1 + 1e-8) + 1e-14);
    EXPECT_GE(res[i].penalty, res[i - 1].penalty * (1 - 1e-8));
    EXPECT_LE(res[i].value, res[i - 1].value);
  }
}

TEST(Sweep, DuplicatesReuseAndOrderIsEnforced) {
  const ScalarQuadratic p(0.1);
  const auto c = ConstraintSet::unconstrained(1);
  const Vector g = Vector::Constant(1, 0.016);
  const auto res = value_function_sweep(p, c, g, {1e-2, 1e-2, 1e-3});
  EXPECT_EQ(res[0].u, res[1].u);
  EXPECT_THROW(value_function_sweep(p, c, g, {1e-3, 1e-2}), std::invalid_argument);
  EXPECT_THROW(value_function_sweep(p, c, g, {1e-3, 0.0}), std::invalid_argument);
}
