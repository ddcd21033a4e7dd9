#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "tikhonov/core.hpp"
#include "tikhonov/pde1d.hpp"

namespace tikhonov {

// ---------------------------------------------------------------------------
// Scalar quadratic operator K(u) = eps * u * (1 - u)
// ---------------------------------------------------------------------------

/// One-dimensional model problem with closed forms for the minimum-norm
/// solution, the source representer and the Tikhonov minimizer. The
/// parameter eps_scale controls how flat (ill-conditioned) the operator is.
class ScalarQuadratic {
 public:
  explicit ScalarQuadratic(double eps_scale) : eps_(eps_scale), ip_(InnerProduct::identity(1)) {
    if (!(eps_scale > 0.0)) throw std::invalid_argument("eps_scale must be positive");
  }

  double eps_scale() const { return eps_; }
  Index param_dim() const { return 1; }
  Index data_dim() const { return 1; }
  const InnerProduct& param_ip() const { return ip_; }
  const InnerProduct& data_ip() const { return ip_; }

  double forward(double u) const { return eps_ * u * (1.0 - u); }
  double derivative(double u) const { return eps_ * (1.0 - 2.0 * u); }
  /// Lipschitz constant of K'.
  double lipschitz() const { return 2.0 * eps_; }

  struct Lin {
    Vector k;
    double slope;
    const Vector& value() const { return k; }
    Vector apply(const Vector& du) const { return slope * du; }
    Vector adjoint(const Vector& v) const { return slope * v; }
  };

  Lin linearize(const Vector& u) const {
    require_dim(u.size(), 1, "ScalarQuadratic");
    return {Vector::Constant(1, forward(u(0))), derivative(u(0))};
  }
  Vector evaluate(const Vector& u) const { return linearize(u).value(); }
  Vector deriv_apply(const Vector& u, const Vector& du) const { return linearize(u).apply(du); }
  Vector adjoint_apply(const Vector& u, const Vector& v) const { return linearize(u).adjoint(v); }

  /// Ratio (S(u,u_ref) - K'(u_ref)) / K'(u_ref), where S is the secant slope,
  /// so that E(u,u_ref) = K'(u_ref) * ratio * (u - u_ref).
  Vector local_eu_ratio(const Vector& u, const Vector& u_ref) const {
    require_dim(u.size(), 1, "local_eu_ratio");
    require_dim(u_ref.size(), 1, "local_eu_ratio");
    const double tangent = derivative(u_ref(0));
    if (tangent == 0.0)
      throw std::domain_error("local_eu_ratio: derivative vanishes at the reference point (node 0)");
    const double secant = eps_ * (1.0 - u(0) - u_ref(0));
    return Vector::Constant(1, (secant - tangent) / tangent);
  }

  ConstraintSet default_constraint() const { return ConstraintSet::unconstrained(1); }

 private:
  double eps_;
  InnerProduct ip_;
};

/// Smaller root of eps*u*(1-u) = g_exact.
inline double scalar_exact_solution(double eps_scale, double g_exact) {
  if (!(eps_scale > 0.0)) throw std::invalid_argument("eps_scale must be positive");
  if (g_exact < 0.0 || !(g_exact < eps_scale / 4.0))
    throw std::domain_error("exact data must satisfy 0 <= g < eps_scale/4 for a real solution");
  const double disc = 1.0 - 4.0 * g_exact / eps_scale;
  // 2g/(eps(1+sqrt(disc))) is the same root without cancellation.
  return 2.0 * g_exact / (eps_scale * (1.0 + std::sqrt(disc)));
}

/// w with K'(u_exact) w = u_exact (unconstrained source condition).
inline double scalar_source_representer(double eps_scale, double g_exact) {
  const double u = scalar_exact_solution(eps_scale, g_exact);
  const double slope = eps_scale * (1.0 - 2.0 * u);
  if (slope == 0.0) throw std::domain_error("source condition fails: K'(u_exact) vanishes at u = 1/2");
  return u / slope;
}

namespace detail {

/// Real roots of a3 x^3 + a2 x^2 + a1 x + a0 (a3 != 0), each polished by Newton.
inline std::vector<double> real_cubic_roots(double a3, double a2, double a1, double a0) {
  const double b = a2 / a3, c = a1 / a3, d = a0 / a3;
  const double shift = b / 3.0;
  const double p = c - b * b / 3.0;
  const double q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
  std::vector<double> roots;
  const double disc = q * q / 4.0 + p * p * p / 27.0;
  if (p == 0.0 && q == 0.0) {
    roots.push_back(-shift);
  } else if (disc > 0.0) {
    const double sq = std::sqrt(disc);
    roots.push_back(std::cbrt(-q / 2.0 + sq) + std::cbrt(-q / 2.0 - sq) - shift);
  } else {
    const double r = std::sqrt(-p / 3.0);
    const double arg = std::clamp(3.0 * q / (2.0 * p * r), -1.0, 1.0);
    const double phi = std::acos(arg) / 3.0;
    for (int k = 0; k < 3; ++k)
      roots.push_back(2.0 * r * std::cos(phi - 2.0 * std::numbers::pi * k / 3.0) - shift);
  }
  for (double& x : roots) {
    for (int it = 0; it < 4; ++it) {
      const double f = ((a3 * x + a2) * x + a1) * x + a0;
      const double df = (3.0 * a3 * x + 2.0 * a2) * x + a1;
      if (df == 0.0) break;
      const double step = f / df;
      x -= step;
      if (std::abs(step) <= 1e-17 * std::max(1.0, std::abs(x))) break;
    }
  }
  return roots;
}

}  // namespace detail

/// Global minimizer over the interval [lower, upper] of
/// J(u) = 1/2 (eps u(1-u) - g)^2 + eta/2 u^2, via the stationarity cubic.
inline double scalar_tikhonov_minimizer(double eps_scale, double g, double eta,
                                        const ConstraintSet& c) {
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
  require_dim(c.dim(), 1, "scalar_tikhonov_minimizer");
  const double lo = c.lower()(0), hi = c.upper()(0);
  const double e = eps_scale;
  auto value = [&](double u) {
    const double r = e * u * (1.0 - u) - g;
    return 0.5 * r * r + 0.5 * eta * u * u;
  };
  std::vector<double> candidates;
  for (double r : detail::real_cubic_roots(2.0 * e * e, -3.0 * e * e, e * e + 2.0 * e * g + eta, -e * g))
    if (r >= lo && r <= hi) candidates.push_back(r);
  if (std::isfinite(lo)) candidates.push_back(lo);
  if (std::isfinite(hi)) candidates.push_back(hi);

  double best = candidates.front();
  double best_val = value(best);
  for (double u : candidates) {
    const double v = value(u);
    const double tie = 1e-15 * std::max(std::abs(v), std::abs(best_val));
    if (v < best_val - tie || (std::abs(v - best_val) <= tie && std::abs(u) < std::abs(best))) {
      best = u;
      best_val = v;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// 1D elliptic parameter identification with distributed observation
// ---------------------------------------------------------------------------

/// Identification of the coefficient u in A(u) y = f on (0,1) with
/// homogeneous Dirichlet data, observing y everywhere (K(u) = y(u)).
///  - potential:    A(u) y = -y'' + u y,   e_u(u,y) du = y du (pointwise)
///  - conductivity: A(u) y = -(u y')',     e_u(u,y) du = -(du y')'
/// Derivative and adjoint are the exact transpose pair of the discrete
/// operators with respect to the weighted inner products.
template <pde1d::OperatorKind Kind>
class EllipticProblem {
 public:
  static constexpr pde1d::OperatorKind kind = Kind;

  EllipticProblem(pde1d::Grid1D grid, Vector f, InnerProduct param_ip, InnerProduct data_ip,
                  ConstraintSet constraint)
      : grid_(grid),
        f_(std::move(f)),
        param_ip_(std::move(param_ip)),
        data_ip_(std::move(data_ip)),
        constraint_(std::move(constraint)) {
    require_dim(f_.size(), grid_.n(), "source term");
    require_dim(param_ip_.dim(), grid_.n(), "parameter inner product");
    require_dim(data_ip_.dim(), grid_.n(), "data inner product");
    require_dim(constraint_.dim(), grid_.n(), "constraint set");
  }

  const pde1d::Grid1D& grid() const { return grid_; }
  const Vector& source() const { return f_; }
  Index param_dim() const { return grid_.n(); }
  Index data_dim() const { return grid_.n(); }
  const InnerProduct& param_ip() const { return param_ip_; }
  const InnerProduct& data_ip() const { return data_ip_; }
  const ConstraintSet& default_constraint() const { return constraint_; }

  class Lin {
   public:
    Lin(const EllipticProblem* p, Vector u)
        : p_(p), u_(std::move(u)), factor_(pde1d::assemble_operator(p->grid_, u_, Kind)) {
      y_ = factor_.solve(p_->f_);
    }
    const Vector& value() const { return y_; }
    const Vector& state() const { return y_; }
    const Vector& parameter() const { return u_; }
    const TridiagonalFactor& factor() const { return factor_; }

    /// K'(u) du = -A(u)^{-1} e_u du
    Vector apply(const Vector& du) const {
      require_dim(du.size(), u_.size(), "deriv_apply");
      return -factor_.solve(p_->eu_apply(y_, du));
    }
    /// K'(u)^* v = W_X^{-1} e_u^T rho,  rho = -A(u)^{-T} W_H v
    Vector adjoint(const Vector& v) const {
      require_dim(v.size(), y_.size(), "adjoint_apply");
      return p_->param_ip_.solve(p_->eu_transpose(y_, adjoint_state(v)));
    }
    /// rho = -A(u)^{-T} W_H v
    Vector adjoint_state(const Vector& v) const {
      return -factor_.solve_transposed(p_->data_ip_.apply(v));
    }

   private:
    const EllipticProblem* p_;
    Vector u_;
    TridiagonalFactor factor_;
    Vector y_;
  };

  Lin linearize(const Vector& u) const {
    require_dim(u.size(), param_dim(), "linearize");
    return Lin(this, u);
  }
  Vector evaluate(const Vector& u) const { return linearize(u).value(); }
  Vector state(const Vector& u) const { return evaluate(u); }
  Vector deriv_apply(const Vector& u, const Vector& du) const { return linearize(u).apply(du); }
  Vector adjoint_apply(const Vector& u, const Vector& v) const { return linearize(u).adjoint(v); }

  /// Discrete e_u(u, y) du (independent of u: the state equation is bilinear).
  Vector eu_apply(const Vector& y, const Vector& du) const {
    if constexpr (Kind == pde1d::OperatorKind::potential) {
      return y.cwiseProduct(du);
    } else {
      const double ih2 = 1.0 / (grid_.h() * grid_.h());
      const Vector dy = pde1d::forward_differences(y);
      return ih2 * pde1d::forward_differences_transpose(dy.cwiseProduct(pde1d::midpoint_average(du)));
    }
  }

  /// Discrete e_u(u, y)^T rho, a functional on parameter vectors (Euclidean pairing).
  Vector eu_transpose(const Vector& y, const Vector& rho) const {
    if constexpr (Kind == pde1d::OperatorKind::potential) {
      return y.cwiseProduct(rho);
    } else {
      const double ih2 = 1.0 / (grid_.h() * grid_.h());
      const Vector dy = pde1d::forward_differences(y);
      return ih2 * pde1d::midpoint_average_transpose(dy.cwiseProduct(pde1d::forward_differences(rho)));
    }
  }

  /// Riesz representer in X of e_u(u, y(u))^* rho.
  Vector eu_adjoint(const Vector& u, const Vector& rho) const {
    return param_ip_.solve(eu_transpose(state(u), rho));
  }

  /// A(u) z
  Vector state_operator_apply(const Vector& u, const Vector& z) const {
    return pde1d::assemble_operator(grid_, u, Kind).multiply(z);
  }

  /// (e_u(u,y(u)) - e_u(u_ref,y(u_ref))) / e_u(u_ref,y(u_ref)) = (y(u) - y(u_ref)) / y(u_ref),
  /// defined because e_u acts pointwise for the potential problem only.
  Vector local_eu_ratio(const Vector& u, const Vector& u_ref) const
    requires(Kind == pde1d::OperatorKind::potential)
  {
    const Vector y = state(u);
    const Vector y_ref = state(u_ref);
    Vector ratio(y.size());
    for (Index k = 0; k < y.size(); ++k) {
      if (y_ref(k) == 0.0)
        throw std::domain_error("local_eu_ratio: e_u vanishes at node " + std::to_string(k));
      ratio(k) = (y(k) - y_ref(k)) / y_ref(k);
    }
    return ratio;
  }

 private:
  pde1d::Grid1D grid_;
  Vector f_;
  InnerProduct param_ip_;
  InnerProduct data_ip_;
  ConstraintSet constraint_;
};

using Potential1D = EllipticProblem<pde1d::OperatorKind::potential>;
using Conductivity1D = EllipticProblem<pde1d::OperatorKind::conductivity>;

/// Potential identification: X = H = L^2 (trapezoid mass), C = {u >= 0}.
inline Potential1D make_potential(Index n, Vector f = {}) {
  pde1d::Grid1D grid(n);
  if (f.size() == 0) f = Vector::Constant(n, 2.0);
  const auto w = pde1d::discrete_h1_norms(grid);
  return Potential1D(grid, std::move(f), w.mass, w.mass, ConstraintSet::lower_bound(n, 0.0));
}

/// Conductivity identification: X = H^1, H = H^1_0 seminorm, C = {c0 <= u <= c1}.
inline Conductivity1D make_conductivity(Index n, Vector f = {}, double c0 = 0.1, double c1 = 10.0) {
  if (!(c0 > 0.0) || !(c1 >= c0)) throw std::invalid_argument("conductivity box needs 0 < c0 <= c1");
  pde1d::Grid1D grid(n);
  if (f.size() == 0) f = Vector::Constant(n, 2.0);
  const auto w = pde1d::discrete_h1_norms(grid);
  return Conductivity1D(grid, std::move(f), pde1d::parameter_h1_weight(grid), w.stiffness,
                        ConstraintSet::box(n, c0, c1));
}

/// Scalar problems use the same vocabulary as the PDE ones.
inline ScalarQuadratic make_scalar(double eps_scale) { return ScalarQuadratic(eps_scale); }

template <class P>
concept HasLocalEu = requires(const P& p, const Vector& u) {
  { p.local_eu_ratio(u, u) } -> std::convertible_to<Vector>;
};

template <class P>
concept HasStateEquation = requires(const P& p, const Vector& u) {
  { p.eu_adjoint(u, u) } -> std::convertible_to<Vector>;
  { p.state_operator_apply(u, u) } -> std::convertible_to<Vector>;
  { p.linearize(u).adjoint_state(u) } -> std::convertible_to<Vector>;
};

}  // namespace tikhonov
