#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "tikhonov/core.hpp"
#include "tikhonov/tridiagonal.hpp"

namespace tikhonov::pde1d {

/// Raised when a coefficient would destroy ellipticity of the assembled operator.
class EllipticityError : public std::domain_error {
 public:
  EllipticityError(const std::string& what, Index node)
      : std::domain_error(what + " (node " + std::to_string(node) + ")"), node_(node) {}
  Index node() const noexcept { return node_; }

 private:
  Index node_;
};

/// Uniform grid on (0,1) with n interior nodes x_i = i*h, i = 1..n, and
/// homogeneous Dirichlet data at x = 0 and x = 1.
class Grid1D {
 public:
  explicit Grid1D(Index n) : n_(n) {
    if (n < 3) throw std::invalid_argument("Grid1D needs at least 3 interior nodes");
  }

  Index n() const { return n_; }
  double h() const { return 1.0 / static_cast<double>(n_ + 1); }
  /// Coordinate of interior node k (0-based, k = 0..n-1).
  double x(Index k) const { return static_cast<double>(k + 1) * h(); }

  Vector nodes() const {
    Vector xs(n_);
    for (Index k = 0; k < n_; ++k) xs(k) = x(k);
    return xs;
  }

  template <class F>
  Vector sample(F&& fn) const {
    Vector v(n_);
    for (Index k = 0; k < n_; ++k) v(k) = fn(x(k));
    return v;
  }

 private:
  Index n_;
};

enum class OperatorKind { potential, conductivity };

/// Forward differences (y_{j+1} - y_j), j = 0..n, with y_0 = y_{n+1} = 0.
/// Length n+1.
inline Vector forward_differences(const Vector& y) {
  const Index n = y.size();
  Vector d(n + 1);
  d(0) = y(0);
  for (Index j = 1; j < n; ++j) d(j) = y(j) - y(j - 1);
  d(n) = -y(n - 1);
  return d;
}

/// Transpose of forward_differences: maps n+1 cell values to n nodes.
inline Vector forward_differences_transpose(const Vector& d) {
  const Index n = d.size() - 1;
  Vector y(n);
  for (Index k = 0; k < n; ++k) y(k) = d(k) - d(k + 1);
  return y;
}

/// Cell (midpoint) coefficients a_{j+1/2}, j = 0..n. Interior cells use the
/// arithmetic mean of the adjacent nodes; the two boundary cells copy the
/// nearest interior node (zero-gradient ghost value).
inline Vector midpoint_average(const Vector& u) {
  const Index n = u.size();
  Vector a(n + 1);
  a(0) = u(0);
  for (Index j = 1; j < n; ++j) a(j) = 0.5 * (u(j - 1) + u(j));
  a(n) = u(n - 1);
  return a;
}

/// Transpose of midpoint_average.
inline Vector midpoint_average_transpose(const Vector& a) {
  const Index n = a.size() - 1;
  Vector u = Vector::Zero(n);
  u(0) += a(0);
  for (Index j = 1; j < n; ++j) {
    u(j - 1) += 0.5 * a(j);
    u(j) += 0.5 * a(j);
  }
  u(n - 1) += a(n);
  return u;
}

/// Laplacian stencil (-1, 2, -1)/h^2 plus an optional diagonal shift.
inline TridiagonalSystem laplacian(const Grid1D& grid) {
  const Index n = grid.n();
  const double ih2 = 1.0 / (grid.h() * grid.h());
  return TridiagonalSystem::symmetric_from(Vector::Constant(n, 2.0 * ih2),
                                           Vector::Constant(n - 1, -ih2));
}

/// A(u) for -y'' + u y (potential) or -(u y')' (conductivity), Dirichlet
/// boundary conditions built in. The result is symmetric positive definite
/// whenever the preconditions hold.
inline TridiagonalSystem assemble_operator(const Grid1D& grid, const Vector& u, OperatorKind kind) {
  const Index n = grid.n();
  require_dim(u.size(), n, "assemble_operator");
  const double ih2 = 1.0 / (grid.h() * grid.h());

  if (kind == OperatorKind::potential) {
    for (Index k = 0; k < n; ++k)
      if (!(u(k) >= 0.0)) throw EllipticityError("potential must be nonnegative", k);
    auto sys = laplacian(grid);
    sys.diag += u;
    return sys;
  }

  for (Index k = 0; k < n; ++k)
    if (!(u(k) > 0.0)) throw EllipticityError("conductivity must be positive", k);
  const Vector a = midpoint_average(u);
  for (Index j = 0; j <= n; ++j)
    if (!(a(j) > 0.0)) throw EllipticityError("midpoint conductivity must be positive", j);

  Vector diag(n), off(n - 1);
  for (Index k = 0; k < n; ++k) diag(k) = (a(k) + a(k + 1)) * ih2;
  for (Index k = 0; k + 1 < n; ++k) off(k) = -a(k + 1) * ih2;
  return TridiagonalSystem::symmetric_from(diag, off);
}

/// Discrete inner-product weights on interior nodes.
struct H1Weights {
  InnerProduct stiffness;  // sum_j (v_{j+1}-v_j)^2 / h with zero boundary values, ~ int |v'|^2
  InnerProduct mass;       // trapezoid rule, ~ int v^2
};

inline H1Weights discrete_h1_norms(const Grid1D& grid) {
  const Index n = grid.n();
  const double h = grid.h();
  return {InnerProduct::tridiagonal(Vector::Constant(n, 2.0 / h), Vector::Constant(n - 1, -1.0 / h)),
          InnerProduct::diagonal(Vector::Constant(n, h))};
}

/// Full H^1 weight (mass + stiffness) for a parameter living on the interior
/// nodes. The stiffness part carries no boundary terms (natural/Neumann
/// closure), so constants have zero seminorm.
inline InnerProduct parameter_h1_weight(const Grid1D& grid) {
  const Index n = grid.n();
  const double h = grid.h();
  Vector diag = Vector::Constant(n, h + 2.0 / h);
  diag(0) = h + 1.0 / h;
  diag(n - 1) = h + 1.0 / h;
  return InnerProduct::tridiagonal(diag, Vector::Constant(n - 1, -1.0 / h));
}

}  // namespace tikhonov::pde1d
