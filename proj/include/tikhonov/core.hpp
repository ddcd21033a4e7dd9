#pragma once

#include <cmath>
#include <concepts>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "tikhonov/tridiagonal.hpp"

namespace tikhonov {

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A point outside the constraint set was passed where feasibility is required.
class InfeasiblePoint : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline void require_dim(Index got, Index want, const char* what) {
  if (got != want)
    throw DimensionMismatch(std::string(what) + ": expected dimension " + std::to_string(want) +
                            ", got " + std::to_string(got));
}

// ---------------------------------------------------------------------------
// Inner products
// ---------------------------------------------------------------------------

/// <a,b>_W = a^T W b for a symmetric positive-definite weight W. The weight is
/// held in the cheapest exact form: diagonal, symmetric tridiagonal, or dense.
class InnerProduct {
 public:
  static InnerProduct identity(Index n) { return diagonal(Vector::Ones(n)); }

  static InnerProduct diagonal(Vector w) {
    if (w.size() > 0 && !(w.minCoeff() > 0.0))
      throw std::invalid_argument("diagonal inner-product weight must be positive");
    InnerProduct ip;
    ip.dim_ = w.size();
    ip.weight_ = Diagonal{std::move(w)};
    return ip;
  }

  static InnerProduct tridiagonal(const Vector& diag, const Vector& off) {
    auto sys = TridiagonalSystem::symmetric_from(diag, off);
    TridiagonalFactor factor;
    try {
      factor = TridiagonalFactor(sys);
    } catch (const ZeroPivot&) {
      throw std::invalid_argument("tridiagonal inner-product weight is not positive definite");
    }
    if (!factor.positive_pivots())
      throw std::invalid_argument("tridiagonal inner-product weight is not positive definite");
    InnerProduct ip;
    ip.dim_ = diag.size();
    ip.weight_ = Banded{std::move(sys), std::move(factor)};
    return ip;
  }

  static InnerProduct dense(Matrix w) {
    if (w.rows() != w.cols()) throw std::invalid_argument("dense weight must be square");
    if (!w.isApprox(w.transpose(), 1e-14))
      throw std::invalid_argument("dense inner-product weight must be symmetric");
    Eigen::LLT<Matrix> llt(w);
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument("dense inner-product weight is not positive definite");
    InnerProduct ip;
    ip.dim_ = w.rows();
    ip.weight_ = Dense{std::move(w), std::move(llt)};
    return ip;
  }

  Index dim() const { return dim_; }
  bool is_diagonal() const { return std::holds_alternative<Diagonal>(weight_); }

  /// W v
  Vector apply(const Vector& v) const {
    require_dim(v.size(), dim_, "inner product");
    return std::visit(
        [&](const auto& w) -> Vector {
          using T = std::decay_t<decltype(w)>;
          if constexpr (std::is_same_v<T, Diagonal>) return w.d.cwiseProduct(v);
          else if constexpr (std::is_same_v<T, Banded>) return w.sys.multiply(v);
          else return w.w * v;
        },
        weight_);
  }

  /// W^{-1} v, i.e. the Riesz representer of the functional v^T(.)
  Vector solve(const Vector& v) const {
    require_dim(v.size(), dim_, "inner product");
    return std::visit(
        [&](const auto& w) -> Vector {
          using T = std::decay_t<decltype(w)>;
          if constexpr (std::is_same_v<T, Diagonal>) return v.cwiseQuotient(w.d);
          else if constexpr (std::is_same_v<T, Banded>) return w.factor.solve(v);
          else return w.llt.solve(v);
        },
        weight_);
  }

  double dot(const Vector& a, const Vector& b) const {
    require_dim(b.size(), dim_, "inner product");
    return a.dot(apply(b));
  }
  double squared_norm(const Vector& a) const { return dot(a, a); }
  double norm(const Vector& a) const { return std::sqrt(std::max(0.0, squared_norm(a))); }

  Matrix matrix() const {
    return std::visit(
        [&](const auto& w) -> Matrix {
          using T = std::decay_t<decltype(w)>;
          if constexpr (std::is_same_v<T, Diagonal>) return w.d.asDiagonal();
          else if constexpr (std::is_same_v<T, Banded>) return w.sys.dense();
          else return w.w;
        },
        weight_);
  }

 private:
  struct Diagonal {
    Vector d;
  };
  struct Banded {
    TridiagonalSystem sys;
    TridiagonalFactor factor;
  };
  struct Dense {
    Matrix w;
    Eigen::LLT<Matrix> llt;
  };

  Index dim_ = 0;
  std::variant<Diagonal, Banded, Dense> weight_;
};

// ---------------------------------------------------------------------------
// Box constraints
// ---------------------------------------------------------------------------

/// Sign restriction a constraint multiplier must obey at a feasible point.
enum class MultiplierSign {
  Zero,         // inactive component
  NonNegative,  // active lower bound
  NonPositive,  // active upper bound
  Free          // lower == upper, component fixed
};

inline const char* to_string(MultiplierSign s) {
  switch (s) {
    case MultiplierSign::Zero: return "zero";
    case MultiplierSign::NonNegative: return ">=0";
    case MultiplierSign::NonPositive: return "<=0";
    case MultiplierSign::Free: return "free";
  }
  return "?";
}

/// Clamp m onto the cone described by the sign pattern.
inline Vector clamp_to_pattern(const Vector& m, const std::vector<MultiplierSign>& pattern) {
  Vector out(m.size());
  for (Index i = 0; i < m.size(); ++i) {
    switch (pattern[static_cast<std::size_t>(i)]) {
      case MultiplierSign::Zero: out(i) = 0.0; break;
      case MultiplierSign::NonNegative: out(i) = std::max(0.0, m(i)); break;
      case MultiplierSign::NonPositive: out(i) = std::min(0.0, m(i)); break;
      case MultiplierSign::Free: out(i) = m(i); break;
    }
  }
  return out;
}

class ConstraintSet {
 public:
  ConstraintSet() = default;

  ConstraintSet(Vector lower, Vector upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
    require_dim(upper_.size(), lower_.size(), "constraint bounds");
    for (Index i = 0; i < lower_.size(); ++i) {
      if (std::isnan(lower_(i)) || std::isnan(upper_(i)) || lower_(i) > upper_(i))
        throw std::invalid_argument("constraint requires lower <= upper componentwise (index " +
                                    std::to_string(i) + ")");
    }
  }

  static ConstraintSet unconstrained(Index n) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return {Vector::Constant(n, -inf), Vector::Constant(n, inf)};
  }

  static ConstraintSet box(Index n, double lower, double upper) {
    return {Vector::Constant(n, lower), Vector::Constant(n, upper)};
  }

  static ConstraintSet lower_bound(Index n, double lower) {
    return box(n, lower, std::numeric_limits<double>::infinity());
  }

  Index dim() const { return lower_.size(); }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }

  Vector project(const Vector& u) const {
    require_dim(u.size(), dim(), "project");
    return u.cwiseMax(lower_).cwiseMin(upper_);
  }

  bool contains(const Vector& u) const {
    require_dim(u.size(), dim(), "constraint membership");
    for (Index i = 0; i < u.size(); ++i)
      if (!(u(i) >= lower_(i) && u(i) <= upper_(i))) return false;
    return true;
  }

  void require_feasible(const Vector& u, const char* what) const {
    if (!contains(u)) throw InfeasiblePoint(std::string(what) + ": point violates the constraint set");
  }

  /// Componentwise sign restriction on mu such that <mu, v - u> >= 0 for all feasible v.
  std::vector<MultiplierSign> multiplier_sign_pattern(const Vector& u) const {
    require_feasible(u, "multiplier_sign_pattern");
    std::vector<MultiplierSign> pattern(static_cast<std::size_t>(u.size()));
    for (Index i = 0; i < u.size(); ++i) {
      const bool at_lower = u(i) == lower_(i);
      const bool at_upper = u(i) == upper_(i);
      MultiplierSign s = MultiplierSign::Zero;
      if (at_lower && at_upper) s = MultiplierSign::Free;
      else if (at_lower) s = MultiplierSign::NonNegative;
      else if (at_upper) s = MultiplierSign::NonPositive;
      pattern[static_cast<std::size_t>(i)] = s;
    }
    return pattern;
  }

 private:
  Vector lower_;
  Vector upper_;
};

// ---------------------------------------------------------------------------
// Forward problem contract
// ---------------------------------------------------------------------------

/// K and its derivative frozen at one parameter u. adjoint() returns the
/// Riesz representer in X, i.e. W_X^{-1} K'(u)^T W_H v.
template <class L>
concept Linearization = requires(const L& lin, const Vector& v) {
  { lin.value() } -> std::convertible_to<const Vector&>;
  { lin.apply(v) } -> std::convertible_to<Vector>;
  { lin.adjoint(v) } -> std::convertible_to<Vector>;
};

template <class P>
concept ForwardProblem = requires(const P& p, const Vector& u, const Vector& v) {
  { p.param_dim() } -> std::convertible_to<Index>;
  { p.data_dim() } -> std::convertible_to<Index>;
  { p.param_ip() } -> std::convertible_to<const InnerProduct&>;
  { p.data_ip() } -> std::convertible_to<const InnerProduct&>;
  { p.evaluate(u) } -> std::convertible_to<Vector>;
  { p.deriv_apply(u, v) } -> std::convertible_to<Vector>;
  { p.adjoint_apply(u, v) } -> std::convertible_to<Vector>;
  { p.linearize(u) } -> Linearization;
};

/// Dense Jacobian of a linearization (data_dim x param_dim), one derivative
/// action per column.
template <Linearization L>
Matrix jacobian(const L& lin, Index param_dim) {
  const Index m = lin.value().size();
  Matrix jac(m, param_dim);
  Vector e = Vector::Zero(param_dim);
  for (Index j = 0; j < param_dim; ++j) {
    e(j) = 1.0;
    jac.col(j) = lin.apply(e);
    e(j) = 0.0;
  }
  return jac;
}

// ---------------------------------------------------------------------------
// Tikhonov functional
// ---------------------------------------------------------------------------

struct TikhonovResult {
  Vector u;
  double eta = 0.0;
  double residual_norm = 0.0;  // ||K(u) - g||_H
  double penalty = 0.0;        // 1/2 ||u||_X^2
  double value = 0.0;          // 1/2 residual^2 + eta * penalty
  int iterations = 0;
  bool converged = false;

  double stationarity = 0.0;  // ||u - P(u - grad J)||_X at exit
  int backtracks = 0;
  bool line_search_failed = false;
  std::string status;
};

inline double assemble_value(double residual_norm, double eta, double penalty) {
  return 0.5 * residual_norm * residual_norm + eta * penalty;
}

template <ForwardProblem P>
double tikhonov_value(const P& p, const ConstraintSet& c, double eta, const Vector& g,
                      const Vector& u) {
  if (!(eta > 0.0)) throw std::invalid_argument("tikhonov_value: eta must be positive");
  require_dim(u.size(), p.param_dim(), "tikhonov_value");
  require_dim(g.size(), p.data_dim(), "tikhonov_value");
  c.require_feasible(u, "tikhonov_value");
  const Vector r = p.evaluate(u) - g;
  return 0.5 * p.data_ip().squared_norm(r) + 0.5 * eta * p.param_ip().squared_norm(u);
}

/// Fill residual/penalty/value of a result from its u.
template <ForwardProblem P>
void finalize_result(const P& p, const Vector& g, TikhonovResult& res) {
  const Vector r = p.evaluate(res.u) - g;
  res.residual_norm = p.data_ip().norm(r);
  res.penalty = 0.5 * p.param_ip().squared_norm(res.u);
  res.value = assemble_value(res.residual_norm, res.eta, res.penalty);
}

}  // namespace tikhonov
