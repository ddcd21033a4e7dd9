#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace tikhonov {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Thrown when an elimination pivot vanishes (singular or indefinite system).
class ZeroPivot : public std::runtime_error {
 public:
  ZeroPivot(Index row, double pivot)
      : std::runtime_error("tridiagonal elimination hit a zero pivot at row " +
                           std::to_string(row)),
        row_(row),
        pivot_(pivot) {}
  Index row() const noexcept { return row_; }
  double pivot() const noexcept { return pivot_; }

 private:
  Index row_;
  double pivot_;
};

/// Banded n x n matrix. sub[i] couples row i to column i-1 (sub[0] unused),
/// super[i] couples row i to column i+1 (super[n-1] unused).
struct TridiagonalSystem {
  Vector sub;
  Vector diag;
  Vector super;
  bool symmetric = false;

  TridiagonalSystem() = default;
  TridiagonalSystem(Vector sub_, Vector diag_, Vector super_, bool symmetric_ = false)
      : sub(std::move(sub_)), diag(std::move(diag_)), super(std::move(super_)),
        symmetric(symmetric_) {
    if (sub.size() != diag.size() || super.size() != diag.size())
      throw std::invalid_argument("tridiagonal bands must have equal length");
  }

  /// Symmetric system from its diagonal and the n-1 off-diagonal entries.
  static TridiagonalSystem symmetric_from(const Vector& diag, const Vector& off) {
    const Index n = diag.size();
    if (off.size() != std::max<Index>(n - 1, 0))
      throw std::invalid_argument("off-diagonal must have length n-1");
    Vector sub = Vector::Zero(n), sup = Vector::Zero(n);
    for (Index i = 0; i + 1 < n; ++i) {
      sup(i) = off(i);
      sub(i + 1) = off(i);
    }
    return {std::move(sub), diag, std::move(sup), true};
  }

  Index size() const { return diag.size(); }

  Vector multiply(const Vector& x) const {
    const Index n = size();
    if (x.size() != n) throw std::invalid_argument("tridiagonal multiply: dimension mismatch");
    Vector y(n);
    for (Index i = 0; i < n; ++i) {
      double s = diag(i) * x(i);
      if (i > 0) s += sub(i) * x(i - 1);
      if (i + 1 < n) s += super(i) * x(i + 1);
      y(i) = s;
    }
    return y;
  }

  Matrix dense() const {
    const Index n = size();
    Matrix a = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
      a(i, i) = diag(i);
      if (i > 0) a(i, i - 1) = sub(i);
      if (i + 1 < n) a(i, i + 1) = super(i);
    }
    return a;
  }

  TridiagonalSystem transposed() const {
    const Index n = size();
    Vector s = Vector::Zero(n), u = Vector::Zero(n);
    for (Index i = 0; i + 1 < n; ++i) {
      u(i) = sub(i + 1);
      s(i + 1) = super(i);
    }
    return {std::move(s), diag, std::move(u), symmetric};
  }
};

/// LU factors of a tridiagonal matrix without pivoting (Thomas algorithm),
/// kept so repeated solves against one operator cost O(n).
class TridiagonalFactor {
 public:
  TridiagonalFactor() = default;

  explicit TridiagonalFactor(const TridiagonalSystem& sys) : sys_(sys) {
    const Index n = sys.size();
    pivot_.resize(n);
    mult_.resize(n);
    if (n == 0) return;
    double scale = sys.diag.cwiseAbs().maxCoeff();
    if (!(scale > 0)) scale = 1.0;
    const double tiny = 1e-14 * scale;
    for (Index i = 0; i < n; ++i) {
      double p = sys.diag(i);
      if (i > 0) {
        mult_(i) = sys.sub(i) / pivot_(i - 1);
        p -= mult_(i) * sys.super(i - 1);
      } else {
        mult_(i) = 0.0;
      }
      if (!std::isfinite(p) || std::abs(p) <= tiny) throw ZeroPivot(i, p);
      pivot_(i) = p;
    }
  }

  Index size() const { return pivot_.size(); }
  const Vector& pivots() const { return pivot_; }

  /// All pivots positive; for a symmetric system this certifies positive definiteness.
  bool positive_pivots() const { return size() == 0 || pivot_.minCoeff() > 0.0; }

  Vector solve(const Vector& rhs) const {
    const Index n = size();
    if (rhs.size() != n) throw std::invalid_argument("tridiagonal solve: rhs length mismatch");
    Vector x(n);
    if (n == 0) return x;
    x(0) = rhs(0);
    for (Index i = 1; i < n; ++i) x(i) = rhs(i) - mult_(i) * x(i - 1);
    x(n - 1) /= pivot_(n - 1);
    for (Index i = n - 2; i >= 0; --i) x(i) = (x(i) - sys_.super(i) * x(i + 1)) / pivot_(i);
    return x;
  }

  /// Solves A^T x = rhs with the same factors.
  Vector solve_transposed(const Vector& rhs) const {
    if (sys_.symmetric) return solve(rhs);
    return TridiagonalFactor(sys_.transposed()).solve(rhs);
  }

  const TridiagonalSystem& system() const { return sys_; }

 private:
  TridiagonalSystem sys_;
  Vector pivot_;
  Vector mult_;
};

inline Vector solve_tridiagonal(const TridiagonalSystem& sys, const Vector& rhs) {
  return TridiagonalFactor(sys).solve(rhs);
}

}  // namespace tikhonov
