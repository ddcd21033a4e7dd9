#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "tikhonov/core.hpp"
#include "tikhonov/problems.hpp"

namespace tikhonov {

// Multipliers are elements of X*: they are stored as functional (dual)
// coefficient vectors m and paired with parameter vectors by m^T v. For the
// diagonal weights of the scalar and potential problems the sign of m equals
// the sign of its Riesz representer W_X^{-1} m.

// ---------------------------------------------------------------------------
// Second-order error and the nonlinearity term
// ---------------------------------------------------------------------------

/// E(u, u_ref) = K(u) - K(u_ref) - K'(u_ref)(u - u_ref)
template <ForwardProblem P>
Vector second_order_error(const P& p, const Vector& u, const Vector& u_ref) {
  require_dim(u.size(), p.param_dim(), "second_order_error");
  require_dim(u_ref.size(), p.param_dim(), "second_order_error");
  const auto lin = p.linearize(u_ref);
  return p.evaluate(u) - lin.value() - lin.apply(u - u_ref);
}

template <ForwardProblem P>
Vector second_order_error(const P& p, const ConstraintSet& c, const Vector& u, const Vector& u_ref) {
  c.require_feasible(u, "second_order_error");
  c.require_feasible(u_ref, "second_order_error");
  return second_order_error(p, u, u_ref);
}

/// <w, E(u, u_ref)>_H
template <ForwardProblem P>
double nonlinearity_term_direct(const P& p, const Vector& w, const Vector& u, const Vector& u_ref) {
  require_dim(w.size(), p.data_dim(), "nonlinearity_term_direct");
  return p.data_ip().dot(w, second_order_error(p, u, u_ref));
}

/// w-free form of <w, E(u, u_ref)> for problems whose e_u acts pointwise:
///   <u_ref - mu, ratio .* (u - u_ref)>_X,
/// ratio = (e_u(u, y(u)) - e_u(u_ref, y(u_ref))) / e_u(u_ref, y(u_ref)).
/// mu is the dual multiplier from the source condition.
template <ForwardProblem P>
  requires HasLocalEu<P>
double nonlinearity_term_bilinear(const P& p, const Vector& u, const Vector& u_ref, const Vector& mu) {
  require_dim(mu.size(), p.param_dim(), "nonlinearity_term_bilinear");
  const Vector ratio = p.local_eu_ratio(u, u_ref);
  return (p.param_ip().apply(u_ref) - mu).dot(ratio.cwiseProduct(u - u_ref));
}

/// <w, E(u, u_ref)> written through the state-space representer
/// rho = -A(u_ref)^{-T} W_H w:  rho^T e_u(u - u_ref) (y(u) - y(u_ref)).
template <ForwardProblem P>
  requires HasStateEquation<P>
double nonlinearity_term_state(const P& p, const Vector& rho, const Vector& u, const Vector& u_ref) {
  require_dim(rho.size(), p.data_dim(), "nonlinearity_term_state");
  const Vector y = p.state(u);
  const Vector y_ref = p.state(u_ref);
  return rho.dot(p.eu_apply(y - y_ref, u - u_ref));
}

/// Adjoint state of a data-space representer: rho = -A(u)^{-T} W_H w.
template <ForwardProblem P>
  requires HasStateEquation<P>
Vector representer_to_state(const P& p, const Vector& u, const Vector& w) {
  return p.linearize(u).adjoint_state(w);
}

// ---------------------------------------------------------------------------
// Source-condition fits
// ---------------------------------------------------------------------------

enum class SourceKind { scon, nscon };

struct SourceFit {
  SourceKind kind = SourceKind::scon;
  Vector representer;  // w in the data space (scon) or rho in the state space (nscon)
  Vector multiplier;   // dual multiplier obeying the sign pattern at u_exact
  double relative_residual = 0.0;  // ||B rep + mu - u||_X / ||u||_X
  double fit_regularization = 0.0;
  int sweeps = 0;
  /// Pointwise (dual form) residual G rep + mu - W_X u, one entry per node.
  Vector pointwise_residual;
  /// W_X u, the dual form of the exact solution.
  Vector target;
  /// Node with the largest pointwise residual and that residual relative to max|target|.
  Index peak_node = -1;
  double peak_relative_residual = 0.0;

  /// Relative residual restricted to the nodes with keep[k] == true, measured
  /// in the Euclidean norm of the dual residual.
  double masked_relative_residual(const std::vector<bool>& keep) const {
    require_dim(static_cast<Index>(keep.size()), pointwise_residual.size(), "masked residual");
    double num = 0.0, den = 0.0;
    for (Index k = 0; k < pointwise_residual.size(); ++k) {
      if (!keep[static_cast<std::size_t>(k)]) continue;
      num += pointwise_residual(k) * pointwise_residual(k);
      den += target(k) * target(k);
    }
    if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::sqrt(num / den);
  }
};

namespace detail {

/// Largest eigenvalue of R^{-1} G^T W^{-1} G by power iteration.
inline double normal_operator_norm(const Matrix& g, const Eigen::LLT<Matrix>& wx, const Eigen::LLT<Matrix>& r) {
  const Index m = g.cols();
  if (m == 0 || g.isZero(0.0)) return 0.0;
  Vector v = Vector::Ones(m) / std::sqrt(static_cast<double>(m));
  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    Vector next = r.solve(g.transpose() * wx.solve(g * v));
    const double norm = next.norm();
    if (norm == 0.0) return 0.0;
    next /= norm;
    const double prev = lambda;
    lambda = norm;
    v = next;
    if (std::abs(lambda - prev) <= 1e-10 * lambda) break;
  }
  return lambda;
}

/// Sign-constrained ridge least squares
///   min_{rep, m in cone} (G rep + m - W_X u)^T W_X^{-1} (G rep + m - W_X u) + ridge rep^T R rep
/// by alternating exact minimization: the multiplier step first (from rep = 0),
/// then the representer step.
inline SourceFit fit_source(SourceKind kind, const Matrix& g, const Matrix& wx, const Matrix& r,
                            const Vector& u, const std::vector<MultiplierSign>& pattern,
                            std::optional<double> ridge) {
  const Index n = g.rows(), m = g.cols();
  Eigen::LLT<Matrix> wx_llt(wx), r_llt(r);
  const Matrix wx_inv = wx_llt.solve(Matrix::Identity(n, n));

  SourceFit fit;
  fit.kind = kind;
  fit.target = wx * u;
  fit.fit_regularization = ridge ? *ridge : 1e-10 * normal_operator_norm(g, wx_llt, r_llt);
  if (ridge && !(*ridge > 0.0)) throw std::invalid_argument("source fit ridge must be positive");
  if (!(fit.fit_regularization > 0.0)) fit.fit_regularization = std::numeric_limits<double>::min();

  // Stacked least squares [L^{-1} G; sqrt(ridge) L_R^T] rep = [L^{-1} s; 0].
  const Matrix lx_inv_g = wx_llt.matrixL().solve(g);
  Matrix stacked(n + m, m);
  stacked.topRows(n) = lx_inv_g;
  stacked.bottomRows(m) = std::sqrt(fit.fit_regularization) * Matrix(r_llt.matrixU());
  const Eigen::ColPivHouseholderQR<Matrix> qr(stacked);

  const bool any_active = std::any_of(pattern.begin(), pattern.end(),
                                      [](MultiplierSign s) { return s != MultiplierSign::Zero; });
  Vector rep = Vector::Zero(m);
  Vector mu = Vector::Zero(n);
  auto objective = [&] {
    const Vector d = g * rep + mu - fit.target;
    return d.dot(wx_inv * d) + fit.fit_regularization * rep.dot(r * rep);
  };

  double prev = std::numeric_limits<double>::infinity();
  int sweep = 0;
  for (; sweep < 100; ++sweep) {
    if (any_active) {
      // Projected coordinate descent in the W_X^{-1} metric.
      const Vector t = fit.target - g * rep;
      for (int inner = 0; inner < 500; ++inner) {
        double change = 0.0;
        for (Index i = 0; i < n; ++i) {
          const double grad = wx_inv.row(i).dot(mu - t);
          Vector trial = mu;
          trial(i) -= grad / wx_inv(i, i);
          const double next = clamp_to_pattern(trial, pattern)(i);
          change = std::max(change, std::abs(next - mu(i)));
          mu(i) = next;
        }
        if (change <= 1e-15 * std::max(1.0, t.cwiseAbs().maxCoeff())) break;
      }
    }
    Vector rhs = Vector::Zero(n + m);
    rhs.head(n) = wx_llt.matrixL().solve(fit.target - mu);
    rep = qr.solve(rhs);

    const double value = objective();
    if (!any_active || prev - value <= 1e-10 * std::max(prev, std::numeric_limits<double>::min())) {
      ++sweep;
      break;
    }
    prev = value;
  }
  fit.sweeps = sweep;
  fit.representer = rep;
  fit.multiplier = mu;
  fit.pointwise_residual = g * rep + mu - fit.target;
  const double res = std::sqrt(std::max(0.0, fit.pointwise_residual.dot(wx_inv * fit.pointwise_residual)));
  const double scale = std::sqrt(std::max(0.0, u.dot(fit.target)));
  fit.relative_residual = scale > 0.0 ? res / scale : res;
  if (n > 0) {
    const double tmax = fit.target.cwiseAbs().maxCoeff();
    const double rmax = fit.pointwise_residual.cwiseAbs().maxCoeff(&fit.peak_node);
    fit.peak_relative_residual = tmax > 0.0 ? rmax / tmax : rmax;
  }
  return fit;
}

}  // namespace detail

/// Fit of K'(u)^* w + mu = u with mu admissible for the constraint set.
template <ForwardProblem P>
SourceFit source_fit_scon(const P& p, const ConstraintSet& c, const Vector& u_exact,
                          std::optional<double> ridge = std::nullopt) {
  require_dim(u_exact.size(), p.param_dim(), "source_fit_scon");
  const auto pattern = c.multiplier_sign_pattern(u_exact);
  const auto lin = p.linearize(u_exact);
  // Dual form of K'(u)^*: J^T W_H.
  const Matrix g = jacobian(lin, p.param_dim()).transpose() * p.data_ip().matrix();
  return detail::fit_source(SourceKind::scon, g, p.param_ip().matrix(), p.data_ip().matrix(), u_exact,
                            pattern, ridge);
}

/// Fit of e_u(u, y(u))^* rho + mu = u with rho in the state space, measured
/// in the data inner product.
template <ForwardProblem P>
  requires HasStateEquation<P>
SourceFit source_fit_nscon(const P& p, const ConstraintSet& c, const Vector& u_exact,
                           std::optional<double> ridge = std::nullopt) {
  require_dim(u_exact.size(), p.param_dim(), "source_fit_nscon");
  const auto pattern = c.multiplier_sign_pattern(u_exact);
  const Vector y = p.state(u_exact);
  const Index m = p.data_dim();
  Matrix g(p.param_dim(), m);
  Vector e = Vector::Zero(m);
  for (Index j = 0; j < m; ++j) {
    e(j) = 1.0;
    g.col(j) = p.eu_transpose(y, e);
    e(j) = 0.0;
  }
  return detail::fit_source(SourceKind::nscon, g, p.param_ip().matrix(), p.data_ip().matrix(), u_exact,
                            pattern, ridge);
}

/// Relative residual ||e_u^* rho + mu - u||_X / ||u||_X for a given state-space
/// representer and dual multiplier.
template <ForwardProblem P>
  requires HasStateEquation<P>
double nscon_relative_residual(const P& p, const Vector& u_exact, const Vector& rho, const Vector& mu) {
  const InnerProduct& wx = p.param_ip();
  const Vector rep = p.eu_adjoint(u_exact, rho) + wx.solve(mu) - u_exact;
  const double scale = wx.norm(u_exact);
  return scale > 0.0 ? wx.norm(rep) / scale : wx.norm(rep);
}

/// Nodes whose adjacent cells carry a state gradient above rel_tol * max|y'|,
/// widened by `halo` nodes on each side of every degenerate cell. Entries are
/// true where the nscon fit is expected to be well conditioned.
template <ForwardProblem P>
  requires HasStateEquation<P>
std::vector<bool> gradient_nondegenerate_nodes(const P& p, const Vector& u, double rel_tol, int halo) {
  const Vector dy = pde1d::forward_differences(p.state(u)).cwiseAbs();
  const Index n = p.param_dim();
  const double cut = rel_tol * dy.maxCoeff();
  std::vector<bool> keep(static_cast<std::size_t>(n), true);
  for (Index j = 0; j <= n; ++j) {
    if (dy(j) > cut) continue;
    // Cell j lies between nodes j-1 and j.
    for (Index k = j - 1 - halo; k <= j + halo; ++k)
      if (k >= 0 && k < n) keep[static_cast<std::size_t>(k)] = false;
  }
  return keep;
}

// ---------------------------------------------------------------------------
// Condition scans
// ---------------------------------------------------------------------------

struct ConditionMargin {
  std::string condition;
  int samples = 0;
  double min_margin = std::numeric_limits<double>::infinity();
  Vector worst_point;
  double worst_radius = 0.0;
  std::pair<double, double> parameters{0.0, 0.0};  // (c_r, eps) or (c_s, eps')
  /// Largest deviation from a closed-form identity checked during the scan
  /// (NaN when the problem has none).
  double identity_max_error = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

/// Seeded trial points u = project(center + r_k d_k), d_k standard normal
/// normalized in X, r_k = radius (k+1)/samples.
template <ForwardProblem P, class F>
void scan(const P& p, const ConstraintSet& c, const Vector& center, int samples, double radius,
          std::uint64_t seed, ConditionMargin& out, F&& margin_at) {
  if (samples < 100) throw std::invalid_argument("condition scans need at least 100 samples");
  if (!(radius > 0.0)) throw std::invalid_argument("scan radius must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Index n = p.param_dim();
  out.samples = samples;
  for (int k = 0; k < samples; ++k) {
    Vector d(n);
    for (Index i = 0; i < n; ++i) d(i) = normal(rng);
    const double dn = p.param_ip().norm(d);
    if (dn == 0.0) continue;
    const double r = radius * (k + 1) / samples;
    const Vector u = c.project(center + (r / dn) * d);
    const double m = margin_at(u);
    if (m < out.min_margin) {
      out.min_margin = m;
      out.worst_point = u;
      out.worst_radius = r;
    }
  }
}

}  // namespace detail

/// Left minus right side of the nonlinearity condition at one trial point:
///   c_r/2 ||K(u)-K(u*)||^2 + 1/2 ||u-u*||^2 - <w,E(u,u*)> + <mu,u-u*> - eps/2 ||u-u*||^2.
template <ForwardProblem P>
double ncon_margin(const P& p, const Vector& u_exact, const Vector& w, const Vector& mu, double c_r,
                   double eps_coercive, const Vector& u) {
  const Vector du = u - u_exact;
  const double dk = p.data_ip().squared_norm(p.evaluate(u) - p.evaluate(u_exact));
  const double dx = p.param_ip().squared_norm(du);
  return 0.5 * c_r * dk + 0.5 * dx - nonlinearity_term_direct(p, w, u, u_exact) + mu.dot(du) -
         0.5 * eps_coercive * dx;
}

template <ForwardProblem P>
ConditionMargin ncon_margin_scan(const P& p, const ConstraintSet& c, const Vector& u_exact, const Vector& w,
                                 const Vector& mu, double c_r, double eps_coercive, int samples,
                                 double radius, std::uint64_t seed) {
  c.require_feasible(u_exact, "ncon_margin_scan");
  require_dim(mu.size(), p.param_dim(), "ncon_margin_scan multiplier");
  ConditionMargin out;
  out.condition = "ncon";
  out.parameters = {c_r, eps_coercive};
  detail::scan(p, c, u_exact, samples, radius, seed, out, [&](const Vector& u) {
    return ncon_margin(p, u_exact, w, mu, c_r, eps_coercive, u);
  });
  return out;
}

/// Dual multiplier of a minimizer for exact data:
/// W_X (u_eta + K'(u_eta)^*(K(u_eta) - g_exact) / eta).
template <ForwardProblem P>
Vector multiplier_at_minimizer(const P& p, double eta, const Vector& u_eta, const Vector& g_exact) {
  const auto lin = p.linearize(u_eta);
  return p.param_ip().apply(u_eta + lin.adjoint(lin.value() - g_exact) / eta);
}

/// Left minus right side of the second-order sufficient condition at u.
template <ForwardProblem P>
double sosc_margin(const P& p, double eta, const Vector& u_eta, const Vector& mu_eta, const Vector& g_exact,
                   double c_s, double eps_prime, const Vector& u) {
  const Vector du = u - u_eta;
  const Vector k_eta = p.evaluate(u_eta);
  const double dk = p.data_ip().squared_norm(k_eta - p.evaluate(u));
  const double dx = p.param_ip().squared_norm(du);
  const double cross = p.data_ip().dot(k_eta - g_exact, second_order_error(p, u, u_eta));
  return 0.5 * dk + 0.5 * eta * dx + cross + eta * mu_eta.dot(du) - 0.5 * c_s * dk - 0.5 * eps_prime * eta * dx;
}

template <ForwardProblem P>
ConditionMargin sosc_margin_scan(const P& p, const ConstraintSet& c, double eta, const Vector& u_eta,
                                 const Vector& g_exact, double c_s, double eps_prime, int samples,
                                 double radius, std::uint64_t seed) {
  if (!(eta > 0.0)) throw std::invalid_argument("sosc_margin_scan: eta must be positive");
  c.require_feasible(u_eta, "sosc_margin_scan");
  const Vector mu_eta = multiplier_at_minimizer(p, eta, u_eta, g_exact);
  ConditionMargin out;
  out.condition = "sosc";
  out.parameters = {c_s, eps_prime};
  const bool scalar = std::is_same_v<P, ScalarQuadratic>;
  if (scalar) out.identity_max_error = 0.0;
  const Vector k_eta = p.evaluate(u_eta);
  detail::scan(p, c, u_eta, samples, radius, seed, out, [&](const Vector& u) {
    if constexpr (std::is_same_v<P, ScalarQuadratic>) {
      // (K(u_eta) - g) E(u, u_eta) = eta u_eta / (1 - 2 u_eta) (u - u_eta)^2
      const double lhs = (k_eta(0) - g_exact(0)) * second_order_error(p, u, u_eta)(0);
      const double d = u(0) - u_eta(0);
      const double rhs = eta * u_eta(0) / (1.0 - 2.0 * u_eta(0)) * d * d;
      const double scale = std::max({std::abs(lhs), std::abs(rhs), std::numeric_limits<double>::min()});
      out.identity_max_error = std::max(out.identity_max_error, std::abs(lhs - rhs) / scale);
    }
    return sosc_margin(p, eta, u_eta, mu_eta, g_exact, c_s, eps_prime, u);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Classical smallness condition L ||w|| < 1
// ---------------------------------------------------------------------------

struct ClassicalConditionReport {
  double L_est = 0.0;
  double L_times_w = 0.0;
  bool satisfied = false;
  bool exact_constant = false;  // true when L is known in closed form
  int probes = 0;
};

/// L is the closed form 2 eps for the scalar problem; otherwise the largest
/// observed ||(K'(a) - K'(b)) d||_H / ||a - b||_X over seeded probe pairs near
/// u_exact with unit directions d, which is a lower bound for the true constant.
template <ForwardProblem P>
ClassicalConditionReport classical_condition_report(const P& p, const ConstraintSet& c, const Vector& u_exact,
                                                    const Vector& w, int probes, std::uint64_t seed,
                                                    double radius = 0.0) {
  if (probes < 10) throw std::invalid_argument("classical_condition_report needs at least 10 probes");
  require_dim(w.size(), p.data_dim(), "classical_condition_report");
  ClassicalConditionReport rep;
  rep.probes = probes;
  if constexpr (std::is_same_v<P, ScalarQuadratic>) {
    rep.L_est = p.lipschitz();
    rep.exact_constant = true;
  } else {
    const InnerProduct& wx = p.param_ip();
    if (!(radius > 0.0)) radius = 0.25 * std::max(1.0, wx.norm(u_exact));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Index n = p.param_dim();
    auto unit = [&] {
      Vector d(n);
      for (Index i = 0; i < n; ++i) d(i) = normal(rng);
      return Vector(d / wx.norm(d));
    };
    for (int k = 0; k < probes; ++k) {
      const Vector a = c.project(u_exact + radius * unit());
      const Vector b = c.project(u_exact + radius * unit());
      const Vector d = unit();
      const double dist = wx.norm(a - b);
      if (dist == 0.0) continue;
      const double num = p.data_ip().norm(p.deriv_apply(a, d) - p.deriv_apply(b, d));
      rep.L_est = std::max(rep.L_est, num / dist);
    }
  }
  rep.L_times_w = rep.L_est * p.data_ip().norm(w);
  rep.satisfied = rep.L_times_w < 1.0;
  return rep;
}

}  // namespace tikhonov
