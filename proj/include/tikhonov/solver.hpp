#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tikhonov/core.hpp"

namespace tikhonov {

struct SolverOptions {
  int max_iter = 200;
  /// Stop once the projected-gradient stationarity falls below grad_tol times
  /// its value at the initial iterate.
  double grad_tol = 1e-10;
  double armijo_c = 1e-4;
  double backtrack_factor = 0.5;
  int max_backtracks = 40;
  /// Levenberg shift (times W_X) added to the Gauss-Newton matrix. When the
  /// factorization fails the solver retries with 1e-8 * eta.
  double gn_damping = 0.0;

  void validate() const {
    if (max_iter <= 0 || !(grad_tol > 0) || !(armijo_c > 0) || armijo_c >= 1 ||
        !(backtrack_factor > 0) || !(backtrack_factor < 1) || max_backtracks <= 0 || gn_damping < 0)
      throw std::invalid_argument("invalid solver options");
  }
};

/// Non-finite objective: the model cannot be evaluated at a feasible point.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <ForwardProblem P>
double objective(const P& p, double eta, const Vector& residual, const Vector& u) {
  const double v = 0.5 * p.data_ip().squared_norm(residual) + 0.5 * eta * p.param_ip().squared_norm(u);
  if (!std::isfinite(v)) throw SolverError("non-finite Tikhonov functional value");
  return v;
}

}  // namespace detail

/// Minimizes J_eta(u) = 1/2 ||K(u) - g||_H^2 + eta/2 ||u||_X^2 over the box c by
/// projected Gauss-Newton with Armijo backtracking along the projection arc.
/// Components sitting on a bound with the gradient pushing outward are frozen
/// for the Newton solve; the step on the remaining ones solves
///   (J^T W_H J + eta W_X + damping W_X)_FF s_F = -grad_F.
template <ForwardProblem P>
TikhonovResult minimize(const P& p, const ConstraintSet& c, double eta, const Vector& g,
                        const Vector& u0, const SolverOptions& opts = {}) {
  if (!(eta > 0.0)) throw std::invalid_argument("minimize: eta must be positive");
  opts.validate();
  const Index n = p.param_dim();
  require_dim(u0.size(), n, "minimize: initial point");
  require_dim(g.size(), p.data_dim(), "minimize: data");
  require_dim(c.dim(), n, "minimize: constraint set");

  const InnerProduct& wx = p.param_ip();
  const InnerProduct& wh = p.data_ip();
  const Matrix wx_dense = wx.matrix();
  const Matrix wh_dense = wh.matrix();

  TikhonovResult res;
  res.eta = eta;
  Vector u = c.project(u0);
  auto lin = p.linearize(u);
  Vector r = lin.value() - g;
  double value = detail::objective(p, eta, r, u);

  double stat0 = -1.0;
  int it = 0;
  for (;; ++it) {
    const Vector adj = lin.adjoint(r);
    const Vector riesz = adj + eta * u;
    // The box projection only commutes with a diagonal metric; otherwise the
    // projected-gradient test has to use the Euclidean gradient.
    const bool scaled = wx.is_diagonal();
    const Vector descent = scaled ? riesz : wx.apply(riesz);
    const double stat = wx.norm(u - c.project(u - descent));
    if (stat0 < 0) stat0 = stat;
    res.stationarity = stat;
    // Rounding floor: the two gradient contributions cancel at a minimizer.
    const double floor = scaled ? 1e-13 * (wx.norm(adj) + eta * wx.norm(u))
                                : 1e-13 * (wx.norm(wx.apply(adj)) + eta * wx.norm(wx.apply(u)));
    if (stat <= opts.grad_tol * stat0 || stat <= floor || stat == 0.0) {
      res.converged = true;
      res.status = "converged";
      break;
    }
    if (it >= opts.max_iter) {
      res.status = "iteration limit";
      break;
    }

    const Vector grad = scaled ? wx.apply(riesz) : descent;  // Euclidean gradient
    std::vector<Index> free;
    free.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      const bool at_lower = u(i) <= c.lower()(i);
      const bool at_upper = u(i) >= c.upper()(i);
      if ((at_lower && grad(i) > 0.0) || (at_upper && grad(i) < 0.0)) continue;
      free.push_back(i);
    }

    Vector step = Vector::Zero(n);
    if (!free.empty()) {
      const Matrix jac = jacobian(lin, n);
      const Matrix gn = jac.transpose() * wh_dense * jac;
      const Index nf = static_cast<Index>(free.size());
      auto reduced = [&](double damping) {
        Matrix h(nf, nf);
        for (Index a = 0; a < nf; ++a)
          for (Index b = 0; b < nf; ++b)
            h(a, b) = gn(free[a], free[b]) + (eta + damping) * wx_dense(free[a], free[b]);
        return h;
      };
      Vector rhs(nf);
      for (Index a = 0; a < nf; ++a) rhs(a) = -grad(free[a]);
      Eigen::LLT<Matrix> llt(reduced(opts.gn_damping));
      if (llt.info() != Eigen::Success) llt.compute(reduced(std::max(opts.gn_damping, 1e-8 * eta)));
      if (llt.info() == Eigen::Success) {
        const Vector sf = llt.solve(rhs);
        for (Index a = 0; a < nf; ++a) step(free[a]) = sf(a);
      }
      if (!step.allFinite() || grad.dot(step) >= 0.0) step = -descent;
    }
    if (step.isZero(0.0)) step = -descent;
    const double predicted = -grad.dot(step);

    // Backtracking along the projection arc; a Gauss-Newton direction that
    // fails is replaced by the projected steepest-descent direction.
    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      const Vector dir = attempt == 0 ? step : Vector(-descent);
      double t = 1.0;
      for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
        const Vector trial = c.project(u + t * dir);
        auto trial_lin = p.linearize(trial);
        const Vector trial_r = trial_lin.value() - g;
        const double trial_value = detail::objective(p, eta, trial_r, trial);
        const double decrease = grad.dot(trial - u);
        const bool armijo = trial_value <= value + opts.armijo_c * std::min(decrease, 0.0) &&
                            trial_value < value;
        const bool rounding = attempt == 0 && bt == 0 &&
                              trial_value <= value + 1e-14 * std::abs(value) && decrease < 0.0;
        if (armijo || rounding) {
          u = trial;
          lin = std::move(trial_lin);
          r = trial_r;
          value = trial_value;
          accepted = true;
          break;
        }
        ++res.backtracks;
        t *= opts.backtrack_factor;
      }
    }
    if (!accepted) {
      res.line_search_failed = true;
      // No representable decrease left: J itself is only known to rounding
      // accuracy (amplified by the state solves), so this is convergence.
      if (predicted <= 1e-8 * std::abs(value)) {
        res.converged = true;
        res.status = "converged at rounding floor";
      } else {
        res.status = "line search failed";
      }
      break;
    }
  }

  res.u = u;
  res.iterations = it;
  res.residual_norm = wh.norm(r);
  res.penalty = 0.5 * wx.squared_norm(u);
  res.value = assemble_value(res.residual_norm, eta, res.penalty);
  return res;
}

template <ForwardProblem P>
TikhonovResult minimize(const P& p, const ConstraintSet& c, double eta, const Vector& g,
                        const SolverOptions& opts = {}) {
  return minimize(p, c, eta, g, c.project(Vector::Zero(p.param_dim())), opts);
}

/// Minimizers along a descending eta grid, each solve warm-started at the
/// previous minimizer. Repeated consecutive eta values reuse the previous result.
template <ForwardProblem P>
std::vector<TikhonovResult> value_function_sweep(const P& p, const ConstraintSet& c, const Vector& g,
                                                 const std::vector<double>& etas,
                                                 const SolverOptions& opts = {},
                                                 std::optional<Vector> u0 = std::nullopt) {
  for (std::size_t i = 0; i < etas.size(); ++i) {
    if (!(etas[i] > 0.0)) throw std::invalid_argument("value_function_sweep: eta must be positive");
    if (i > 0 && etas[i] > etas[i - 1])
      throw std::invalid_argument("value_function_sweep: eta grid must be sorted descending");
  }
  std::vector<TikhonovResult> out;
  out.reserve(etas.size());
  Vector start = u0 ? c.project(*u0) : c.project(Vector::Zero(p.param_dim()));
  for (std::size_t i = 0; i < etas.size(); ++i) {
    if (i > 0 && etas[i] == etas[i - 1]) {
      out.push_back(out.back());
      continue;
    }
    TikhonovResult res;
    try {
      res = minimize(p, c, etas[i], g, start, opts);
    } catch (const SolverError& e) {
      res.u = start;
      res.eta = etas[i];
      res.converged = false;
      res.status = std::string("error: ") + e.what();
      res.residual_norm = std::numeric_limits<double>::quiet_NaN();
      res.penalty = std::numeric_limits<double>::quiet_NaN();
      res.value = std::numeric_limits<double>::quiet_NaN();
    }
    if (res.u.allFinite() && std::isfinite(res.value)) start = res.u;
    out.push_back(std::move(res));
  }
  return out;
}

}  // namespace tikhonov
