#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tikhonov/core.hpp"
#include "tikhonov/solver.hpp"

namespace tikhonov {

/// Geometric grid of regularization parameters on [eta_min, eta_max].
struct EtaGrid {
  double eta_min = 1e-12;
  double eta_max = 1e2;
  int count = 60;

  void validate() const {
    if (!(eta_min > 0.0) || !(eta_max > eta_min) || !std::isfinite(eta_max))
      throw std::invalid_argument("eta grid needs 0 < eta_min < eta_max");
    if (count < 8) throw std::invalid_argument("eta grid needs at least 8 points");
  }

  /// Grid values from eta_max down to eta_min; the endpoints are exact.
  std::vector<double> descending() const {
    validate();
    std::vector<double> etas(static_cast<std::size_t>(count));
    const double step = std::log(eta_max / eta_min) / (count - 1);
    for (int i = 0; i < count; ++i) etas[static_cast<std::size_t>(i)] = eta_max * std::exp(-step * i);
    etas.front() = eta_max;
    etas.back() = eta_min;
    return etas;
  }

  EtaGrid refined(int factor) const {
    if (factor < 1) throw std::invalid_argument("refinement factor must be positive");
    return {eta_min, eta_max, (count - 1) * factor + 1};
  }

  bool contains(double eta) const { return eta >= eta_min && eta <= eta_max; }
};

enum class RuleKind { a_priori, discrepancy, balancing, hanke_raus };

inline const char* to_string(RuleKind k) {
  switch (k) {
    case RuleKind::a_priori: return "a-priori";
    case RuleKind::discrepancy: return "discrepancy";
    case RuleKind::balancing: return "balancing";
    case RuleKind::hanke_raus: return "hanke-raus";
  }
  return "?";
}

inline RuleKind parse_rule(const std::string& name) {
  if (name == "a-priori" || name == "a_priori") return RuleKind::a_priori;
  if (name == "discrepancy") return RuleKind::discrepancy;
  if (name == "balancing") return RuleKind::balancing;
  if (name == "hanke-raus" || name == "hanke_raus") return RuleKind::hanke_raus;
  throw std::invalid_argument("unknown rule '" + name + "'");
}

/// A rule together with its constant.
struct RuleSpec {
  RuleKind kind = RuleKind::a_priori;
  double c_ap = 1.0;
  double c_m = 1.1;
  double gamma = 1.0;
};

/// One solved grid point as seen by a rule.
struct GridSample {
  double eta = 0.0;
  double residual = 0.0;
  double penalty = 0.0;
  double value = 0.0;
  double surrogate = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
};

struct RuleDiagnostics {
  std::vector<GridSample> samples;  // in evaluation order (descending eta)
  double target_residual = std::numeric_limits<double>::quiet_NaN();
  int bisection_steps = 0;
  double bracket_low = std::numeric_limits<double>::quiet_NaN();
  double bracket_high = std::numeric_limits<double>::quiet_NaN();
  bool residual_monotone = true;
  double grid_argmin_eta = std::numeric_limits<double>::quiet_NaN();
  double grid_argmin_surrogate = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> refinement_trajectory;
  bool refinement_accepted = false;
  double balancing_mismatch = std::numeric_limits<double>::quiet_NaN();
  int excluded_zero_residual = 0;
  int failed_solves = 0;
  std::vector<std::string> notes;
};

struct ChosenParameter {
  RuleKind rule = RuleKind::a_priori;
  double eta_star = 0.0;
  TikhonovResult result;
  double realized_residual = 0.0;
  RuleDiagnostics diagnostics;
};

class RuleFailure : public std::runtime_error {
 public:
  enum class Reason {
    invalid_input,
    residual_below_target_at_eta_max,  // noise too large or eta_max too small
    residual_above_target_at_eta_min,  // eta_min too large for this noise level
    all_solves_failed,
    all_residuals_zero,
  };
  RuleFailure(Reason reason, const std::string& what) : std::runtime_error(what), reason_(reason) {}
  Reason reason() const noexcept { return reason_; }

 private:
  Reason reason_;
};

inline double choose_a_priori(double delta, double c_ap) {
  if (!(delta > 0.0) || !(c_ap > 0.0))
    throw std::invalid_argument("a priori choice needs delta > 0 and c_ap > 0");
  return c_ap * delta;
}

namespace detail {

inline GridSample sample_of(const TikhonovResult& r) {
  return {r.eta, r.residual_norm, r.penalty, r.value, std::numeric_limits<double>::quiet_NaN(), r.converged};
}

inline bool usable(const TikhonovResult& r) {
  return r.converged && std::isfinite(r.value) && std::isfinite(r.residual_norm);
}

/// Warm-started solve along `etas` (descending). Stops after the first entry
/// for which `stop` returns true. Solver errors are recorded as failed entries.
template <ForwardProblem P>
std::vector<TikhonovResult> sweep(const P& p, const ConstraintSet& c, const Vector& g,
                                  const std::vector<double>& etas, const SolverOptions& opts,
                                  const std::function<bool(const TikhonovResult&)>& stop = {}) {
  std::vector<TikhonovResult> out;
  Vector start = c.project(Vector::Zero(p.param_dim()));
  for (double eta : etas) {
    TikhonovResult r;
    try {
      r = minimize(p, c, eta, g, start, opts);
    } catch (const SolverError& e) {
      r.u = start;
      r.eta = eta;
      r.status = std::string("error: ") + e.what();
      r.residual_norm = r.penalty = r.value = std::numeric_limits<double>::quiet_NaN();
    }
    if (r.u.allFinite() && std::isfinite(r.value)) start = r.u;
    out.push_back(std::move(r));
    if (stop && stop(out.back())) break;
  }
  return out;
}

inline ChosenParameter package(RuleKind rule, TikhonovResult r, RuleDiagnostics diag) {
  ChosenParameter out;
  out.rule = rule;
  out.eta_star = r.eta;
  out.realized_residual = r.residual_norm;
  out.result = std::move(r);
  out.diagnostics = std::move(diag);
  return out;
}

/// Index of the smallest finite key; ties go to the smaller eta.
inline std::optional<std::size_t> argmin_smaller_eta(const std::vector<GridSample>& s,
                                                     const std::vector<bool>& eligible) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!eligible[i] || !std::isfinite(s[i].surrogate)) continue;
    if (!best || s[i].surrogate < s[*best].surrogate ||
        (s[i].surrogate == s[*best].surrogate && s[i].eta < s[*best].eta))
      best = i;
  }
  return best;
}

}  // namespace detail

/// Solve at the a priori eta = c_ap * delta, reached by continuation along the
/// grid points above it.
template <ForwardProblem P>
ChosenParameter apply_a_priori(const P& p, const ConstraintSet& c, const Vector& g, double delta,
                               double c_ap, const EtaGrid& grid, const SolverOptions& opts = {}) {
  const double eta = choose_a_priori(delta, c_ap);
  if (!grid.contains(eta))
    throw RuleFailure(RuleFailure::Reason::invalid_input,
                      "a priori eta " + std::to_string(eta) + " lies outside the eta interval");
  std::vector<double> etas;
  for (double e : grid.descending())
    if (e > eta) etas.push_back(e);
  etas.push_back(eta);
  auto results = detail::sweep(p, c, g, etas, opts);
  RuleDiagnostics diag;
  for (const auto& r : results) diag.samples.push_back(detail::sample_of(r));
  if (!detail::usable(results.back())) diag.notes.push_back("solve at the a priori eta did not converge");
  return detail::package(RuleKind::a_priori, std::move(results.back()), std::move(diag));
}

/// Discrepancy principle ||K(u_eta) - g|| = c_m * delta: bracket on a
/// warm-started descending sweep, then bisect in log(eta).
template <ForwardProblem P>
ChosenParameter choose_discrepancy(const P& p, const ConstraintSet& c, const Vector& g, double delta,
                                   double c_m, const EtaGrid& grid, const SolverOptions& opts = {}) {
  if (!(delta > 0.0)) throw RuleFailure(RuleFailure::Reason::invalid_input, "discrepancy needs delta > 0");
  if (!(c_m >= 1.0)) throw RuleFailure(RuleFailure::Reason::invalid_input, "discrepancy needs c_m >= 1");
  const double target = c_m * delta;
  RuleDiagnostics diag;
  diag.target_residual = target;

  auto results = detail::sweep(p, c, g, grid.descending(), opts,
                               [&](const TikhonovResult& r) { return r.residual_norm <= target; });
  double prev = -1.0;
  for (const auto& r : results) {
    diag.samples.push_back(detail::sample_of(r));
    if (!detail::usable(r)) ++diag.failed_solves;
    if (prev >= 0.0 && r.residual_norm > prev * (1.0 + 1e-12)) diag.residual_monotone = false;
    if (std::isfinite(r.residual_norm)) prev = r.residual_norm;
  }
  if (!(results.front().residual_norm > target))
    throw RuleFailure(RuleFailure::Reason::residual_below_target_at_eta_max,
                      "discrepancy: residual at eta_max is already below c_m*delta "
                      "(noise level too large or eta_max too small)");
  if (!(results.back().residual_norm <= target))
    throw RuleFailure(RuleFailure::Reason::residual_above_target_at_eta_min,
                      "discrepancy: residual at eta_min still exceeds c_m*delta "
                      "(data too noisy for eta_min)");

  TikhonovResult lo = results.back();                     // residual <= target
  TikhonovResult hi = results[results.size() - 2];        // residual > target
  int steps = 0;
  while (steps < 60 && hi.eta / lo.eta > 1.0 + 1e-3 && lo.residual_norm != target) {
    const double mid = std::sqrt(hi.eta * lo.eta);
    TikhonovResult r;
    try {
      r = minimize(p, c, mid, g, hi.u, opts);
    } catch (const SolverError&) {
      ++diag.failed_solves;
      break;
    }
    if (!detail::usable(r)) ++diag.failed_solves;
    ++steps;
    if (r.residual_norm > target) hi = std::move(r);
    else lo = std::move(r);
  }
  diag.bisection_steps = steps;
  diag.bracket_low = lo.eta;
  diag.bracket_high = hi.eta;
  if (!diag.residual_monotone) diag.notes.push_back("residual not monotone in eta along the sweep");
  const bool take_lo = std::abs(lo.residual_norm - target) <= std::abs(hi.residual_norm - target);
  return detail::package(RuleKind::discrepancy, take_lo ? std::move(lo) : std::move(hi), std::move(diag));
}

/// Balancing principle: minimize Phi(eta) = F(eta)^(1+gamma) / eta over the
/// grid, then refine with the fixed point eta <- ||K(u)-g||^2 / (gamma ||u||_X^2).
template <ForwardProblem P>
ChosenParameter choose_balancing(const P& p, const ConstraintSet& c, const Vector& g, double gamma,
                                 const EtaGrid& grid, const SolverOptions& opts = {}) {
  if (!(gamma > 0.0)) throw RuleFailure(RuleFailure::Reason::invalid_input, "balancing needs gamma > 0");
  // Logarithm of Phi avoids overflow for large gamma.
  auto log_phi = [gamma](const TikhonovResult& r) {
    return (1.0 + gamma) * std::log(r.value) - std::log(r.eta);
  };

  RuleDiagnostics diag;
  auto results = detail::sweep(p, c, g, grid.descending(), opts);
  std::vector<bool> eligible;
  for (const auto& r : results) {
    GridSample s = detail::sample_of(r);
    const bool ok = detail::usable(r) && r.value > 0.0;
    if (ok) s.surrogate = log_phi(r);
    else ++diag.failed_solves;
    diag.samples.push_back(s);
    eligible.push_back(ok);
  }
  const auto best = detail::argmin_smaller_eta(diag.samples, eligible);
  if (!best) throw RuleFailure(RuleFailure::Reason::all_solves_failed, "balancing: every grid solve failed");
  diag.grid_argmin_eta = diag.samples[*best].eta;
  diag.grid_argmin_surrogate = diag.samples[*best].surrogate;

  TikhonovResult chosen = results[*best];
  TikhonovResult current = chosen;
  diag.refinement_trajectory.push_back(current.eta);
  bool refined = false;
  for (int it = 0; it < 30; ++it) {
    const double unorm2 = 2.0 * current.penalty;
    if (!(unorm2 > 0.0)) {
      diag.notes.push_back("refinement stopped: ||u|| vanished, fixed point undefined");
      break;
    }
    double next = current.residual_norm * current.residual_norm / (gamma * unorm2);
    next = std::clamp(next, grid.eta_min, grid.eta_max);
    TikhonovResult r;
    try {
      r = minimize(p, c, next, g, current.u, opts);
    } catch (const SolverError&) {
      diag.notes.push_back("refinement stopped: solver error");
      break;
    }
    if (!detail::usable(r) || !(r.value > 0.0)) {
      diag.notes.push_back("refinement stopped: solve did not converge");
      break;
    }
    const double change = std::abs(next - current.eta) / current.eta;
    current = std::move(r);
    diag.refinement_trajectory.push_back(current.eta);
    refined = true;
    if (change <= 1e-3) break;
  }
  if (refined && log_phi(current) < log_phi(chosen)) {
    chosen = std::move(current);
    diag.refinement_accepted = true;
  }
  const double res2 = chosen.residual_norm * chosen.residual_norm;
  diag.balancing_mismatch = res2 > 0.0 ? std::abs(gamma * chosen.eta * 2.0 * chosen.penalty - res2) / res2
                                       : std::numeric_limits<double>::infinity();
  return detail::package(RuleKind::balancing, std::move(chosen), std::move(diag));
}

/// Hanke-Raus rule: grid argmin of ||K(u_eta) - g||^2 / eta.
template <ForwardProblem P>
ChosenParameter choose_hanke_raus(const P& p, const ConstraintSet& c, const Vector& g,
                                  const EtaGrid& grid, const SolverOptions& opts = {}) {
  RuleDiagnostics diag;
  auto results = detail::sweep(p, c, g, grid.descending(), opts);
  std::vector<bool> eligible;
  for (const auto& r : results) {
    GridSample s = detail::sample_of(r);
    bool ok = detail::usable(r);
    if (!ok) ++diag.failed_solves;
    if (ok && r.residual_norm == 0.0) {
      ++diag.excluded_zero_residual;
      ok = false;
    }
    if (ok) s.surrogate = r.residual_norm * r.residual_norm / r.eta;
    diag.samples.push_back(s);
    eligible.push_back(ok);
  }
  if (diag.excluded_zero_residual > 0)
    diag.notes.push_back(std::to_string(diag.excluded_zero_residual) + " grid points with zero residual excluded");
  const auto best = detail::argmin_smaller_eta(diag.samples, eligible);
  if (!best) {
    if (diag.excluded_zero_residual > 0)
      throw RuleFailure(RuleFailure::Reason::all_residuals_zero,
                        "hanke-raus: all residuals vanish, data exactly attainable");
    throw RuleFailure(RuleFailure::Reason::all_solves_failed, "hanke-raus: every grid solve failed");
  }
  diag.grid_argmin_eta = diag.samples[*best].eta;
  diag.grid_argmin_surrogate = diag.samples[*best].surrogate;
  return detail::package(RuleKind::hanke_raus, std::move(results[*best]), std::move(diag));
}

/// Dispatch on a rule specification. delta is ignored by Hanke-Raus and balancing.
template <ForwardProblem P>
ChosenParameter apply_rule(const P& p, const ConstraintSet& c, const Vector& g, double delta,
                           const RuleSpec& rule, const EtaGrid& grid, const SolverOptions& opts = {}) {
  switch (rule.kind) {
    case RuleKind::a_priori: return apply_a_priori(p, c, g, delta, rule.c_ap, grid, opts);
    case RuleKind::discrepancy: return choose_discrepancy(p, c, g, delta, rule.c_m, grid, opts);
    case RuleKind::balancing: return choose_balancing(p, c, g, rule.gamma, grid, opts);
    case RuleKind::hanke_raus: return choose_hanke_raus(p, c, g, grid, opts);
  }
  throw std::logic_error("unreachable rule kind");
}

}  // namespace tikhonov
