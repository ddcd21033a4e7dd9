#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "tikhonov/core.hpp"
#include "tikhonov/problems.hpp"
#include "tikhonov/rules.hpp"
#include "tikhonov/solver.hpp"

namespace tikhonov {

inline constexpr const char* kVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Noise
// ---------------------------------------------------------------------------

struct NoiseSpec {
  double delta = 0.0;
  std::uint64_t seed = 0;
};

struct NoisyData {
  Vector data;
  std::uint64_t seed_used = 0;  // differs from the requested seed after a zero draw
  int redraws = 0;
};

/// g + delta e / ||e||_H with e a seeded standard normal vector. The
/// perturbation is rescaled after it has been added so that the stored data
/// realize the requested noise level as closely as floating point allows.
inline NoisyData make_noisy_data_detailed(const Vector& g_exact, const NoiseSpec& spec, const InnerProduct& ip) {
  if (!(spec.delta >= 0.0) || !std::isfinite(spec.delta))
    throw std::invalid_argument("noise level must be nonnegative and finite");
  require_dim(ip.dim(), g_exact.size(), "make_noisy_data");
  NoisyData out{g_exact, spec.seed, 0};
  if (spec.delta == 0.0) return out;
  const Index m = g_exact.size();
  Vector e(m);
  for (;;) {
    std::mt19937_64 rng(out.seed_used);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index i = 0; i < m; ++i) e(i) = normal(rng);
    if (ip.norm(e) > 0.0) break;
    ++out.seed_used;
    ++out.redraws;
  }
  out.data = g_exact + (spec.delta / ip.norm(e)) * e;
  for (int it = 0; it < 3; ++it) {
    const Vector d = out.data - g_exact;
    const double nd = ip.norm(d);
    if (nd == 0.0 || nd == spec.delta) break;
    out.data = g_exact + (spec.delta / nd) * d;
  }
  return out;
}

inline Vector make_noisy_data(const Vector& g_exact, const NoiseSpec& spec, const InnerProduct& ip) {
  return make_noisy_data_detailed(g_exact, spec, ip).data;
}

// ---------------------------------------------------------------------------
// Log-log regression
// ---------------------------------------------------------------------------

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;  // in natural logarithms
  double r2 = 0.0;
};

/// Least squares on (log x, log y); `robust` switches to the median of the
/// pairwise slopes with the median intercept.
inline LogLogFit fit_loglog_slope(const std::vector<std::pair<double, double>>& points, bool robust = false) {
  if (points.size() < 2) throw std::invalid_argument("slope fit needs at least two points");
  std::vector<double> lx, ly;
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0)) throw std::invalid_argument("slope fit needs positive coordinates");
    lx.push_back(std::log(x));
    ly.push_back(std::log(y));
  }
  const std::size_t n = lx.size();
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size() / 2;
    return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
  };
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);

  LogLogFit fit;
  if (robust) {
    std::vector<double> slopes;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (lx[j] != lx[i]) slopes.push_back((ly[j] - ly[i]) / (lx[j] - lx[i]));
    if (slopes.empty()) throw std::invalid_argument("slope fit needs distinct x values");
    fit.slope = median(slopes);
    std::vector<double> icpt;
    for (std::size_t i = 0; i < n; ++i) icpt.push_back(ly[i] - fit.slope * lx[i]);
    fit.intercept = median(icpt);
  } else {
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sxx += (lx[i] - mx) * (lx[i] - mx);
      sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("slope fit needs distinct x values");
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
  }
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
    ss_res += r * r;
    ss_tot += (ly[i] - my) * (ly[i] - my);
  }
  fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
  return fit;
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

// ---------------------------------------------------------------------------
// Rate studies
// ---------------------------------------------------------------------------

struct RateRow {
  double delta = 0.0;
  std::uint64_t seed = 0;
  double eta = std::numeric_limits<double>::quiet_NaN();
  double param_error = std::numeric_limits<double>::quiet_NaN();      // ||u - u_exact||_X
  double residual_exact = std::numeric_limits<double>::quiet_NaN();   // ||K(u) - g_exact||_H
  double realized_residual = std::numeric_limits<double>::quiet_NaN();  // ||K(u) - g_delta||_H
  bool converged = false;
  bool failed = false;
  std::string failure;
  Vector u;
};

/// Medians over the surviving seeds of one noise level.
struct RateLevel {
  double delta = 0.0;
  int survivors = 0;
  double eta = std::numeric_limits<double>::quiet_NaN();
  double param_error = std::numeric_limits<double>::quiet_NaN();
  double residual_exact = std::numeric_limits<double>::quiet_NaN();
  double realized_residual = std::numeric_limits<double>::quiet_NaN();
};

struct RateStudyResult {
  std::vector<RateRow> rows;  // sorted by (delta descending, seed)
  std::vector<RateLevel> levels;
  double slope_error = std::numeric_limits<double>::quiet_NaN();
  double slope_residual = std::numeric_limits<double>::quiet_NaN();
  double fit_r2 = std::numeric_limits<double>::quiet_NaN();  // of the error fit
  double fit_r2_residual = std::numeric_limits<double>::quiet_NaN();
  bool fit_ok = false;
  std::string fit_message;
};

struct RateStudyOptions {
  bool robust_fit = false;
  int workers = 1;
  bool keep_solutions = false;
};

/// Aggregate rows into per-level medians and fit both slopes. Needs at least
/// four noise levels with a surviving row.
inline void fit_rate_study(RateStudyResult& res, bool robust) {
  std::vector<double> deltas;
  for (const auto& r : res.rows)
    if (std::find(deltas.begin(), deltas.end(), r.delta) == deltas.end()) deltas.push_back(r.delta);
  std::sort(deltas.begin(), deltas.end(), std::greater<>());
  res.levels.clear();
  std::vector<std::pair<double, double>> err_pts, res_pts;
  for (double d : deltas) {
    RateLevel lvl;
    lvl.delta = d;
    std::vector<double> eta, err, rex, rr;
    for (const auto& r : res.rows) {
      if (r.delta != d || r.failed) continue;
      eta.push_back(r.eta);
      err.push_back(r.param_error);
      rex.push_back(r.residual_exact);
      rr.push_back(r.realized_residual);
    }
    lvl.survivors = static_cast<int>(err.size());
    if (lvl.survivors > 0) {
      lvl.eta = median_of(eta);
      lvl.param_error = median_of(err);
      lvl.residual_exact = median_of(rex);
      lvl.realized_residual = median_of(rr);
      if (lvl.param_error > 0.0 && lvl.residual_exact > 0.0) {
        err_pts.emplace_back(d, lvl.param_error);
        res_pts.emplace_back(d, lvl.residual_exact);
      }
    }
    res.levels.push_back(lvl);
  }
  if (err_pts.size() < 4) {
    res.fit_ok = false;
    res.fit_message = "slope fit needs at least 4 noise levels with surviving rows, got " +
                      std::to_string(err_pts.size());
    return;
  }
  const LogLogFit fe = fit_loglog_slope(err_pts, robust);
  const LogLogFit fr = fit_loglog_slope(res_pts, robust);
  res.slope_error = fe.slope;
  res.fit_r2 = fe.r2;
  res.slope_residual = fr.slope;
  res.fit_r2_residual = fr.r2;
  res.fit_ok = true;
}

/// For every (delta, seed): draw noisy data, apply the rule, record the
/// errors against the exact solution and exact data. Rows are independent and
/// may run on several workers; the output does not depend on the worker count.
template <ForwardProblem P>
RateStudyResult run_rate_study(const P& p, const ConstraintSet& c, const Vector& u_exact, const Vector& g_exact,
                               const RuleSpec& rule, const std::vector<double>& deltas,
                               const std::vector<std::uint64_t>& seeds, const EtaGrid& grid,
                               const SolverOptions& opts = {}, const RateStudyOptions& ropts = {}) {
  if (deltas.empty() || seeds.empty()) throw std::invalid_argument("rate study needs deltas and seeds");
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0.0)) throw std::invalid_argument("rate study deltas must be positive");
    if (i > 0 && !(deltas[i] < deltas[i - 1]))
      throw std::invalid_argument("rate study deltas must be strictly descending");
  }
  require_dim(u_exact.size(), p.param_dim(), "rate study exact solution");
  require_dim(g_exact.size(), p.data_dim(), "rate study exact data");
  grid.validate();

  RateStudyResult res;
  for (double d : deltas)
    for (std::uint64_t s : seeds) {
      RateRow row;
      row.delta = d;
      row.seed = s;
      res.rows.push_back(std::move(row));
    }

  auto run_row = [&](RateRow& row) {
    try {
      const Vector g = make_noisy_data(g_exact, {row.delta, row.seed}, p.data_ip());
      const ChosenParameter chosen = apply_rule(p, c, g, row.delta, rule, grid, opts);
      row.eta = chosen.eta_star;
      row.param_error = p.param_ip().norm(chosen.result.u - u_exact);
      row.residual_exact = p.data_ip().norm(p.evaluate(chosen.result.u) - g_exact);
      row.realized_residual = chosen.realized_residual;
      row.converged = chosen.result.converged;
      if (ropts.keep_solutions) row.u = chosen.result.u;
    } catch (const RuleFailure& e) {
      row.failed = true;
      row.failure = e.what();
    } catch (const SolverError& e) {
      row.failed = true;
      row.failure = e.what();
    }
  };

  const int workers = std::max(1, std::min<int>(ropts.workers, static_cast<int>(res.rows.size())));
  if (workers == 1) {
    for (auto& row : res.rows) run_row(row);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < res.rows.size(); i = next++) run_row(res.rows[i]);
      });
    for (auto& th : pool) th.join();
  }
  std::stable_sort(res.rows.begin(), res.rows.end(), [](const RateRow& a, const RateRow& b) {
    return a.delta != b.delta ? a.delta > b.delta : a.seed < b.seed;
  });
  fit_rate_study(res, ropts.robust_fit);
  return res;
}

inline std::vector<double> default_deltas() { return {1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5}; }

inline std::vector<std::uint64_t> default_seeds(int count = 5) {
  std::vector<std::uint64_t> s;
  for (int i = 0; i < count; ++i) s.push_back(static_cast<std::uint64_t>(i + 1));
  return s;
}

// ---------------------------------------------------------------------------
// Error bounds on the scalar problem
// ---------------------------------------------------------------------------

struct BoundRow {
  double eta = 0.0;
  double u_eta = 0.0;
  double error = 0.0;           // |u_eta - u_exact|
  double error_bound = 0.0;     // |w| sqrt(eta)
  double residual = 0.0;        // |K(u_eta) - g_exact|
  double residual_bound = 0.0;  // 2 eta |w|
  bool error_ok = false;
  bool residual_ok = false;
};

struct BoundReport {
  double u_exact = 0.0;
  double w = 0.0;
  std::vector<BoundRow> rows;
  int violations = 0;
};

/// Approximation-error bounds for exact data with c_r = 0 and unit coercivity,
/// using the global minimizer from the stationarity cubic.
inline BoundReport lemma23_bound_check(const ScalarQuadratic& p, double g_exact, const std::vector<double>& etas) {
  const double eps = p.eps_scale();
  BoundReport rep;
  rep.u_exact = scalar_exact_solution(eps, g_exact);
  if (!(rep.u_exact < 0.5)) throw std::domain_error("bound check needs u_exact < 1/2");
  rep.w = scalar_source_representer(eps, g_exact);
  const auto c = ConstraintSet::unconstrained(1);
  for (double eta : etas) {
    BoundRow row;
    row.eta = eta;
    row.u_eta = scalar_tikhonov_minimizer(eps, g_exact, eta, c);
    row.error = std::abs(row.u_eta - rep.u_exact);
    row.error_bound = std::abs(rep.w) * std::sqrt(eta);
    row.residual = std::abs(p.forward(row.u_eta) - g_exact);
    row.residual_bound = 2.0 * eta * std::abs(rep.w);
    row.error_ok = row.error <= row.error_bound;
    row.residual_ok = row.residual <= row.residual_bound;
    if (!row.error_ok || !row.residual_ok) ++rep.violations;
    rep.rows.push_back(row);
  }
  return rep;
}

/// Total-error bound for noisy data with c_r = 0 and unit coercivity:
/// delta / sqrt(eta) + sqrt(eta) ||w|| + sqrt(2 ||w|| delta).
inline double a_priori_error_bound(double delta, double eta, double w_norm) {
  return delta / std::sqrt(eta) + std::sqrt(eta) * w_norm + std::sqrt(2.0 * w_norm * delta);
}

}  // namespace tikhonov
