#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tikhonov/tikhonov.hpp"

namespace {

using namespace tikhonov;

constexpr int kExitRuleFailure = 2;
constexpr int kExitConfig = 3;

struct Common {
  std::string problem;
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool with_out = true) {
  cmd->add_option("--problem", c.problem, "scalar, potential or conductivity")->required();
  cmd->add_option("--config", c.config_path, "flat key = value file");
  cmd->add_option("--set", c.overrides, "config override key=value (repeatable)");
  if (with_out) cmd->add_option("--out", c.out, "JSON report path (stdout when omitted)");
}

Config load_config(const Common& c) {
  Config cfg = c.config_path.empty() ? Config{} : Config::from_file(c.config_path);
  for (const auto& o : c.overrides) cfg.set_assignment(o);
  return cfg;
}

json inputs_json(const std::string& command, const Common& c, const Config& cfg) {
  json cfg_json = json::object();
  for (const auto& [k, v] : cfg.values()) cfg_json[k] = v;
  return json{{"command", command}, {"problem", c.problem}, {"config_file", c.config_path}, {"config", cfg_json}};
}

void emit(const std::string& path, const json& report) {
  if (path.empty())
    std::cout << report.dump(2) << '\n';
  else
    write_json(path, report);
}

EtaGrid parse_grid(const std::string& text, const Config& cfg) {
  if (text.empty()) return grid_from(cfg);
  const auto v = Config::parse_list("--grid", text);
  if (v.size() != 3) throw ConfigError("--grid expects min,max,count");
  EtaGrid g{v[0], v[1], static_cast<int>(v[2])};
  if (static_cast<double>(g.count) != v[2]) throw ConfigError("--grid count must be an integer");
  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return g;
}

Vector read_data_file(const std::string& path, Index m) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  for (char& ch : text)
    if (ch == ',' || ch == '\n' || ch == '\r' || ch == '\t' || ch == ';') ch = ' ';
  std::istringstream ss(text);
  std::vector<double> vals;
  std::string tok;
  while (ss >> tok) {
    try {
      std::size_t pos = 0;
      vals.push_back(std::stod(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError("data file '" + path + "' contains a non-number: '" + tok + "'");
    }
  }
  if (static_cast<Index>(vals.size()) != m)
    throw ConfigError("data file '" + path + "' has " + std::to_string(vals.size()) + " values, expected " +
                      std::to_string(m));
  return Eigen::Map<const Vector>(vals.data(), m);
}

template <class P>
json error_metrics(const ProblemSetup<P>& s, const Vector& u) {
  const auto& p = s.problem;
  return json{{"param_error", p.param_ip().norm(u - s.u_exact)},
              {"relative_param_error", p.param_ip().norm(u - s.u_exact) / p.param_ip().norm(s.u_exact)},
              {"residual_exact", p.data_ip().norm(p.evaluate(u) - s.g_exact)}};
}

double default_radius(const InnerProduct& wx, const Vector& u) { return 0.5 * std::max(1.0, wx.norm(u)); }

// ---------------------------------------------------------------------------

struct SolveArgs {
  Common common;
  double eta = 0.0;
  std::string data = "synthetic";
  double delta = 0.0;
  std::uint64_t seed = 1;
};

int run_solve(const SolveArgs& a) {
  const Config cfg = load_config(a.common);
  const AnySetup setup = build_setup(a.common.problem, cfg);
  const SolverOptions opts = solver_options_from(cfg);
  if (!(a.eta > 0.0)) throw ConfigError("--eta must be positive");
  return std::visit(
      [&](const auto& s) {
        const auto& p = s.problem;
        Vector g;
        json data_info;
        if (a.data == "synthetic") {
          const NoisyData nd = make_noisy_data_detailed(s.g_exact, {a.delta, a.seed}, p.data_ip());
          g = nd.data;
          data_info = {{"source", "synthetic"}, {"delta", a.delta}, {"seed", a.seed}, {"seed_used", nd.seed_used}};
        } else {
          g = read_data_file(a.data, p.data_dim());
          data_info = {{"source", a.data}};
        }
        const TikhonovResult r = minimize(p, s.constraint, a.eta, g, opts);
        json inputs = inputs_json("solve", a.common, cfg);
        inputs["eta"] = a.eta;
        inputs["data"] = data_info;
        json result{{"solution", r}, {"errors", error_metrics(s, r.u)}};
        json diag{{"converged", r.converged},
                  {"status", r.status},
                  {"iterations", r.iterations},
                  {"stationarity", r.stationarity},
                  {"line_search_failed", r.line_search_failed}};
        emit(a.common.out, make_report(inputs, result, diag));
        return 0;
      },
      setup);
}

// ---------------------------------------------------------------------------

struct ChooseArgs {
  Common common;
  std::string rule;
  double delta = 0.0;
  std::optional<double> c_m, gamma, c_ap;
  std::string grid;
  std::uint64_t seed = 1;
};

RuleSpec rule_with_overrides(const std::string& name, const Config& cfg, std::optional<double> c_m,
                             std::optional<double> gamma, std::optional<double> c_ap) {
  RuleSpec r = rule_from(name, cfg);
  if (c_m) r.c_m = *c_m;
  if (gamma) r.gamma = *gamma;
  if (c_ap) r.c_ap = *c_ap;
  if (!(r.c_m > 1.0)) throw ConfigError("c_m must exceed 1");
  if (!(r.gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (!(r.c_ap > 0.0)) throw ConfigError("c_ap must be positive");
  return r;
}

int run_choose(const ChooseArgs& a) {
  const Config cfg = load_config(a.common);
  const AnySetup setup = build_setup(a.common.problem, cfg);
  const SolverOptions opts = solver_options_from(cfg);
  const EtaGrid grid = parse_grid(a.grid, cfg);
  const RuleSpec rule = rule_with_overrides(a.rule, cfg, a.c_m, a.gamma, a.c_ap);
  if (!(a.delta >= 0.0)) throw ConfigError("--delta must be nonnegative");
  return std::visit(
      [&](const auto& s) {
        const auto& p = s.problem;
        const Vector g = make_noisy_data(s.g_exact, {a.delta, a.seed}, p.data_ip());
        json inputs = inputs_json("choose", a.common, cfg);
        inputs["rule"] = {{"name", to_string(rule.kind)}, {"c_ap", rule.c_ap}, {"c_m", rule.c_m}, {"gamma", rule.gamma}};
        inputs["delta"] = a.delta;
        inputs["seed"] = a.seed;
        inputs["grid"] = {{"eta_min", grid.eta_min}, {"eta_max", grid.eta_max}, {"count", grid.count}};
        try {
          const ChosenParameter chosen = apply_rule(p, s.constraint, g, a.delta, rule, grid, opts);
          json result = chosen_json(chosen);
          result["errors"] = error_metrics(s, chosen.result.u);
          emit(a.common.out, make_report(inputs, result, chosen.diagnostics));
          return 0;
        } catch (const RuleFailure& f) {
          emit(a.common.out, make_report(inputs, nullptr, json{{"failure", f.what()}}));
          std::cerr << "rule failure: " << f.what() << '\n';
          return kExitRuleFailure;
        }
      },
      setup);
}

// ---------------------------------------------------------------------------

struct RateArgs {
  Common common;
  std::string rule;
  std::string deltas;
  int seeds = 5;
  std::string grid;
  std::string out_csv;
  std::string out_json;
  int workers = 1;
  bool robust = false;
  std::optional<double> c_m, gamma, c_ap;
};

int run_rate(const RateArgs& a) {
  const Config cfg = load_config(a.common);
  const AnySetup setup = build_setup(a.common.problem, cfg);
  const SolverOptions opts = solver_options_from(cfg);
  const EtaGrid grid = parse_grid(a.grid, cfg);
  const RuleSpec rule = rule_with_overrides(a.rule, cfg, a.c_m, a.gamma, a.c_ap);
  std::vector<double> deltas = a.deltas.empty() ? cfg.get_list("deltas") : Config::parse_list("--deltas", a.deltas);
  if (deltas.empty()) deltas = default_deltas();
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0.0)) throw ConfigError("deltas must be positive");
    if (i > 0 && !(deltas[i] < deltas[i - 1])) throw ConfigError("deltas must be strictly descending");
  }
  if (a.seeds < 1) throw ConfigError("--seeds must be at least 1");
  if (a.workers < 1) throw ConfigError("--workers must be at least 1");
  const auto seeds = default_seeds(a.seeds);
  return std::visit(
      [&](const auto& s) {
        RateStudyOptions ro;
        ro.robust_fit = a.robust;
        ro.workers = a.workers;
        const RateStudyResult res =
            run_rate_study(s.problem, s.constraint, s.u_exact, s.g_exact, rule, deltas, seeds, grid, opts, ro);
        if (!a.out_csv.empty()) {
          std::ostringstream csv;
          write_rate_csv(csv, res);
          write_file(a.out_csv, csv.str());
        }
        json inputs = inputs_json("rate-study", a.common, cfg);
        inputs["rule"] = {{"name", to_string(rule.kind)}, {"c_ap", rule.c_ap}, {"c_m", rule.c_m}, {"gamma", rule.gamma}};
        inputs["deltas"] = deltas;
        inputs["seeds"] = seeds;
        inputs["robust_fit"] = a.robust;
        int failed = 0;
        for (const auto& r : res.rows) failed += r.failed ? 1 : 0;
        json diag{{"failed_rows", failed}, {"fit_ok", res.fit_ok}, {"fit_message", res.fit_message}};
        const json report = make_report(inputs, rate_study_json(res), diag);
        if (!a.out_json.empty())
          write_json(a.out_json, report);
        else if (a.out_csv.empty())
          std::cout << report.dump(2) << '\n';
        std::cerr << "slope_error=" << res.slope_error << " slope_residual=" << res.slope_residual
                  << " r2=" << res.fit_r2 << " failed_rows=" << failed << '\n';
        if (!res.fit_ok) {
          std::cerr << "rate fit failed: " << res.fit_message << '\n';
          return kExitRuleFailure;
        }
        return 0;
      },
      setup);
}

// ---------------------------------------------------------------------------

struct DiagnoseArgs {
  Common common;
  std::string check;
  std::uint64_t seed = 1;
};

template <class P>
json bilinear_identity(const ProblemSetup<P>& s, const SourceFit& fit, int samples, double radius, std::uint64_t seed) {
  if constexpr (HasLocalEu<P>) {
    const auto& p = s.problem;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    double max_diff = 0.0, max_term = 0.0;
    for (int k = 0; k < samples; ++k) {
      Vector d(p.param_dim());
      for (Index i = 0; i < d.size(); ++i) d(i) = normal(rng);
      const double r = radius * (k + 1) / samples;
      const Vector u = s.constraint.project(s.u_exact + (r / p.param_ip().norm(d)) * d);
      const double direct = nonlinearity_term_direct(p, fit.representer, u, s.u_exact);
      const double bilinear = nonlinearity_term_bilinear(p, u, s.u_exact, fit.multiplier);
      max_diff = std::max(max_diff, std::abs(direct - bilinear));
      max_term = std::max(max_term, std::abs(direct));
    }
    return json{{"samples", samples},
                {"radius", radius},
                {"max_abs_difference", max_diff},
                {"max_abs_term", max_term},
                {"max_relative_difference", max_term > 0.0 ? max_diff / max_term : max_diff},
                {"fit_relative_residual", fit.relative_residual}};
  } else {
    throw ConfigError("bilinear-identity needs a problem with a pointwise e_u (scalar or potential)");
  }
}

int run_diagnose(const DiagnoseArgs& a) {
  const Config cfg = load_config(a.common);
  const AnySetup setup = build_setup(a.common.problem, cfg);
  const SolverOptions opts = solver_options_from(cfg);
  static const std::vector<std::string> checks = {"scon", "nscon", "ncon", "sosc", "classical", "bilinear-identity"};
  if (std::find(checks.begin(), checks.end(), a.check) == checks.end())
    throw ConfigError("unknown check '" + a.check + "'");
  std::optional<double> ridge;
  if (cfg.has("ridge")) ridge = cfg.get_double("ridge", 0.0);
  const int samples = static_cast<int>(cfg.get_int("samples", a.check == "bilinear-identity" ? 50 : 200));
  if (samples < 1) throw ConfigError("samples must be positive");
  return std::visit(
      [&](const auto& s) {
        using P = std::decay_t<decltype(s.problem)>;
        const auto& p = s.problem;
        const double radius = cfg.get_double("radius", default_radius(p.param_ip(), s.u_exact));
        if (!(radius > 0.0)) throw ConfigError("radius must be positive");
        json inputs = inputs_json("diagnose", a.common, cfg);
        inputs["check"] = a.check;
        inputs["seed"] = a.seed;
        json result, diag = json::object();
        if (a.check == "nscon") {
          if constexpr (HasStateEquation<P>) {
            const SourceFit fit = source_fit_nscon(p, s.constraint, s.u_exact, ridge);
            const auto keep = gradient_nondegenerate_nodes(p, s.u_exact, 0.05, 2);
            std::vector<Index> degenerate;
            for (std::size_t k = 0; k < keep.size(); ++k)
              if (!keep[k]) degenerate.push_back(static_cast<Index>(k));
            result = source_fit_json(fit);
            result["masked_relative_residual"] = fit.masked_relative_residual(keep);
            diag["degenerate_nodes"] = degenerate;
            diag["peak_in_degenerate_set"] =
                fit.peak_node >= 0 && !keep[static_cast<std::size_t>(fit.peak_node)];
          } else {
            throw ConfigError("nscon needs a problem with a state equation (potential or conductivity)");
          }
        } else {
          const SourceFit fit = source_fit_scon(p, s.constraint, s.u_exact, ridge);
          if (a.check == "scon") {
            result = source_fit_json(fit);
          } else if (a.check == "ncon") {
            const ConditionMargin m =
                ncon_margin_scan(p, s.constraint, s.u_exact, fit.representer, fit.multiplier,
                                 cfg.get_double("c_r", 0.0), cfg.get_double("eps_coercive", 1.0),
                                 std::max(samples, 100), radius, a.seed);
            result = condition_margin_json(m);
            diag["source_fit_relative_residual"] = fit.relative_residual;
          } else if (a.check == "sosc") {
            const double eta = cfg.get_double("eta", 1e-3);
            if (!(eta > 0.0)) throw ConfigError("eta must be positive");
            const TikhonovResult r = minimize(p, s.constraint, eta, s.g_exact, s.u_exact, opts);
            const ConditionMargin m =
                sosc_margin_scan(p, s.constraint, eta, r.u, s.g_exact, cfg.get_double("c_s", 0.0),
                                 cfg.get_double("eps_prime", 0.0), std::max(samples, 100), radius, a.seed);
            result = condition_margin_json(m);
            result["eta"] = eta;
            diag["minimizer"] = r;
          } else if (a.check == "classical") {
            const ClassicalConditionReport rep = classical_condition_report(
                p, s.constraint, s.u_exact, fit.representer,
                static_cast<int>(cfg.get_int("probes", 200)), a.seed, cfg.get_double("radius", 0.0));
            result = classical_json(rep);
            result["w_norm"] = p.data_ip().norm(fit.representer);
            diag["source_fit_relative_residual"] = fit.relative_residual;
          } else {
            result = bilinear_identity(s, fit, samples, radius, a.seed);
          }
        }
        emit(a.common.out, make_report(inputs, result, diag));
        return 0;
      },
      setup);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained Tikhonov regularization: solve, choose eta, run rate studies, check conditions"};
  app.set_version_flag("--version", std::string(tikhonov::kVersion));
  app.require_subcommand(1);

  SolveArgs solve;
  auto* solve_cmd = app.add_subcommand("solve", "minimize the Tikhonov functional for one eta");
  add_common(solve_cmd, solve.common);
  solve_cmd->add_option("--eta", solve.eta, "regularization parameter")->required();
  solve_cmd->add_option("--data", solve.data, "data file or 'synthetic'");
  solve_cmd->add_option("--delta", solve.delta, "noise level for synthetic data");
  solve_cmd->add_option("--seed", solve.seed, "noise seed for synthetic data");

  ChooseArgs choose;
  auto* choose_cmd = app.add_subcommand("choose", "select eta by a parameter-choice rule");
  add_common(choose_cmd, choose.common);
  choose_cmd->add_option("--rule", choose.rule, "a-priori, discrepancy, balancing or hanke-raus")->required();
  choose_cmd->add_option("--delta", choose.delta, "noise level")->required();
  choose_cmd->add_option("--c-m", choose.c_m, "discrepancy factor");
  choose_cmd->add_option("--gamma", choose.gamma, "balancing exponent");
  choose_cmd->add_option("--c-ap", choose.c_ap, "a priori constant (eta = c_ap delta)");
  choose_cmd->add_option("--grid", choose.grid, "eta grid min,max,count");
  choose_cmd->add_option("--seed", choose.seed, "noise seed");

  RateArgs rate;
  auto* rate_cmd = app.add_subcommand("rate-study", "sweep noise levels and fit convergence rates");
  add_common(rate_cmd, rate.common, false);
  rate_cmd->add_option("--rule", rate.rule, "a-priori, discrepancy, balancing or hanke-raus")->required();
  rate_cmd->add_option("--deltas", rate.deltas, "descending comma-separated noise levels");
  rate_cmd->add_option("--seeds", rate.seeds, "number of seeds (1..n)");
  rate_cmd->add_option("--grid", rate.grid, "eta grid min,max,count");
  rate_cmd->add_option("--out-csv", rate.out_csv, "per-row CSV");
  rate_cmd->add_option("--out-json", rate.out_json, "JSON report");
  rate_cmd->add_option("--workers", rate.workers, "worker threads");
  rate_cmd->add_flag("--robust", rate.robust, "median-of-pairwise-slopes fit");
  rate_cmd->add_option("--c-m", rate.c_m, "discrepancy factor");
  rate_cmd->add_option("--gamma", rate.gamma, "balancing exponent");
  rate_cmd->add_option("--c-ap", rate.c_ap, "a priori constant");

  DiagnoseArgs diagnose;
  auto* diag_cmd = app.add_subcommand("diagnose", "check source and nonlinearity conditions at the exact solution");
  add_common(diag_cmd, diagnose.common);
  diag_cmd->add_option("--check", diagnose.check, "scon, nscon, ncon, sosc, classical or bilinear-identity")->required();
  diag_cmd->add_option("--seed", diagnose.seed, "sampling seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*solve_cmd) return run_solve(solve);
    if (*choose_cmd) return run_choose(choose);
    if (*rate_cmd) return run_rate(rate);
    if (*diag_cmd) return run_diagnose(diagnose);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const RuleFailure& e) {
    std::cerr << "rule failure: " << e.what() << '\n';
    return kExitRuleFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
