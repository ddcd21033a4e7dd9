#pragma once

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "tikhonov/diagnostics.hpp"
#include "tikhonov/harness.hpp"
#include "tikhonov/rules.hpp"

namespace tikhonov {

using json = nlohmann::ordered_json;

inline json vector_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline void to_json(json& j, const TikhonovResult& r) {
  j = json{{"eta", r.eta},
           {"residual_norm", r.residual_norm},
           {"penalty", r.penalty},
           {"value", r.value},
           {"iterations", r.iterations},
           {"converged", r.converged},
           {"status", r.status},
           {"stationarity", r.stationarity},
           {"backtracks", r.backtracks},
           {"u", vector_json(r.u)}};
}

inline void to_json(json& j, const GridSample& s) {
  j = json{{"eta", s.eta},           {"residual", s.residual}, {"penalty", s.penalty},
           {"value", s.value},       {"surrogate", s.surrogate}, {"converged", s.converged}};
}

inline void to_json(json& j, const RuleDiagnostics& d) {
  j = json{{"samples", d.samples},
           {"target_residual", d.target_residual},
           {"bisection_steps", d.bisection_steps},
           {"bracket_low", d.bracket_low},
           {"bracket_high", d.bracket_high},
           {"residual_monotone", d.residual_monotone},
           {"grid_argmin_eta", d.grid_argmin_eta},
           {"grid_argmin_surrogate", d.grid_argmin_surrogate},
           {"refinement_trajectory", d.refinement_trajectory},
           {"refinement_accepted", d.refinement_accepted},
           {"balancing_mismatch", d.balancing_mismatch},
           {"excluded_zero_residual", d.excluded_zero_residual},
           {"failed_solves", d.failed_solves},
           {"notes", d.notes}};
}

inline json chosen_json(const ChosenParameter& c) {
  return json{{"rule", to_string(c.rule)},
              {"eta_star", c.eta_star},
              {"realized_residual", c.realized_residual},
              {"solution", c.result}};
}

inline void to_json(json& j, const RateRow& r) {
  j = json{{"delta", r.delta},
           {"seed", r.seed},
           {"eta", r.eta},
           {"param_error", r.param_error},
           {"residual_exact", r.residual_exact},
           {"realized_residual", r.realized_residual},
           {"converged", r.converged},
           {"failed", r.failed}};
  if (r.failed) j["failure"] = r.failure;
}

inline void to_json(json& j, const RateLevel& l) {
  j = json{{"delta", l.delta},
           {"survivors", l.survivors},
           {"eta", l.eta},
           {"param_error", l.param_error},
           {"residual_exact", l.residual_exact},
           {"realized_residual", l.realized_residual}};
}

inline json rate_study_json(const RateStudyResult& r) {
  return json{{"slope_error", r.slope_error},
              {"slope_residual", r.slope_residual},
              {"fit_r2", r.fit_r2},
              {"fit_r2_residual", r.fit_r2_residual},
              {"fit_ok", r.fit_ok},
              {"fit_message", r.fit_message},
              {"levels", r.levels},
              {"rows", r.rows}};
}

inline json source_fit_json(const SourceFit& f) {
  return json{{"kind", f.kind == SourceKind::scon ? "scon" : "nscon"},
              {"relative_residual", f.relative_residual},
              {"fit_regularization", f.fit_regularization},
              {"sweeps", f.sweeps},
              {"peak_node", f.peak_node},
              {"peak_relative_residual", f.peak_relative_residual},
              {"representer", vector_json(f.representer)},
              {"multiplier", vector_json(f.multiplier)},
              {"pointwise_residual", vector_json(f.pointwise_residual)}};
}

inline json condition_margin_json(const ConditionMargin& m) {
  const bool ncon = m.condition == "ncon";
  json j{{"condition", m.condition},
         {"samples", m.samples},
         {"min_margin", m.min_margin},
         {"holds", m.min_margin >= 0.0},
         {"worst_radius", m.worst_radius},
         {ncon ? "c_r" : "c_s", m.parameters.first},
         {ncon ? "eps" : "eps_prime", m.parameters.second},
         {"worst_point", vector_json(m.worst_point)}};
  if (!std::isnan(m.identity_max_error)) j["identity_max_error"] = m.identity_max_error;
  return j;
}

inline json classical_json(const ClassicalConditionReport& r) {
  return json{{"L", r.L_est},
              {"L_times_w", r.L_times_w},
              {"satisfied", r.satisfied},
              {"exact_constant", r.exact_constant},
              {"probes", r.probes}};
}

inline json make_report(json inputs, json result, json diagnostics) {
  return json{{"inputs", std::move(inputs)},
              {"result", std::move(result)},
              {"diagnostics", std::move(diagnostics)},
              {"version", kVersion}};
}

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_rate_csv(std::ostream& out, const RateStudyResult& r) {
  out << "delta,seed,eta,param_error,residual_exact,realized_residual,converged\n";
  for (const RateRow& row : r.rows) {
    out << format_g17(row.delta) << ',' << row.seed << ',' << format_g17(row.eta) << ','
        << format_g17(row.param_error) << ',' << format_g17(row.residual_exact) << ','
        << format_g17(row.realized_residual) << ',' << (row.converged ? 1 : 0) << '\n';
  }
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << contents;
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline void write_json(const std::string& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

}  // namespace tikhonov
