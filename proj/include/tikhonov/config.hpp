#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "tikhonov/harness.hpp"
#include "tikhonov/problems.hpp"
#include "tikhonov/rules.hpp"
#include "tikhonov/solver.hpp"

namespace tikhonov {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` settings. Blank lines and text after '#' are ignored.
class Config {
 public:
  Config() = default;

  static Config parse(std::istream& in, const std::string& origin = "config") {
    Config cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
      const std::string key = trim(trimmed.substr(0, eq));
      if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
      cfg.set(key, trim(trimmed.substr(eq + 1)));
    }
    return cfg;
  }

  static Config from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse(in, path);
  }

  void set(const std::string& key, const std::string& value) {
    if (!known_keys().count(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
  }

  /// Apply a `key=value` override.
  void set_assignment(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override must look like key=value: '" + assignment + "'");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : to_double(key, it->second);
  }

  long get_int(const std::string& key, long fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t pos = 0;
      const long v = std::stol(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("trailing text");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' expects an integer, got '" + it->second + "'");
    }
  }

  std::vector<double> get_list(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return {};
    return parse_list(key, it->second);
  }

  static std::vector<double> parse_list(const std::string& what, const std::string& text) {
    std::vector<double> out;
    std::string item;
    std::stringstream ss(text);
    while (std::getline(ss, item, ',')) {
      const std::string t = trim(item);
      if (!t.empty()) out.push_back(to_double(what, t));
    }
    return out;
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

 private:
  static double to_double(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
    if (t == "-inf") return -std::numeric_limits<double>::infinity();
    try {
      std::size_t pos = 0;
      const double v = std::stod(t, &pos);
      if (pos != t.size()) throw std::invalid_argument("trailing text");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("'" + key + "' expects a number, got '" + t + "'");
    }
  }

  static const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "problem", "eps_scale", "g_exact", "u_exact", "n", "f", "f_values", "lower", "upper",
        "c0", "c1", "profile", "profile_value", "amplitude", "custom_values", "eta_min", "eta_max",
        "eta_count", "max_iter", "grad_tol", "c_m", "c_ap", "gamma", "deltas", "seeds", "workers",
        "samples", "radius", "c_r", "eps_coercive", "c_s", "eps_prime", "eta", "ridge", "probes"};
    return keys;
  }

  std::map<std::string, std::string> values_;
};

/// A problem together with its constraint set, exact solution and exact data.
template <class P>
struct ProblemSetup {
  std::string name;
  P problem;
  ConstraintSet constraint;
  Vector u_exact;
  Vector g_exact;
};

using AnySetup = std::variant<ProblemSetup<ScalarQuadratic>, ProblemSetup<Potential1D>, ProblemSetup<Conductivity1D>>;

namespace detail {

inline Vector exact_profile(const pde1d::Grid1D& grid, const Config& cfg) {
  const std::string profile = cfg.get_string("profile", "one-plus-half-sine");
  const double pi = std::numbers::pi;
  if (profile == "constant") {
    const double v = cfg.get_double("profile_value", 1.0);
    return Vector::Constant(grid.n(), v);
  }
  if (profile == "one-plus-half-sine") {
    const double a = cfg.get_double("amplitude", 0.5);
    return grid.sample([&](double x) { return 1.0 + a * std::sin(2.0 * pi * x); });
  }
  if (profile == "sine-bump") {
    const double a = cfg.get_double("amplitude", 10.0);
    return grid.sample([&](double x) { return a * x * (1.0 - x) * std::sin(pi * x); });
  }
  if (profile == "custom") {
    const auto vals = cfg.get_list("custom_values");
    if (static_cast<Index>(vals.size()) != grid.n())
      throw ConfigError("custom_values needs " + std::to_string(grid.n()) + " nodal values, got " +
                        std::to_string(vals.size()));
    return Eigen::Map<const Vector>(vals.data(), static_cast<Index>(vals.size()));
  }
  throw ConfigError("unknown profile '" + profile + "' (constant, one-plus-half-sine, sine-bump, custom)");
}

inline Vector source_term(Index n, const Config& cfg) {
  if (cfg.has("f_values")) {
    const auto vals = cfg.get_list("f_values");
    if (static_cast<Index>(vals.size()) != n)
      throw ConfigError("f_values needs " + std::to_string(n) + " entries");
    return Eigen::Map<const Vector>(vals.data(), n);
  }
  return Vector::Constant(n, cfg.get_double("f", 2.0));
}

template <class P>
ProblemSetup<P> finish(std::string name, P p, ConstraintSet c, Vector u_exact) {
  if (!c.contains(u_exact)) throw ConfigError("exact solution violates the constraint set");
  Vector g;
  try {
    g = p.evaluate(u_exact);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("cannot evaluate the exact data: ") + e.what());
  }
  return {std::move(name), std::move(p), std::move(c), std::move(u_exact), std::move(g)};
}

}  // namespace detail

inline AnySetup build_setup(const std::string& name, const Config& cfg) {
  try {
    if (name == "scalar") {
      const double eps = cfg.get_double("eps_scale", 0.1);
      ScalarQuadratic p(eps);
      double u;
      if (cfg.has("u_exact")) {
        if (cfg.has("g_exact")) throw ConfigError("give either u_exact or g_exact, not both");
        u = cfg.get_double("u_exact", 0.0);
        if (!(u >= 0.0 && u < 0.5)) throw ConfigError("scalar u_exact must lie in [0, 1/2)");
      } else {
        u = scalar_exact_solution(eps, cfg.get_double("g_exact", 0.016));
      }
      ConstraintSet c(Vector::Constant(1, cfg.get_double("lower", -std::numeric_limits<double>::infinity())),
                      Vector::Constant(1, cfg.get_double("upper", std::numeric_limits<double>::infinity())));
      return detail::finish(name, std::move(p), std::move(c), Vector::Constant(1, u));
    }
    const long n = cfg.get_int("n", 99);
    if (n < 3) throw ConfigError("n must be at least 3");
    if (name == "potential") {
      const double lower = cfg.get_double("lower", 0.0);
      if (lower < 0.0) throw ConfigError("potential lower bound must be nonnegative");
      pde1d::Grid1D grid(n);
      const auto w = pde1d::discrete_h1_norms(grid);
      ConstraintSet c = ConstraintSet::box(n, lower, cfg.get_double("upper", std::numeric_limits<double>::infinity()));
      Potential1D p(grid, detail::source_term(n, cfg), w.mass, w.mass, c);
      Vector u = detail::exact_profile(grid, cfg);
      return detail::finish(name, std::move(p), std::move(c), std::move(u));
    }
    if (name == "conductivity") {
      const double c0 = cfg.get_double("c0", 0.1), c1 = cfg.get_double("c1", 10.0);
      Conductivity1D p = make_conductivity(n, detail::source_term(n, cfg), c0, c1);
      ConstraintSet c = p.default_constraint();
      Vector u = detail::exact_profile(p.grid(), cfg);
      return detail::finish(name, std::move(p), std::move(c), std::move(u));
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("unknown problem '" + name + "' (scalar, potential, conductivity)");
}

inline EtaGrid grid_from(const Config& cfg) {
  EtaGrid g;
  g.eta_min = cfg.get_double("eta_min", g.eta_min);
  g.eta_max = cfg.get_double("eta_max", g.eta_max);
  g.count = static_cast<int>(cfg.get_int("eta_count", g.count));
  try {
    g.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return g;
}

inline SolverOptions solver_options_from(const Config& cfg) {
  SolverOptions o;
  o.max_iter = static_cast<int>(cfg.get_int("max_iter", o.max_iter));
  o.grad_tol = cfg.get_double("grad_tol", o.grad_tol);
  try {
    o.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return o;
}

inline RuleSpec rule_from(const std::string& name, const Config& cfg) {
  RuleSpec r;
  try {
    r.kind = parse_rule(name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  r.c_ap = cfg.get_double("c_ap", r.c_ap);
  r.c_m = cfg.get_double("c_m", r.c_m);
  r.gamma = cfg.get_double("gamma", r.gamma);
  return r;
}

}  // namespace tikhonov
