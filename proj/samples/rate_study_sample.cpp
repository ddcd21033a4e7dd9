// Scalar a priori rate study printed as a table, followed by the fitted slopes.
#include <cstdio>

#include "tikhonov/tikhonov.hpp"

int main() {
  using namespace tikhonov;
  Config cfg;
  cfg.set("eps_scale", "0.1");
  cfg.set("u_exact", "0.499");
  const auto setup = std::get<ProblemSetup<ScalarQuadratic>>(build_setup("scalar", cfg));

  RuleSpec rule;
  rule.kind = RuleKind::a_priori;
  const auto res = run_rate_study(setup.problem, setup.constraint, setup.u_exact, setup.g_exact, rule,
                                  default_deltas(), default_seeds(5), EtaGrid{});

  std::printf("%10s %12s %14s %14s\n", "delta", "eta", "|u-u*|", "|K(u)-g*|");
  for (const auto& l : res.levels)
    std::printf("%10.1e %12.3e %14.6e %14.6e\n", l.delta, l.eta, l.param_error, l.residual_exact);
  std::printf("slope(error) = %.3f  slope(residual) = %.3f  r2 = %.4f\n", res.slope_error, res.slope_residual,
              res.fit_r2);
  return res.fit_ok ? 0 : 2;
}
