#ifndef REGIONSOLVE_CLI_HPP
#define REGIONSOLVE_CLI_HPP

#include <iosfwd>
#include <optional>
#include <string>

#include "regionsolve/scenario.hpp"

namespace regionsolve {

// Exit codes shared by all commands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitHypothesisFail = 2;
inline constexpr int kExitNonConvergence = 3;
inline constexpr int kExitContainmentFail = 4;

struct SolveOptions {
    std::optional<OperatorKind> op;
    std::optional<std::size_t> N;
    std::optional<std::string> csv_path;
};

/// Runs the requested hypothesis suite; prints a JSON report to `out`.
int cmd_check(const Scenario& sc, std::ostream& out);

/// solve_homotopy + verify_solution; optionally writes the solution CSV.
int cmd_solve(const Scenario& sc, const SolveOptions& opt, std::ostream& out);

/// Prints a summary of the pair the scenario induces (bounds, quick checks).
int cmd_construct_pair(const Scenario& sc, std::ostream& out);

/// The built-in worked example: system x' = -2x e^{-y}, y' = -y e^{-x} on
/// [0,1] with unit-mean integral conditions, R the radius-2 ball in (t,x,y),
/// h = (1/2) d_R^2, p = P_R. Asserts containment (max norm <= 2 + 1e-6) and
/// boundary residual <= 1e-4 at N = 400.
int cmd_reproduce_example(std::ostream& out, const std::optional<std::string>& csv_path = {});

/// The example scenario above, exposed for tests.
Scenario builtin_example_scenario();

/// Scenario seed override from REGION_SOLVE_SEED, when set.
void apply_seed_env(Scenario& sc);

}  // namespace regionsolve

#endif
