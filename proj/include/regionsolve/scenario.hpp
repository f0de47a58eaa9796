#ifndef REGIONSOLVE_SCENARIO_HPP
#define REGIONSOLVE_SCENARIO_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "regionsolve/solver.hpp"

namespace regionsolve {

/// Scenario loading/validation error; `path` names the offending field.
class scenario_error : public std::runtime_error {
public:
    scenario_error(const std::string& path, const std::string& what)
        : std::runtime_error(path + ": " + what), path_(path) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

enum class PairSpecKind { construct, half_dist_sq, user };

/// Parsed scenario file: everything needed to assemble a ProblemSpec.
struct Scenario {
    double a = 0.0, b = 1.0;
    int n = 1;
    std::vector<std::string> field_exprs;
    // region
    std::shared_ptr<const Region> region;
    // pair
    PairSpecKind pair_kind = PairSpecKind::construct;
    std::optional<Expression> pair_h;
    std::vector<Expression> pair_p;  // empty unless user p given
    // functional and boundary condition
    LinearFunctional gamma;
    bool gamma_given = false;
    Vec r;
    BcKind bc = BcKind::cg2;
    // solver options
    std::size_t N = 400;
    std::size_t lambda_steps = 11;
    double abs_tol = 2.5e-9;
    std::uint64_t seed = 0;
    std::optional<OperatorKind> op;
    // requested hypothesis checks (empty -> default set)
    std::vector<std::string> checks;
};

Scenario load_scenario(const std::string& path);
Scenario parse_scenario_json(const std::string& text);

struct BuiltProblem {
    ProblemSpec spec;
    bool reflected = false;  // M < 0 handled by v = -u; negate the solution
};

/// Assembles the ProblemSpec: encodes ci/cp through Gamma, applies the
/// M < 0 reflection (field, functional, region, pair), builds constants
/// and the modified field.
BuiltProblem build_problem(const Scenario& sc);

OperatorKind default_operator(BcKind effective_kind);

/// Report serialization ("schema": 1).
std::string check_report_json(const CheckReport& rep);
std::string solve_report_json(const SolveReport& rep, const ProblemSpec& spec,
                              const std::vector<std::string>& extra_notes = {});

/// Solution CSV: t, x1..xn, h(t,u(t)), ||(t,u(t))||; 17 significant digits so
/// that a re-import reproduces residuals bit-for-bit.
void write_solution_csv(std::ostream& os, const SampledPath& u, const AdmissiblePair& pair);
SampledPath read_solution_csv(std::istream& is, double a, double b, int n);

}  // namespace regionsolve

#endif
