#ifndef REGIONSOLVE_SOLVER_HPP
#define REGIONSOLVE_SOLVER_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "regionsolve/field.hpp"
#include "regionsolve/functionals.hpp"
#include "regionsolve/hypotheses.hpp"
#include "regionsolve/regions.hpp"

namespace regionsolve {

enum class BcKind { cg, cg2, ci, cp };
enum class OperatorKind { J, K_paper, K_projected };

/// Fully assembled continuation problem. ci and cp arrive encoded:
/// ci as cg2 with Gamma u = u(a), cp as cg with Gamma u = u(b) and r = 0.
/// The functional mass must already be positive (reflection is applied
/// upstream, in scenario loading).
struct ProblemSpec {
    double a = 0.0, b = 1.0;
    int n = 1;
    FieldFn f;
    std::shared_ptr<const Region> region;
    AdmissiblePair pair;
    LinearFunctional gamma;
    Vec r;
    BcKind bc_kind = BcKind::cg2;       // effective kind (cg or cg2 after encoding)
    BcKind declared_kind = BcKind::cg2; // what the scenario asked for
    std::size_t N = 400;
    std::vector<double> lambda_schedule;  // default 0, 0.1, ..., 1
    double abs_tol = 2.5e-9;              // stop at sup residual <= abs_tol
    double rel_tol = 1e-10;
    std::uint64_t seed = 0;

    // Derived at build(): M, constants, damping bound, modified field.
    double M = 0.0;
    Constants constants;
    std::shared_ptr<const ModifiedField> fR;
    double min_cumulative_weight = 0.0;  // min g(s) on the grid (warning if < 0)

    void build();  // computes the derived members; throws on degenerate M
};

struct LambdaTraceEntry {
    double lambda = 0.0;
    std::size_t iterations = 0;
    std::size_t quasi_newton_steps = 0;
    double residual = 0.0;
    double sup_norm = 0.0;
    bool converged = false;
};

struct SolveReport {
    SampledPath solution;
    bool converged = false;
    OperatorKind op = OperatorKind::K_projected;
    std::vector<LambdaTraceEntry> lambda_trace;
    std::vector<SampledPath> lambda_solutions;  // converged path per accepted lambda
    double fixed_point_residual = 0.0;
    double ode_residual = 0.0;          // midpoint FD vs lambda f_R
    double bc_residual = 0.0;           // per bc_kind
    double condition8_residual = 0.0;   // ||u(a) - P_D((Gamma u - r)/M)||
    double gamma_phi_residual = 0.0;    // K_paper: ||Gamma u - Phi~ u||
    double containment_max_h = 0.0;     // max_j h(t_j, u_j)
    double containment_max_dist = 0.0;  // max_j d_R(t_j, u_j)
    double sup_norm = 0.0;
    double norm_bound_C = 0.0;
    double h_monotonicity_violation = 0.0;  // max increase of h(t,u(t)) on {h>0}
    BarrierVerdict barrier;
    double interior_margin = 0.0;  // max h over nodes
    std::vector<std::string> notes;
};

/// One application of the continuation operators to a path on the problem grid.
SampledPath operator_J(const ProblemSpec& spec, double lambda, const SampledPath& u);
SampledPath operator_K_paper(const ProblemSpec& spec, double lambda, const SampledPath& u);
SampledPath operator_K_projected(const ProblemSpec& spec, double lambda, const SampledPath& u);

/// Continuation over the lambda schedule with warm starts. Inner iteration is
/// damped Picard (adaptive relaxation in [0.05,1], halved on residual
/// increase) with a least-squares quasi-linear step on u - Op(lambda,u) when
/// Picard stagnates; lambda steps are halved on non-convergence (floor 1e-3).
SolveReport solve_homotopy(const ProblemSpec& spec, OperatorKind which);

/// Recomputes all report residuals for a given path (pure; no iteration).
void verify_solution(const ProblemSpec& spec, const SampledPath& u, OperatorKind which,
                     double lambda, SolveReport& report);

/// Strict-region conclusion: every node strictly inside R (slice boundary
/// distance >= 1e-6 and h < 0 where h takes negative values). Reports the
/// minimum boundary distance and its argmin node; "not applicable" when the
/// pair's h is a nonnegative surrogate.
CheckReport interior_check(const ProblemSpec& spec, const SampledPath& u);

}  // namespace regionsolve

#endif
