#include "regionsolve/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace regionsolve {

namespace {

double nrm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double sup_residual(const SampledPath& u, const SampledPath& v) {
    double worst = 0.0;
    for (std::size_t j = 0; j <= u.N; ++j) {
        double s = 0.0;
        auto a = u.at(j), b = v.at(j);
        for (std::size_t k = 0; k < a.size(); ++k) {
            double d = a[k] - b[k];
            s += d * d;
        }
        worst = std::max(worst, s);
    }
    return std::sqrt(worst);
}

// f_R along the path, sampled on the grid.
SampledPath field_along(const ProblemSpec& spec, const SampledPath& u) {
    SampledPath v(spec.a, spec.b, spec.n, spec.N);
    for (std::size_t j = 0; j <= spec.N; ++j)
        spec.fR->eval(u.node(j), u.at(j), v.at(j));
    return v;
}

// Dense LU with partial pivoting; falls back to a damped normal-equations
// solve when the matrix is numerically singular.
bool lu_solve(std::vector<double>& A, std::vector<double>& rhs, std::size_t n) {
    std::vector<std::size_t> piv(n);
    for (std::size_t i = 0; i < n; ++i) piv[i] = i;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t best = col;
        double best_val = std::fabs(A[piv[col] * n + col]);
        for (std::size_t row = col + 1; row < n; ++row) {
            double v = std::fabs(A[piv[row] * n + col]);
            if (v > best_val) {
                best_val = v;
                best = row;
            }
        }
        if (best_val < 1e-14) return false;
        std::swap(piv[col], piv[best]);
        double pivot = A[piv[col] * n + col];
        for (std::size_t row = col + 1; row < n; ++row) {
            double factor = A[piv[row] * n + col] / pivot;
            A[piv[row] * n + col] = factor;
            for (std::size_t c = col + 1; c < n; ++c)
                A[piv[row] * n + c] -= factor * A[piv[col] * n + c];
        }
    }
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = rhs[piv[i]];
        for (std::size_t c = 0; c < i; ++c) s -= A[piv[i] * n + c] * y[c];
        y[i] = s;
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = y[i];
        for (std::size_t c = i + 1; c < n; ++c) s -= A[piv[i] * n + c] * rhs[c];
        rhs[i] = s / A[piv[i] * n + i];
    }
    return true;
}

}  // namespace

void ProblemSpec::build() {
    if (!region) throw std::invalid_argument("ProblemSpec: region missing");
    if (static_cast<int>(r.size()) != n) throw std::invalid_argument("ProblemSpec: r has wrong size");
    gamma.validate();
    M = gamma_mass(gamma, N);
    if (gamma_degenerate(std::fabs(M)))
        throw std::invalid_argument("ProblemSpec: functional is degenerate, |Gamma(1)| < 1e-12");
    if (M < 0.0)
        throw std::invalid_argument("ProblemSpec: M < 0; apply the reflection before building");
    constants = compute_constants(*region, pair);
    auto c_nodes = bound_c(f, pair, N);
    fR = std::make_shared<ModifiedField>(f, region, pair, std::move(c_nodes), a, b);
    if (lambda_schedule.empty())
        for (int i = 0; i <= 10; ++i) lambda_schedule.push_back(0.1 * i);
    min_cumulative_weight = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j <= 50; ++j) {
        double s = a + (b - a) * static_cast<double>(j) / 50.0;
        min_cumulative_weight = std::min(min_cumulative_weight, cumulative_weight(gamma, s, N));
    }
}

SampledPath operator_J(const ProblemSpec& spec, double lambda, const SampledPath& u) {
    SampledPath v = field_along(spec, u);
    SampledPath F = cumulative_trapezoid(v);
    Vec theta = theta_fubini(spec.gamma, v);
    Vec gu = gamma_apply(spec.gamma, u);

    // Phi u = Gamma u - P_{MD}(Gamma u - r), MD the ball of radius M*C.
    Vec gr(gu.size());
    for (std::size_t k = 0; k < gu.size(); ++k) gr[k] = gu[k] - spec.r[k];
    Vec proj = project_ball(spec.M * spec.constants.C, gr);
    Vec phi(gu.size());
    for (std::size_t k = 0; k < gu.size(); ++k) phi[k] = gu[k] - proj[k];

    SampledPath out(spec.a, spec.b, spec.n, spec.N);
    auto ua = u.at(0);
    for (std::size_t j = 0; j <= spec.N; ++j) {
        double factor = 1.0 + lambda * (out.node(j) - spec.a);
        auto Fj = F.at(j);
        auto oj = out.at(j);
        for (std::size_t k = 0; k < oj.size(); ++k)
            oj[k] = ua[k] + lambda * Fj[k] - factor * (lambda * theta[k] - phi[k]);
    }
    return out;
}

SampledPath operator_K_paper(const ProblemSpec& spec, double lambda, const SampledPath& u) {
    SampledPath v = field_along(spec, u);
    SampledPath F = cumulative_trapezoid(v);
    Vec theta = theta_fubini(spec.gamma, v);
    Vec gu = gamma_apply(spec.gamma, u);

    // Phi~ u = P_D((Gamma u + M u(a) - r) / M), D = B[0,C].
    auto ua = u.at(0);
    Vec arg(gu.size());
    for (std::size_t k = 0; k < gu.size(); ++k)
        arg[k] = (gu[k] + spec.M * ua[k] - spec.r[k]) / spec.M;
    Vec phit = project_ball(spec.constants.C, arg);

    SampledPath out(spec.a, spec.b, spec.n, spec.N);
    for (std::size_t j = 0; j <= spec.N; ++j) {
        auto Fj = F.at(j);
        auto oj = out.at(j);
        for (std::size_t k = 0; k < oj.size(); ++k)
            oj[k] = (phit[k] - lambda * theta[k]) / spec.M + lambda * Fj[k];
    }
    return out;
}

SampledPath operator_K_projected(const ProblemSpec& spec, double lambda, const SampledPath& u) {
    SampledPath v = field_along(spec, u);
    SampledPath F = cumulative_trapezoid(v);
    Vec theta = theta_fubini(spec.gamma, v);

    // u(a) = P_D((r - lambda Theta u)/M): unsaturated fixed points satisfy
    // Gamma u = r exactly on the shared grid.
    Vec arg(theta.size());
    for (std::size_t k = 0; k < arg.size(); ++k)
        arg[k] = (spec.r[k] - lambda * theta[k]) / spec.M;
    Vec head = project_ball(spec.constants.C, arg);

    SampledPath out(spec.a, spec.b, spec.n, spec.N);
    for (std::size_t j = 0; j <= spec.N; ++j) {
        auto Fj = F.at(j);
        auto oj = out.at(j);
        for (std::size_t k = 0; k < oj.size(); ++k) oj[k] = head[k] + lambda * Fj[k];
    }
    return out;
}

namespace {

SampledPath apply_operator(const ProblemSpec& spec, OperatorKind which, double lambda,
                           const SampledPath& u) {
    switch (which) {
        case OperatorKind::J: return operator_J(spec, lambda, u);
        case OperatorKind::K_paper: return operator_K_paper(spec, lambda, u);
        case OperatorKind::K_projected: return operator_K_projected(spec, lambda, u);
    }
    throw std::logic_error("apply_operator: bad kind");
}

// Closed-form lambda = 0 solutions, used as the continuation seed.
SampledPath lambda0_seed(const ProblemSpec& spec, OperatorKind which) {
    SampledPath u(spec.a, spec.b, spec.n, spec.N);
    Vec head(static_cast<std::size_t>(spec.n), 0.0);
    if (which == OperatorKind::K_projected) {
        Vec arg(head.size());
        for (std::size_t k = 0; k < head.size(); ++k) arg[k] = spec.r[k] / spec.M;
        head = project_ball(spec.constants.C, arg);
    } else if (which == OperatorKind::J) {
        double rn = nrm2(spec.r);
        if (rn > 0.0)  // the unique lambda=0 fixed point is -C r/||r||
            for (std::size_t k = 0; k < head.size(); ++k)
                head[k] = -spec.constants.C * spec.r[k] / rn;
    } else {
        for (std::size_t k = 0; k < head.size(); ++k) head[k] = spec.r[k] / spec.M;
        head = project_ball(spec.constants.C, head);
    }
    for (std::size_t j = 0; j <= spec.N; ++j) {
        auto oj = u.at(j);
        for (std::size_t k = 0; k < oj.size(); ++k) oj[k] = head[k];
    }
    return u;
}

struct InnerResult {
    bool converged = false;
    std::size_t iterations = 0;
    std::size_t newton_steps = 0;
    double residual = 0.0;
};

// Least-squares quasi-linear step on G(u) = u - Op(lambda,u) with a forward
// finite-difference Jacobian and a halving line search.
bool quasi_newton_step(const ProblemSpec& spec, OperatorKind which, double lambda, SampledPath& u,
                       double& res) {
    std::size_t dim = u.values.size();
    SampledPath Opu = apply_operator(spec, which, lambda, u);
    std::vector<double> G(dim);
    for (std::size_t i = 0; i < dim; ++i) G[i] = u.values[i] - Opu.values[i];

    std::vector<double> Jmat(dim * dim, 0.0);
    SampledPath pert = u;
    for (std::size_t col = 0; col < dim; ++col) {
        double step = 1e-7 * (1.0 + std::fabs(u.values[col]));
        pert.values[col] = u.values[col] + step;
        SampledPath Opp = apply_operator(spec, which, lambda, pert);
        pert.values[col] = u.values[col];
        for (std::size_t row = 0; row < dim; ++row) {
            double g_row = (row == col ? u.values[row] + step : u.values[row]) - Opp.values[row];
            Jmat[row * dim + col] = (g_row - G[row]) / step;
        }
    }

    std::vector<double> delta(G.size());
    for (std::size_t i = 0; i < dim; ++i) delta[i] = -G[i];
    std::vector<double> A = Jmat;
    if (!lu_solve(A, delta, dim)) {
        // Damped normal equations J^T J + mu I.
        std::vector<double> JtJ(dim * dim, 0.0), Jtg(dim, 0.0);
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j2 = 0; j2 < dim; ++j2) {
                double s = 0.0;
                for (std::size_t k = 0; k < dim; ++k) s += Jmat[k * dim + i] * Jmat[k * dim + j2];
                JtJ[i * dim + j2] = s;
            }
        double mu = 1e-10;
        for (std::size_t i = 0; i < dim; ++i) {
            JtJ[i * dim + i] += mu;
            double s = 0.0;
            for (std::size_t k = 0; k < dim; ++k) s += Jmat[k * dim + i] * G[k];
            Jtg[i] = -s;
        }
        delta = Jtg;
        if (!lu_solve(JtJ, delta, dim)) return false;
    }

    double alpha = 1.0;
    for (int ls = 0; ls < 8; ++ls) {
        SampledPath trial = u;
        for (std::size_t i = 0; i < dim; ++i) trial.values[i] = u.values[i] + alpha * delta[i];
        SampledPath Opt = apply_operator(spec, which, lambda, trial);
        double r = sup_residual(trial, Opt);
        if (r < res) {
            u = std::move(trial);
            res = r;
            return true;
        }
        alpha *= 0.5;
    }
    return false;
}

InnerResult solve_at_lambda(const ProblemSpec& spec, OperatorKind which, double lambda,
                            SampledPath& u, std::size_t budget) {
    InnerResult out;
    double theta = 1.0;
    const double theta_min = 0.05;
    SampledPath best = u;
    SampledPath Opu = apply_operator(spec, which, lambda, u);
    double res = sup_residual(u, Opu);
    double best_res = res;
    std::size_t since_improvement = 0;

    auto tol = [&](const SampledPath& path) {
        return std::max(spec.abs_tol, spec.rel_tol * path.sup_norm());
    };

    for (out.iterations = 0; out.iterations < budget; ++out.iterations) {
        if (res <= tol(u)) {
            out.converged = true;
            break;
        }
        SampledPath trial(spec.a, spec.b, spec.n, spec.N);
        for (std::size_t i = 0; i < u.values.size(); ++i)
            trial.values[i] = (1.0 - theta) * u.values[i] + theta * Opu.values[i];
        SampledPath Opt = apply_operator(spec, which, lambda, trial);
        double trial_res = sup_residual(trial, Opt);
        if (trial_res > res && theta > theta_min) {
            theta = std::max(theta_min, 0.5 * theta);  // halve on residual increase
            continue;
        }
        u = std::move(trial);
        Opu = std::move(Opt);
        res = trial_res;
        theta = std::min(1.0, theta * 1.25);
        if (res < 0.9 * best_res) {
            best = u;
            best_res = res;
            since_improvement = 0;
        } else if (++since_improvement >= 12) {
            // Stagnation: quasi-linear rescue from the best iterate so far.
            u = best;
            res = best_res;
            ++out.newton_steps;
            if (quasi_newton_step(spec, which, lambda, u, res)) {
                Opu = apply_operator(spec, which, lambda, u);
                res = sup_residual(u, Opu);
                if (res < best_res) {
                    best = u;
                    best_res = res;
                }
            }
            since_improvement = 0;
            if (out.newton_steps > 6) break;
        }
    }
    if (!out.converged && res <= tol(u)) out.converged = true;
    if (best_res < res) {
        u = best;
        res = best_res;
        if (res <= tol(u)) out.converged = true;
    }
    out.residual = res;
    return out;
}

}  // namespace

SolveReport solve_homotopy(const ProblemSpec& spec, OperatorKind which) {
    SolveReport report;
    report.op = which;
    report.norm_bound_C = spec.constants.C;
    if (spec.min_cumulative_weight < -1e-12)
        report.notes.push_back("warning: cumulative weight g takes negative values (min " +
                               std::to_string(spec.min_cumulative_weight) +
                               "); the theory assumes a positive functional");

    std::vector<double> schedule = spec.lambda_schedule;
    std::sort(schedule.begin(), schedule.end());

    SampledPath u = lambda0_seed(spec, which);
    const std::size_t budget = 600;
    double reached = -1.0;
    bool aborted = false;

    std::size_t idx = 0;
    double prev_lambda = 0.0;
    std::vector<double> pending;  // refined lambda targets, nearest first
    for (double l : schedule) pending.push_back(l);
    while (idx < pending.size()) {
        double lambda = pending[idx];
        SampledPath attempt = u;
        InnerResult inner = solve_at_lambda(spec, which, lambda, attempt, budget);
        LambdaTraceEntry entry;
        entry.lambda = lambda;
        entry.iterations = inner.iterations;
        entry.quasi_newton_steps = inner.newton_steps;
        entry.residual = inner.residual;
        entry.sup_norm = attempt.sup_norm();
        entry.converged = inner.converged;
        report.lambda_trace.push_back(entry);
        if (inner.converged) {
            u = std::move(attempt);
            report.lambda_solutions.push_back(u);
            reached = lambda;
            prev_lambda = lambda;
            ++idx;
            continue;
        }
        // Halve the lambda step (floor 1e-3 on the step size).
        double step = lambda - prev_lambda;
        if (step <= 1e-3) {
            report.notes.push_back("non-convergence at lambda=" + std::to_string(lambda) +
                                   " with minimal step; aborting continuation");
            aborted = true;
            break;
        }
        pending.insert(pending.begin() + static_cast<std::ptrdiff_t>(idx),
                       prev_lambda + 0.5 * step);
    }

    report.converged = !aborted && reached >= schedule.back() - 1e-15;
    report.solution = u;
    double final_lambda = report.converged ? schedule.back() : std::max(reached, 0.0);
    verify_solution(spec, u, which, final_lambda, report);

    if (report.converged && report.containment_max_h > 1e-6)
        report.notes.push_back(
            "containment failed at lambda = 1: the solution leaves R; this points at the "
            "(H4)/(H5) certification, re-run the checks");

    // Post assert: every accepted iterate obeys the a-priori norm bound.
    for (const auto& entry : report.lambda_trace)
        if (entry.converged && entry.sup_norm > spec.constants.C + 1e-6)
            report.notes.push_back("a-priori bound violated at lambda=" +
                                   std::to_string(entry.lambda) + ": sup norm " +
                                   std::to_string(entry.sup_norm) + " > C = " +
                                   std::to_string(spec.constants.C));
    return report;
}

void verify_solution(const ProblemSpec& spec, const SampledPath& u, OperatorKind which,
                     double lambda, SolveReport& report) {
    std::size_t nx = static_cast<std::size_t>(spec.n);

    SampledPath Opu = apply_operator(spec, which, lambda, u);
    report.fixed_point_residual = sup_residual(u, Opu);
    report.sup_norm = u.sup_norm();

    // ODE residual by midpoint finite differences against lambda f_R.
    double h = u.h();
    double worst_ode = 0.0;
    Vec fmid(nx), xmid(nx);
    for (std::size_t j = 0; j < u.N; ++j) {
        auto lo = u.at(j), hi = u.at(j + 1);
        double tm = 0.5 * (u.node(j) + u.node(j + 1));
        for (std::size_t k = 0; k < nx; ++k) xmid[k] = 0.5 * (lo[k] + hi[k]);
        spec.fR->eval(tm, xmid, fmid);
        double s = 0.0;
        for (std::size_t k = 0; k < nx; ++k) {
            double d = (hi[k] - lo[k]) / h - lambda * fmid[k];
            s += d * d;
        }
        worst_ode = std::max(worst_ode, std::sqrt(s));
    }
    report.ode_residual = worst_ode;

    // Boundary residual per kind.
    Vec gu = gamma_apply(spec.gamma, u);
    Vec bc(nx);
    if (spec.bc_kind == BcKind::cg) {
        auto ua = u.at(0);
        for (std::size_t k = 0; k < nx; ++k)
            bc[k] = gu[k] - spec.M * ua[k] - spec.r[k];  // Gamma(u - u(a)) - r
    } else {
        for (std::size_t k = 0; k < nx; ++k) bc[k] = gu[k] - spec.r[k];
    }
    report.bc_residual = nrm2(bc);

    // Condition (8): u(a) = P_D((Gamma u - r)/M). A fixed-point identity of
    // the J route (the cg problem); meaningless for the K operators.
    report.condition8_residual = 0.0;
    if (which == OperatorKind::J) {
        Vec arg(nx);
        for (std::size_t k = 0; k < nx; ++k) arg[k] = (gu[k] - spec.r[k]) / spec.M;
        Vec proj = project_ball(spec.constants.C, arg);
        auto ua = u.at(0);
        double s = 0.0;
        for (std::size_t k = 0; k < nx; ++k) {
            double d = ua[k] - proj[k];
            s += d * d;
        }
        report.condition8_residual = std::sqrt(s);
    }

    if (which == OperatorKind::K_paper) {
        auto ua = u.at(0);
        Vec arg2(nx);
        for (std::size_t k = 0; k < nx; ++k)
            arg2[k] = (gu[k] + spec.M * ua[k] - spec.r[k]) / spec.M;
        Vec phit = project_ball(spec.constants.C, arg2);
        double s = 0.0;
        for (std::size_t k = 0; k < nx; ++k) {
            double d = gu[k] - phit[k];
            s += d * d;
        }
        report.gamma_phi_residual = std::sqrt(s);
    }

    // Containment and the barrier diagnostic on w(t) = h(t, u(t)), z = 0.
    double max_h = -std::numeric_limits<double>::infinity();
    double max_dist = 0.0;
    BarrierInstance barrier;
    barrier.a = spec.a;
    barrier.b = spec.b;
    barrier.z = 0.0;
    barrier.w.resize(u.N + 1);
    for (std::size_t j = 0; j <= u.N; ++j) {
        double t = u.node(j);
        double hv = spec.pair.h(t, u.at(j));
        barrier.w[j] = hv;
        max_h = std::max(max_h, hv);
        Vec q(nx + 1);
        q[0] = t;
        auto uj = u.at(j);
        for (std::size_t k = 0; k < nx; ++k) q[k + 1] = uj[k];
        max_dist = std::max(max_dist, spec.region->distance(q));
    }
    report.containment_max_h = max_h;
    report.containment_max_dist = max_dist;
    report.interior_margin = max_h;
    barrier.mode = barrier.w.front() <= 1e-12 ? BarrierInstance::Mode::initial
                                              : BarrierInstance::Mode::periodic_type;
    report.barrier = barrier_verdict(barrier);

    // Inequality (10): h(t,u(t)) must not increase while positive.
    double worst_increase = 0.0;
    for (std::size_t j = 0; j < u.N; ++j)
        if (std::max(barrier.w[j], barrier.w[j + 1]) > 1e-12)
            worst_increase = std::max(worst_increase, barrier.w[j + 1] - barrier.w[j]);
    report.h_monotonicity_violation = worst_increase;
}

CheckReport interior_check(const ProblemSpec& spec, const SampledPath& u) {
    CheckReport rep;
    rep.hypothesis = "interior";
    rep.tolerance = 1e-6;
    if (spec.pair.h_nonnegative) {
        rep.verdict = CheckReport::Verdict::inconclusive;
        rep.note = "not applicable (h >= 0): the sublevel interior of h is empty";
        return rep;
    }
    std::size_t nx = static_cast<std::size_t>(spec.n);
    double min_depth = std::numeric_limits<double>::infinity();
    std::size_t argmin = 0;
    double max_h = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j <= u.N; ++j) {
        Vec q(nx + 1);
        q[0] = u.node(j);
        auto uj = u.at(j);
        for (std::size_t k = 0; k < nx; ++k) q[k + 1] = uj[k];
        double depth = spec.region->slice_depth(q);
        if (depth < min_depth) {
            min_depth = depth;
            argmin = j;
        }
        max_h = std::max(max_h, spec.pair.h(q[0], std::span<const double>(q).subspan(1)));
    }
    rep.samples = u.N + 1;
    rep.worst_violation = std::max(0.0, rep.tolerance - min_depth);
    rep.aux = min_depth;
    rep.note = "min slice boundary distance " + std::to_string(min_depth) + " at node " +
               std::to_string(argmin);
    if (min_depth < rep.tolerance || max_h >= 0.0) {
        rep.verdict = CheckReport::Verdict::fail;
        Vec q(nx + 1);
        q[0] = u.node(argmin);
        auto uj = u.at(argmin);
        for (std::size_t k = 0; k < nx; ++k) q[k + 1] = uj[k];
        rep.witness = q;
    }
    return rep;
}

}  // namespace regionsolve
