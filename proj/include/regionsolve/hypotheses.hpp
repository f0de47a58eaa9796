#ifndef REGIONSOLVE_HYPOTHESES_HPP
#define REGIONSOLVE_HYPOTHESES_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "regionsolve/field.hpp"
#include "regionsolve/functionals.hpp"
#include "regionsolve/regions.hpp"

namespace regionsolve {

/// Outcome of one hypothesis check. A fail always carries a witness whose
/// violation exceeds the tolerance; a pass means the worst sampled value
/// stayed within it. Reports are certificates "up to sampling": they state
/// what was found at the given resolution, never an a.e. claim.
struct CheckReport {
    std::string hypothesis;
    enum class Verdict { pass, fail, inconclusive } verdict = Verdict::pass;
    double worst_violation = 0.0;
    Vec witness;  // (t, x1..xn); empty when no violation was found
    std::size_t samples = 0;
    double tolerance = 0.0;
    double aux = 0.0;  // H4': largest certifiable eps; H3: sup ||p2||
    std::string note;

    bool passed() const { return verdict != Verdict::fail; }
};

/// Stratified deterministic sample of the working box I x B[0,K_work]:
/// boundary shell (about 1e-3 to both sides of the boundary), mid-range and
/// far-field points, each labeled with region membership.
struct SamplePoint {
    Vec q;  // (t, x1..xn)
    bool member = false;
    bool shell = false;
};
std::vector<SamplePoint> stratified_samples(const AdmissiblePair& pair, std::size_t count,
                                            std::uint64_t seed);

CheckReport check_H0(const Region& R, std::size_t grid = 200);
CheckReport check_H0prime(const Region& R, double margin = 1e-6, std::size_t grid = 200);

CheckReport check_H1(const AdmissiblePair& pair, std::size_t samples = 10000,
                     std::uint64_t seed = 0);
CheckReport check_H3(const AdmissiblePair& pair, std::size_t samples = 10000,
                     std::uint64_t seed = 0);

/// L(t,x) = dh/dt + <grad_x h, f(p(t,x))> evaluated off R.
CheckReport check_H4(const AdmissiblePair& pair, const FieldFn& f, std::size_t samples = 10000,
                     std::uint64_t seed = 0);
/// H4 restricted to the window [t0-delta, t0+delta] demanding L <= -eps;
/// aux reports the largest certifiable eps found at this resolution.
CheckReport check_H4prime(const AdmissiblePair& pair, const FieldFn& f, double eps, double delta,
                          double t0, std::size_t samples = 10000, std::uint64_t seed = 0);
/// H4 on the interior band h in (-eps, 0); vacuous for h >= 0 surrogates.
CheckReport check_H4doubleprime(const AdmissiblePair& pair, const FieldFn& f, double eps,
                                std::size_t samples = 10000, std::uint64_t seed = 0);

/// h(a,u(a)) <= 0 or h(a,u(a)) <= h(b,u(b)) for every candidate with
/// ||u||_0 <= C (others are skipped); strict=true demands strict inequalities.
CheckReport check_H5(const std::vector<SampledPath>& candidates, const AdmissiblePair& pair,
                     double C, bool strict = false);

/// Existence of t1 with hhat(t1,.) == h(t1,.) and t2 with hhat(t2,x) != h(t2,x)
/// for all sampled x off R_{t2}; re-runs H1/H3 (and H4 when f is supplied)
/// for the hhat pair.
CheckReport check_H6(const AdmissiblePair& pair, const AdmissiblePair& hhat,
                     const FieldFn* f = nullptr, std::size_t samples = 4000,
                     std::uint64_t seed = 0);

/// The scalar comparison machinery of the barrier lemma.
struct BarrierInstance {
    std::vector<double> w;  // w on the uniform grid
    double a = 0.0, b = 1.0;
    double z = 0.0;
    enum class Mode { initial, periodic_type } mode = Mode::initial;
};

struct BarrierVerdict {
    enum class Kind { below_z, constant_k, hypotheses_violated } kind;
    double k = 0.0;  // constant value, when kind == constant_k
    std::string note;
};

struct BarrierOptions {
    double slope_tol = 1e-8;   // w' <= tol on J counts as nonincreasing
    double level_tol = 1e-9;   // node comparisons against z
    double strict_slope = -1e-8;
};

BarrierVerdict barrier_verdict(const BarrierInstance& inst, const BarrierOptions& opt = {});

}  // namespace regionsolve

#endif
