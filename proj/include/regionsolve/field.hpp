#ifndef REGIONSOLVE_FIELD_HPP
#define REGIONSOLVE_FIELD_HPP

#include <memory>
#include <span>
#include <vector>

#include "regionsolve/functionals.hpp"
#include "regionsolve/regions.hpp"

namespace regionsolve {

/// Wraps component expressions f_i(t, x1..xn) as a field evaluator.
FieldFn field_from_expressions(std::vector<Expression> components);

/// Clamp of v into the origin ball of the given radius (P_D when the ball
/// is D = B[0,C]).
Vec project_ball(double radius, std::span<const double> v);

/// Both sides of the scaling identity alpha P_D(x) = P_{alpha D}(alpha x),
/// computed by independent clamp formulas.
struct ScaledProjection {
    Vec projection;   // P_D(x)
    Vec lhs;          // alpha P_D(x)
    Vec rhs;          // P_{alpha D}(alpha x)
    double discrepancy;  // ||lhs - rhs||
};
ScaledProjection scaled_projection(double C, double alpha, std::span<const double> x);

/// A-priori constants of the continuation problem:
///   m = max ||x|| over pi_2(R),  C = max{m, 1 + ||p2||_0},  K = C + 1.
/// D = B[0,C] hosts the boundary projection, U = {u : ||u||_0 < K}.
struct Constants {
    double m = 0.0;
    double C = 0.0;
    double K = 0.0;
};
Constants compute_constants(const Region& R, const AdmissiblePair& pair);

/// The modified vector field
///   f_R(t,x) = f(t,x)                          on R (h <= 0)
///            = f(p(t,x)) + c(t)(p2(t,x) - x)   off R,
/// with c(t) strictly dominating ||f(p(t,x))||.
class ModifiedField {
public:
    ModifiedField(FieldFn f, std::shared_ptr<const Region> region, AdmissiblePair pair,
                  std::vector<double> c_nodes, double a, double b);

    /// c(t), linear interpolation between grid nodes.
    double damping(double t) const;

    void eval(double t, std::span<const double> x, std::span<double> out) const;
    /// f evaluated after retraction, f(p(t,x)); used by the H4 checks.
    void eval_at_p(double t, std::span<const double> x, std::span<double> out) const;

    const AdmissiblePair& pair() const { return pair_; }
    const Region& region() const { return *region_; }
    const FieldFn& base() const { return f_; }

private:
    FieldFn f_;
    std::shared_ptr<const Region> region_;
    AdmissiblePair pair_;
    std::vector<double> c_;
    double a_, b_;
};

/// c(t_j) := 1.1 * max over a sample of the p-image of ||f(p(t_j,x))|| + 1.
/// Throws if f is non-finite anywhere on the sampled p-image.
std::vector<double> bound_c(const FieldFn& f, const AdmissiblePair& pair, std::size_t N,
                            int samples_per_node = 2000);

}  // namespace regionsolve

#endif
