#ifndef REGIONSOLVE_REGIONS_HPP
#define REGIONSOLVE_REGIONS_HPP

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "regionsolve/expr.hpp"

namespace regionsolve {

using Vec = std::vector<double>;

// Convex building blocks in (t,x)-space. Points are stored as q = (t, x1..xn),
// size n+1. The time slab [a,b] x R^n is an implicit extra constraint of
// every region.
struct BallPrim {
    Vec center;  // size n+1
    double radius;
};
struct XBallPrim {  // cylinder I x B[center_x, radius]
    Vec center_x;   // size n
    double radius;
};
struct BoxPrim {
    Vec lo, hi;  // size n+1
};
struct HalfspacePrim {  // <normal, q> <= offset
    Vec normal;         // size n+1
    double offset;
};
using ConvexPrimitive = std::variant<BallPrim, XBallPrim, BoxPrim, HalfspacePrim>;

struct ConvexShape {
    std::vector<ConvexPrimitive> members;
};
struct SublevelShape {
    Expression h;       // over (t, x1..xn); membership is h <= 0
    double bound;       // compactness: ||q|| <= bound required
    bool mirror_x = false;
};

/// Compact region R inside [a,b] x R^n.
class Region {
public:
    Region(double a, double b, int n, ConvexShape shape);
    Region(double a, double b, int n, SublevelShape shape);

    double a() const { return a_; }
    double b() const { return b_; }
    int n() const { return n_; }
    bool convex() const { return std::holds_alternative<ConvexShape>(shape_); }
    const ConvexShape& convex_shape() const { return std::get<ConvexShape>(shape_); }

    bool contains(std::span<const double> q, double tol = 0.0) const;

    /// Nearest point of R (convex shapes only; Dykstra over the members and
    /// the time slab). Throws std::domain_error for sublevel shapes.
    Vec project(std::span<const double> q) const;

    /// d_R(q). Exact (to the projection tolerance) for convex shapes; an
    /// upper bound from multistart descent for sublevel shapes.
    double distance(std::span<const double> q) const;

    /// Radius r with pi_2(R) within B[0,r] (exact or a safe upper bound).
    double pi2_radius() const;
    /// m = max ||x|| over pi_2(R); exact for single balls/boxes/cylinders,
    /// an upper bound otherwise.
    double max_x_norm() const;

    /// Find a member of the slice R_t; nullopt if (numerically) empty.
    std::optional<Vec> slice_member(double t) const;
    /// Find an x with an R_t-interior ball of the given radius around it.
    std::optional<Vec> slice_interior_member(double t, double margin) const;

    /// For q in R: a lower bound on the distance from x to the boundary of
    /// the slice R_t (in R^n). Returns 0 for non-members.
    double slice_depth(std::span<const double> q) const;

    /// The region {(t,-x) : (t,x) in R}, used by the M < 0 reflection.
    Region mirrored() const;

private:
    double a_, b_;
    int n_;
    std::variant<ConvexShape, SublevelShape> shape_;

    bool sublevel_member(std::span<const double> q, double tol) const;
    double sublevel_distance(std::span<const double> q) const;
};

/// Projection onto a single convex primitive (exact closed forms).
Vec project_primitive(const ConvexPrimitive& prim, std::span<const double> q);

/// Nearest point of a convex region; thin wrapper kept for symmetry with the
/// distance entry point. Throws for non-convex shapes.
Vec project_convex(const Region& R, std::span<const double> q);
double distance_to_region(const Region& R, std::span<const double> q);

/// Admissible pair (h,p): h with R = h^{-1}((-inf,0]) up to tolerance and a
/// bounded p fixing R with <grad_x h, p2 - x> <= 0 off R. Evaluators are pure
/// and cheap to copy; the pair keeps its region alive via shared_ptr.
struct AdmissiblePair {
    enum class Provenance { constructed, half_dist_sq, user };

    std::shared_ptr<const Region> region;
    Provenance provenance = Provenance::constructed;

    std::function<double(double t, std::span<const double> x)> h;
    std::function<double(double t, std::span<const double> x)> dh_dt;
    std::function<void(double t, std::span<const double> x, std::span<double> out)> grad_x;
    // p = (p1, p2)
    std::function<void(double t, std::span<const double> x, double& p1, std::span<double> p2)> p;

    double p2_bound = 0.0;   // sup ||p2|| over the working box
    double work_radius = 0.0;  // K_work: checks and norms are confined to I x B[0,K_work]
    bool h_nonnegative = true;

    double eval_h(double t, std::span<const double> x) const { return h(t, x); }
};

/// The constructive existence theorem: phi = (1/2) d_R^2 * sigma(d_C(x)) with
/// a C^1 smoothstep cutoff sigma, blended across the shell D \ C, and
/// p2 = x - grad_x h. Exact gradients for convex R; for sublevel regions the
/// distance (and so the gradients) is numerical.
AdmissiblePair construct_admissible_pair(std::shared_ptr<const Region> R);

/// User-supplied h (and optionally p) as expressions in t, x1..xn.
/// Gradients fall back to central finite differences (relative step 1e-6).
/// The default p is p1 = t, p2 = clamp of x - grad_x h into B[0, r+1].
/// h inconsistent with membership on probe samples is a hard error.
AdmissiblePair pair_from_user(std::shared_ptr<const Region> R, const Expression& h_expr,
                              const std::vector<Expression>* p_exprs = nullptr);

/// The registered closed form h = (1/2) d_R^2, p = P_R (projection onto R).
/// Exact gradients; requires a convex region.
AdmissiblePair half_dist_sq_pair(std::shared_ptr<const Region> R);

/// beta(t) h(t,x) with beta > 0 and C^1; p unchanged.
AdmissiblePair rescale_pair(const AdmissiblePair& P, std::function<double(double)> beta,
                            std::function<double(double)> beta_prime);

/// (h1 + h2, p); requires both pairs to share p (checked on probe points).
AdmissiblePair sum_pairs(const AdmissiblePair& P1, const AdmissiblePair& P2);

struct HhatResult {
    AdmissiblePair pair;
    double eta = 0.0;          // bump amplitude; 0 means degenerate (hhat == h)
    double beta_prime_sup = 0.0;
    double h_sup_sampled = 0.0;
    double t0 = 0.0, delta = 0.0;
};

/// hhat = beta h with beta(t) = 1 + eta (1 - ((t-t0)/delta)^2)^2 supported on
/// [t0-delta, t0+delta] and eta = 0.9 eps delta / (kappa ||h||_0), kappa =
/// 16/(3 sqrt 3), which guarantees ||beta'||_0 ||h||_0 < eps. The sampled sup
/// of |h| over the working box stands in for ||h||_0.
HhatResult build_hhat(const AdmissiblePair& P, double eps, double delta, double t0);

/// Mirrors a pair through x -> -x (companion of Region::mirrored).
AdmissiblePair mirror_pair(const AdmissiblePair& P, std::shared_ptr<const Region> mirrored_region);

}  // namespace regionsolve

#endif
