#ifndef REGIONSOLVE_FUNCTIONALS_HPP
#define REGIONSOLVE_FUNCTIONALS_HPP

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "regionsolve/expr.hpp"

namespace regionsolve {

/// A vector-valued function on a uniform grid over [a,b].
/// values are stored row-major: node j occupies [j*n, (j+1)*n).
struct SampledPath {
    double a = 0.0, b = 1.0;
    int n = 1;              // state dimension
    std::size_t N = 2;      // number of cells; N+1 nodes
    std::vector<double> values;

    SampledPath() = default;
    SampledPath(double a_, double b_, int n_, std::size_t N_);

    double h() const { return (b - a) / static_cast<double>(N); }
    double node(std::size_t j) const { return a + h() * static_cast<double>(j); }
    std::span<double> at(std::size_t j) {
        return {values.data() + j * static_cast<std::size_t>(n), static_cast<std::size_t>(n)};
    }
    std::span<const double> at(std::size_t j) const {
        return {values.data() + j * static_cast<std::size_t>(n), static_cast<std::size_t>(n)};
    }
    /// Linear interpolation at s in [a,b]; exact at nodes and on constants.
    std::vector<double> interpolate(double s) const;
    /// max over nodes of the euclidean norm.
    double sup_norm() const;
};

/// The boundary functional Gamma as finitely many atoms plus an integrable
/// density, acting componentwise on paths. Atom locations are strictly
/// increasing and lie in [a,b].
struct LinearFunctional {
    struct Atom {
        double location;
        double weight;
    };
    double a = 0.0, b = 1.0;
    std::vector<Atom> atoms;
    std::optional<Expression> density;  // rho(s), integrated against Lebesgue measure

    void validate() const;  // throws std::invalid_argument on bad atoms

    /// Density values on an (N+1)-node uniform grid (empty density -> zeros).
    std::vector<double> density_on_grid(std::size_t N) const;
};

/// M := Gamma(1) computed on an N-cell grid: sum of atom weights plus the
/// composite-trapezoid integral of the density. The theory needs M != 0;
/// use gamma_degenerate to test against the 1e-12 floor.
double gamma_mass(const LinearFunctional& g, std::size_t N);
bool gamma_degenerate(double mass);

/// Gamma applied to a path: sum_i w_i u(s_i) (linear interpolation between
/// nodes) plus the trapezoid integral of rho * u. Throws on interval mismatch.
std::vector<double> gamma_apply(const LinearFunctional& g, const SampledPath& u);

/// g(s) := Gamma(chi_[a,.](s)) = sum_{s_i >= s} w_i + int_s^b rho.
/// May be negative for signed measures; callers report, not reject.
double cumulative_weight(const LinearFunctional& g, double s, std::size_t N);

/// Theta of an integrand w given on the grid (w stands for f_R(s,u(s))).
/// theta_direct applies Gamma to the running trapezoid integral of w.
/// theta_fubini applies atom weights to that cumulative integral and pairs
/// the density with the reverse cumulative G(s) = int_s^b rho, using
/// endpoint-corrected weights so the two routes agree to rounding on the
/// shared grid.
std::vector<double> theta_direct(const LinearFunctional& g, const SampledPath& integrand);
std::vector<double> theta_fubini(const LinearFunctional& g, const SampledPath& integrand);

/// Gamma~ = -Gamma, used to reduce M < 0 problems to M > 0 via v = -u.
/// Rejects functionals whose mass is already positive.
LinearFunctional reflect_functional(const LinearFunctional& g, std::size_t N);

/// f~(t,x) = -f(t,-x); solving the reflected problem and negating the
/// solution recovers the original one.
using FieldFn = std::function<void(double t, std::span<const double> x, std::span<double> out)>;
FieldFn reflect_field(FieldFn f);

/// Running trapezoid cumulative integral of a sampled path (F(a)=0).
SampledPath cumulative_trapezoid(const SampledPath& w);

}  // namespace regionsolve

#endif
