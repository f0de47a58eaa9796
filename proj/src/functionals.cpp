#include "regionsolve/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace regionsolve {

SampledPath::SampledPath(double a_, double b_, int n_, std::size_t N_)
    : a(a_), b(b_), n(n_), N(N_), values(static_cast<std::size_t>(n_) * (N_ + 1), 0.0) {
    if (!(b > a)) throw std::invalid_argument("SampledPath: interval must satisfy a < b");
    if (n < 1) throw std::invalid_argument("SampledPath: dimension must be >= 1");
    if (N < 2) throw std::invalid_argument("SampledPath: need at least 2 cells");
}

std::vector<double> SampledPath::interpolate(double s) const {
    if (s < a - 1e-12 || s > b + 1e-12)
        throw std::invalid_argument("SampledPath::interpolate: point outside interval");
    double step = h();
    double pos = (s - a) / step;
    std::size_t j = static_cast<std::size_t>(std::min<double>(std::floor(pos), double(N - 1)));
    double theta = pos - static_cast<double>(j);
    theta = std::clamp(theta, 0.0, 1.0);
    std::vector<double> out(static_cast<std::size_t>(n));
    auto lo = at(j), hi = at(j + 1);
    for (int k = 0; k < n; ++k) {
        std::size_t kk = static_cast<std::size_t>(k);
        out[kk] = lo[kk] + theta * (hi[kk] - lo[kk]);  // exact on constants
    }
    return out;
}

double SampledPath::sup_norm() const {
    double best = 0.0;
    for (std::size_t j = 0; j <= N; ++j) {
        double s = 0.0;
        for (double v : at(j)) s += v * v;
        best = std::max(best, s);
    }
    return std::sqrt(best);
}

void LinearFunctional::validate() const {
    if (!(b > a)) throw std::invalid_argument("LinearFunctional: interval must satisfy a < b");
    double prev = a - 1.0;
    for (const auto& atom : atoms) {
        if (atom.location < a - 1e-12 || atom.location > b + 1e-12)
            throw std::invalid_argument("LinearFunctional: atom outside [a,b]");
        if (atom.location <= prev)
            throw std::invalid_argument("LinearFunctional: atom locations must be strictly increasing");
        prev = atom.location;
    }
}

std::vector<double> LinearFunctional::density_on_grid(std::size_t N) const {
    std::vector<double> rho(N + 1, 0.0);
    if (density) {
        double h = (b - a) / static_cast<double>(N);
        double env[1];
        for (std::size_t j = 0; j <= N; ++j) {
            env[0] = a + h * static_cast<double>(j);
            rho[j] = density->eval(std::span<const double>(env, 1));
        }
    }
    return rho;
}

double gamma_mass(const LinearFunctional& g, std::size_t N) {
    SampledPath ones(g.a, g.b, 1, N);
    std::fill(ones.values.begin(), ones.values.end(), 1.0);
    return gamma_apply(g, ones)[0];
}

bool gamma_degenerate(double mass) { return std::fabs(mass) < 1e-12; }

std::vector<double> gamma_apply(const LinearFunctional& g, const SampledPath& u) {
    if (std::fabs(g.a - u.a) > 1e-12 || std::fabs(g.b - u.b) > 1e-12)
        throw std::invalid_argument("gamma_apply: functional and path intervals differ");
    std::size_t n = static_cast<std::size_t>(u.n);
    std::vector<double> out(n, 0.0);
    for (const auto& atom : g.atoms) {
        auto val = u.interpolate(atom.location);
        for (std::size_t k = 0; k < n; ++k) out[k] += atom.weight * val[k];
    }
    if (g.density) {
        auto rho = g.density_on_grid(u.N);
        double h = u.h();
        for (std::size_t k = 0; k < n; ++k) {
            double acc = 0.5 * rho[0] * u.at(0)[k] + 0.5 * rho[u.N] * u.at(u.N)[k];
            for (std::size_t j = 1; j < u.N; ++j) acc += rho[j] * u.at(j)[k];
            out[k] += h * acc;
        }
    }
    return out;
}

double cumulative_weight(const LinearFunctional& g, double s, std::size_t N) {
    if (s < g.a - 1e-12 || s > g.b + 1e-12)
        throw std::invalid_argument("cumulative_weight: point outside interval");
    double out = 0.0;
    for (const auto& atom : g.atoms)
        if (atom.location >= s) out += atom.weight;
    if (g.density) {
        // int_s^b rho: whole cells to the right of s plus the partial cell.
        auto rho = g.density_on_grid(N);
        double h = (g.b - g.a) / static_cast<double>(N);
        double pos = (s - g.a) / h;
        std::size_t j = static_cast<std::size_t>(std::min<double>(std::floor(pos), double(N - 1)));
        double theta = std::clamp(pos - static_cast<double>(j), 0.0, 1.0);
        double acc = 0.0;
        for (std::size_t m = j + 1; m < N; ++m) acc += 0.5 * (rho[m] + rho[m + 1]) * h;
        double rho_s = rho[j] + theta * (rho[j + 1] - rho[j]);
        acc += 0.5 * (rho_s + rho[j + 1]) * (1.0 - theta) * h;
        out += acc;
    }
    return out;
}

SampledPath cumulative_trapezoid(const SampledPath& w) {
    SampledPath F(w.a, w.b, w.n, w.N);
    double h = w.h();
    std::size_t n = static_cast<std::size_t>(w.n);
    for (std::size_t j = 1; j <= w.N; ++j) {
        auto prev = F.at(j - 1);
        auto out = F.at(j);
        auto lo = w.at(j - 1), hi = w.at(j);
        for (std::size_t k = 0; k < n; ++k) out[k] = prev[k] + 0.5 * h * (lo[k] + hi[k]);
    }
    return F;
}

std::vector<double> theta_direct(const LinearFunctional& g, const SampledPath& integrand) {
    return gamma_apply(g, cumulative_trapezoid(integrand));
}

std::vector<double> theta_fubini(const LinearFunctional& g, const SampledPath& w) {
    if (std::fabs(g.a - w.a) > 1e-12 || std::fabs(g.b - w.b) > 1e-12)
        throw std::invalid_argument("theta_fubini: functional and path intervals differ");
    std::size_t n = static_cast<std::size_t>(w.n);
    std::vector<double> out(n, 0.0);

    // Atom part: the piecewise-constant atom contribution to g(s) integrates
    // exactly against w as w_i * W(s_i), W the cumulative trapezoid integral.
    if (!g.atoms.empty()) {
        SampledPath W = cumulative_trapezoid(w);
        for (const auto& atom : g.atoms) {
            auto val = W.interpolate(atom.location);
            for (std::size_t k = 0; k < n; ++k) out[k] += atom.weight * val[k];
        }
    }

    // Density part: quadrature of w against G(s) = int_s^b rho (reverse
    // cumulative trapezoid), with endpoint weights corrected so the discrete
    // identity Trap(rho * CumTrap(w)) = sum_j beta_j w_j holds exactly:
    //   beta_j = h G_j             (0 < j < N)
    //   beta_0 = (h/2) G_0 - (h^2/4) rho_0
    //   beta_N =           (h^2/4) rho_N
    if (g.density) {
        auto rho = g.density_on_grid(w.N);
        double h = w.h();
        std::vector<double> G(w.N + 1, 0.0);
        for (std::size_t j = w.N; j-- > 0;) G[j] = G[j + 1] + 0.5 * h * (rho[j] + rho[j + 1]);
        for (std::size_t k = 0; k < n; ++k) {
            double acc = (0.5 * h * G[0] - 0.25 * h * h * rho[0]) * w.at(0)[k];
            for (std::size_t j = 1; j < w.N; ++j) acc += h * G[j] * w.at(j)[k];
            acc += 0.25 * h * h * rho[w.N] * w.at(w.N)[k];
            out[k] += acc;
        }
    }
    return out;
}

LinearFunctional reflect_functional(const LinearFunctional& g, std::size_t N) {
    double mass = gamma_mass(g, N);
    if (mass > 0.0)
        throw std::invalid_argument("reflect_functional: mass is already positive; reflection "
                                    "would corrupt sign conventions");
    LinearFunctional out = g;
    for (auto& atom : out.atoms) atom.weight = -atom.weight;
    if (out.density) out.density = out.density->negated();
    return out;
}

FieldFn reflect_field(FieldFn f) {
    return [f = std::move(f)](double t, std::span<const double> x, std::span<double> out) {
        std::vector<double> nx(x.size());
        for (std::size_t k = 0; k < x.size(); ++k) nx[k] = -x[k];
        f(t, nx, out);
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = -out[k];
    };
}

}  // namespace regionsolve
