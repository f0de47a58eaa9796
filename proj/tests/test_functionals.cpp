#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "regionsolve/functionals.hpp"

using namespace regionsolve;

namespace {

LinearFunctional integral_01() {
    LinearFunctional g;
    g.a = 0.0;
    g.b = 1.0;
    g.density = parse_density("1");
    return g;
}

LinearFunctional eval_at(double a, double b, double where) {
    LinearFunctional g;
    g.a = a;
    g.b = b;
    g.atoms = {{where, 1.0}};
    return g;
}

SampledPath path_of(double a, double b, int n, std::size_t N,
                    const std::function<void(double, std::span<double>)>& fn) {
    SampledPath u(a, b, n, N);
    for (std::size_t j = 0; j <= N; ++j) fn(u.node(j), u.at(j));
    return u;
}

LinearFunctional random_functional(std::mt19937& rng) {
    LinearFunctional g;
    g.a = 0.0;
    g.b = 1.0;
    std::uniform_int_distribution<int> natoms(0, 3);
    std::uniform_real_distribution<double> weight(-1.5, 1.5);
    std::uniform_real_distribution<double> coef(0.2, 2.0);
    int k = natoms(rng);
    double loc = 0.05;
    for (int i = 0; i < k; ++i) {
        std::uniform_real_distribution<double> jump(0.05, 0.3);
        loc = std::min(0.99, loc + jump(rng));
        g.atoms.push_back({loc, weight(rng)});
    }
    std::ostringstream os;
    os << coef(rng) << " + " << weight(rng) << "*sin(" << coef(rng) * 3.0 << "*s)";
    g.density = parse_density(os.str());
    return g;
}

}  // namespace

TEST_CASE("gamma mass") {
    CHECK(gamma_mass(integral_01(), 400) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(gamma_mass(eval_at(0, 1, 1.0), 400) == 1.0);
    LinearFunctional two_atoms;
    two_atoms.a = 0.0;
    two_atoms.b = 1.0;
    two_atoms.atoms = {{0.0, 2.0}, {1.0, -1.0}};
    CHECK(gamma_mass(two_atoms, 400) == 1.0);
    CHECK(gamma_degenerate(0.0));
    CHECK(gamma_degenerate(5e-13));
    CHECK(!gamma_degenerate(1e-6));
}

TEST_CASE("gamma apply") {
    auto ramp = path_of(0, 1, 1, 200, [](double t, std::span<double> v) { v[0] = t; });
    CHECK(gamma_apply(eval_at(0, 1, 1.0), ramp)[0] == doctest::Approx(1.0).epsilon(1e-14));

    auto ones2 = path_of(0, 1, 2, 200, [](double, std::span<double> v) { v[0] = v[1] = 1.0; });
    auto got = gamma_apply(integral_01(), ones2);
    CHECK(got[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(got[1] == doctest::Approx(1.0).epsilon(1e-12));

    CHECK(gamma_apply(integral_01(), ramp)[0] == doctest::Approx(0.5).epsilon(1e-6));

    SampledPath wrong(2.0, 3.0, 1, 10);
    CHECK_THROWS(gamma_apply(integral_01(), wrong));
}

TEST_CASE("gamma apply on the constant 1-path equals gamma_mass exactly") {
    std::mt19937 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        LinearFunctional g = random_functional(rng);
        SampledPath ones(0, 1, 1, 400);
        std::fill(ones.values.begin(), ones.values.end(), 1.0);
        CHECK(gamma_apply(g, ones)[0] == gamma_mass(g, 400));  // bitwise
    }
}

TEST_CASE("cumulative weight") {
    // Gamma u = u(b): chi_[0,t](s) = 1 at t = b for every s, so g == 1.
    auto at_b = eval_at(0, 1, 1.0);
    for (double s : {0.0, 0.3, 0.99, 1.0}) CHECK(cumulative_weight(at_b, s, 400) == 1.0);

    // Gamma = integral over [0,1]: g(s) = 1 - s.
    auto lebesgue = integral_01();
    for (double s : {0.0, 0.25, 0.5, 0.875}) {
        CHECK(cumulative_weight(lebesgue, s, 400) == doctest::Approx(1.0 - s).epsilon(1e-12));
        // Independent oracle: apply Gamma to the sampled indicator function.
        SampledPath indicator(0, 1, 1, 4000);
        for (std::size_t j = 0; j <= indicator.N; ++j)
            indicator.at(j)[0] = indicator.node(j) >= s ? 1.0 : 0.0;
        double quad = gamma_apply(lebesgue, indicator)[0];
        CHECK(cumulative_weight(lebesgue, s, 400) == doctest::Approx(quad).epsilon(2e-3));
    }

    // Gamma u = u(a): zero for s > a, one at s = a.
    auto at_a = eval_at(0, 1, 0.0);
    CHECK(cumulative_weight(at_a, 0.0, 400) == 1.0);
    CHECK(cumulative_weight(at_a, 0.5, 400) == 0.0);

    // Nonincreasing when everything is nonnegative.
    std::mt19937 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        LinearFunctional g = random_functional(rng);
        for (auto& atom : g.atoms) atom.weight = std::fabs(atom.weight);
        g.density = parse_density("0.5 + 0.4*abs(sin(5*s))");
        double prev = cumulative_weight(g, 0.0, 400);
        for (int j = 1; j <= 40; ++j) {
            double cur = cumulative_weight(g, j / 40.0, 400);
            CHECK(cur <= prev + 1e-12);
            prev = cur;
        }
    }
}

TEST_CASE("theta examples") {
    auto zero = path_of(0, 1, 2, 400, [](double, std::span<double> v) { v[0] = v[1] = 0.0; });
    auto t0 = theta_fubini(integral_01(), zero);
    CHECK(t0[0] == 0.0);
    CHECK(t0[1] == 0.0);

    auto ones = path_of(0, 1, 1, 400, [](double, std::span<double> v) { v[0] = 1.0; });
    CHECK(theta_fubini(eval_at(0, 1, 1.0), ones)[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(theta_fubini(integral_01(), ones)[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("Fubini equivalence over random functional/integrand pairs") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
        LinearFunctional g = random_functional(rng);
        int n = 1 + (trial % 2);
        double a0 = coef(rng), a1 = coef(rng), w = 2.0 + std::fabs(coef(rng));
        auto integrand = path_of(0, 1, n, 400, [&](double t, std::span<double> v) {
            for (std::size_t k = 0; k < v.size(); ++k)
                v[k] = a0 + a1 * std::sin(w * t + static_cast<double>(k));
        });
        auto direct = theta_direct(g, integrand);
        auto fubini = theta_fubini(g, integrand);
        double diff = 0.0;
        for (std::size_t k = 0; k < direct.size(); ++k)
            diff = std::max(diff, std::fabs(direct[k] - fubini[k]));
        CHECK(diff <= 1e-8 * (1.0 + integrand.sup_norm()));
    }
}

TEST_CASE("linearity of the discrete operator") {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    for (int trial = 0; trial < 30; ++trial) {
        LinearFunctional g = random_functional(rng);
        double alpha = coef(rng), beta = coef(rng);
        auto u = path_of(0, 1, 1, 300, [&](double t, std::span<double> v) {
            v[0] = std::sin(3 * t) + 0.2 * t;
        });
        auto v = path_of(0, 1, 1, 300, [&](double t, std::span<double> w) {
            w[0] = std::cos(2 * t) - t * t;
        });
        SampledPath mix(0, 1, 1, 300);
        for (std::size_t i = 0; i < mix.values.size(); ++i)
            mix.values[i] = alpha * u.values[i] + beta * v.values[i];
        double lhs = gamma_apply(g, mix)[0];
        double rhs = alpha * gamma_apply(g, u)[0] + beta * gamma_apply(g, v)[0];
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("reflection") {
    LinearFunctional neg;
    neg.a = 0.0;
    neg.b = 1.0;
    neg.atoms = {{1.0, -1.0}};  // Gamma u = -u(b)
    CHECK(gamma_mass(neg, 400) == -1.0);
    LinearFunctional pos = reflect_functional(neg, 400);
    CHECK(gamma_mass(pos, 400) == 1.0);
    auto ramp = path_of(0, 1, 1, 100, [](double t, std::span<double> v) { v[0] = t; });
    CHECK(gamma_apply(pos, ramp)[0] == doctest::Approx(1.0).epsilon(1e-14));

    CHECK_THROWS(reflect_functional(pos, 400));

    // Densities reflect too.
    LinearFunctional negdens;
    negdens.a = 0.0;
    negdens.b = 1.0;
    negdens.density = parse_density("0-1");
    LinearFunctional posdens = reflect_functional(negdens, 400);
    CHECK(gamma_mass(posdens, 400) == doctest::Approx(1.0).epsilon(1e-12));

    // f~(t,x) = -f(t,-x): the identity field is a fixed point, constants flip.
    FieldFn identity = [](double, std::span<const double> x, std::span<double> out) {
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = x[k];
    };
    auto refl = reflect_field(identity);
    double xv[1] = {0.7};
    double out[1];
    refl(0.0, std::span<const double>(xv, 1), std::span<double>(out, 1));
    CHECK(out[0] == 0.7);

    FieldFn one = [](double, std::span<const double>, std::span<double> o) { o[0] = 1.0; };
    auto rone = reflect_field(one);
    rone(0.0, std::span<const double>(xv, 1), std::span<double>(out, 1));
    CHECK(out[0] == -1.0);
}

TEST_CASE("functional validation") {
    LinearFunctional bad;
    bad.a = 0.0;
    bad.b = 1.0;
    bad.atoms = {{0.5, 1.0}, {0.25, 1.0}};  // not increasing
    CHECK_THROWS(bad.validate());
    bad.atoms = {{1.5, 1.0}};  // outside
    CHECK_THROWS(bad.validate());
}
