#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "regionsolve/regions.hpp"
#include "regionsolve/sampling.hpp"

using namespace regionsolve;

namespace {

std::shared_ptr<const Region> example_ball() {
    // Radius-2 ball around the origin of (t,x,y), over I = [0,1], n = 2.
    ConvexShape shape;
    shape.members.push_back(BallPrim{{0.0, 0.0, 0.0}, 2.0});
    return std::make_shared<Region>(0.0, 1.0, 2, std::move(shape));
}

std::shared_ptr<const Region> cylinder(double radius, int n) {
    ConvexShape shape;
    shape.members.push_back(XBallPrim{Vec(static_cast<std::size_t>(n), 0.0), radius});
    return std::make_shared<Region>(0.0, 1.0, n, std::move(shape));
}

double nrm(std::span<const double> v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

std::shared_ptr<const Region> random_convex_region(std::mt19937& rng, int n) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> off(-0.5, 0.5);
    std::size_t dim = static_cast<std::size_t>(n) + 1;
    ConvexShape shape;
    int kind = static_cast<int>(unit(rng) * 3.0);
    if (kind == 0) {
        // Ball spanning the whole time interval so (H0) holds.
        Vec center(dim, 0.0);
        center[0] = 0.5 + 0.4 * off(rng);
        for (std::size_t k = 1; k < dim; ++k) center[k] = off(rng);
        double radius = 1.0 + unit(rng);  // >= 1 > max |t - c_t| over [0,1]
        shape.members.push_back(BallPrim{center, radius});
    } else if (kind == 1) {
        Vec lo(dim), hi(dim);
        lo[0] = 0.0;
        hi[0] = 1.0;
        for (std::size_t k = 1; k < dim; ++k) {
            lo[k] = -0.5 - unit(rng);
            hi[k] = 0.5 + unit(rng);
        }
        shape.members.push_back(BoxPrim{lo, hi});
    } else {
        Vec center(dim, 0.0);
        center[0] = 0.5;
        shape.members.push_back(BallPrim{center, 1.5 + unit(rng)});
        Vec lo(dim), hi(dim);
        lo[0] = -1.0;
        hi[0] = 2.0;
        for (std::size_t k = 1; k < dim; ++k) {
            lo[k] = -0.8 - unit(rng);
            hi[k] = 0.8 + unit(rng);
        }
        shape.members.push_back(BoxPrim{lo, hi});
        Vec normal(dim, 0.0);
        normal[1] = 1.0;
        shape.members.push_back(HalfspacePrim{normal, 0.6 + unit(rng)});
    }
    return std::make_shared<Region>(0.0, 1.0, n, std::move(shape));
}

}  // namespace

TEST_CASE("distance closed forms") {
    auto R = example_ball();
    Vec q{0.0, 3.0, 0.0};
    CHECK(R->distance(q) == doctest::Approx(1.0).epsilon(1e-14));
    Vec inside{0.5, 0.3, -0.2};
    CHECK(R->distance(inside) == 0.0);

    // Box [0,1]^2 in (t,x), corner distance.
    ConvexShape bs;
    bs.members.push_back(BoxPrim{{0.0, 0.0}, {1.0, 1.0}});
    Region box(0.0, 1.0, 1, std::move(bs));
    Vec corner{2.0, 2.0};
    CHECK(box.distance(corner) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("projection onto convex shapes") {
    auto R = example_ball();
    Vec q{3.0, 0.0, 0.0};
    // The radius-2 ball clips against the time slab [0,1]: the nearest point
    // in the intersection has t = 1.
    Vec p = R->project(q);
    CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-10));

    // In x-direction only, the slab is inactive and the radial form is exact.
    Vec qx{0.0, 3.0, 0.0};
    Vec px = R->project(qx);
    CHECK(px[0] == 0.0);
    CHECK(px[1] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(px[2] == 0.0);

    // Identity on members and idempotence (exact).
    Vec member{0.5, 1.0, 0.5};
    CHECK(R->project(member) == member);
    Vec pp = R->project(p);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(pp[i] == p[i]);

    SublevelShape s{parse_expression("x1*x1 - 1", 1), 5.0};
    Region sub(0.0, 1.0, 1, std::move(s));
    Vec qq{0.5, 3.0};
    CHECK_THROWS_AS((void)sub.project(qq), std::domain_error);
}

TEST_CASE("gradient of half squared distance matches finite differences") {
    auto R = example_ball();
    auto pair = half_dist_sq_pair(R);
    Vec x{3.0, 0.0};
    double t = 0.0;
    // grad_x h at (0,(3,0)) is (1,0); dh/dt is 0.
    Vec grad(2);
    pair.grad_x(t, x, grad);
    CHECK(grad[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(grad[1] == doctest::Approx(0.0).epsilon(1e-12));
    // Central finite differences of h agree to 1e-6.
    for (int k = 0; k < 2; ++k) {
        double step = 1e-6;
        Vec xp = x, xm = x;
        xp[static_cast<std::size_t>(k)] += step;
        xm[static_cast<std::size_t>(k)] -= step;
        double fd = (pair.h(t, xp) - pair.h(t, xm)) / (2 * step);
        CHECK(fd == doctest::Approx(grad[static_cast<std::size_t>(k)]).epsilon(1e-6));
    }
}

TEST_CASE("projection is a contraction") {
    std::mt19937 rng(21);
    std::uniform_real_distribution<double> coord(-4.0, 4.0);
    for (int trial = 0; trial < 10; ++trial) {
        auto R = random_convex_region(rng, 2);
        for (int i = 0; i < 100; ++i) {
            Vec q1{coord(rng), coord(rng), coord(rng)};
            Vec q2{coord(rng), coord(rng), coord(rng)};
            Vec p1 = R->project(q1);
            Vec p2 = R->project(q2);
            double dp = 0, dq = 0;
            for (std::size_t c = 0; c < q1.size(); ++c) {
                dp += (p1[c] - p2[c]) * (p1[c] - p2[c]);
                dq += (q1[c] - q2[c]) * (q1[c] - q2[c]);
            }
            CHECK(std::sqrt(dp) <= std::sqrt(dq) + 1e-9);
        }
    }
}

TEST_CASE("constructed pair on the example ball") {
    auto R = example_ball();
    auto pair = construct_admissible_pair(R);

    // On R: h = 0, grad = 0, p = identity.
    Vec x{0.5, -0.3};
    double t = 0.4;
    CHECK(pair.h(t, x) == 0.0);
    Vec grad(2);
    pair.grad_x(t, x, grad);
    CHECK(grad[0] == 0.0);
    CHECK(grad[1] == 0.0);
    double p1;
    Vec p2(2);
    pair.p(t, x, p1, p2);
    CHECK(p1 == t);
    CHECK(p2[0] == x[0]);
    CHECK(p2[1] == x[1]);

    // Off R: h > 0 and <grad, p2 - x> = -||grad||^2 exactly.
    HaltonSampler sampler(3, 1);
    int off_checked = 0;
    while (off_checked < 200) {
        auto u = sampler.next();
        Vec q{u[0], pair.work_radius * (2 * u[1] - 1), pair.work_radius * (2 * u[2] - 1)};
        if (nrm(std::span<const double>(q).subspan(1)) > pair.work_radius) continue;
        if (R->contains(q)) continue;
        auto xs = std::span<const double>(q).subspan(1);
        double hv = pair.h(q[0], xs);
        CHECK(hv > 0.0);
        pair.grad_x(q[0], xs, grad);
        pair.p(q[0], xs, p1, p2);
        double inner = grad[0] * (p2[0] - xs[0]) + grad[1] * (p2[1] - xs[1]);
        double minus_norm2 = -(grad[0] * grad[0] + grad[1] * grad[1]);
        CHECK(std::fabs(inner - minus_norm2) <= 1e-8);
        CHECK(inner <= 0.0);
        ++off_checked;
    }
    CHECK(pair.p2_bound >= R->pi2_radius());
    CHECK(pair.h_nonnegative);
}

TEST_CASE("blend-zone value against an independent reimplementation") {
    // R = [0,1] x B[0,1] in n = 1; evaluation point (0.5, 1.5) sits in the
    // shell D \ C with r = 1.
    auto R = cylinder(1.0, 1);
    auto pair = construct_admissible_pair(R);
    double t = 0.5;
    Vec x{1.5};
    double got = pair.h(t, x);

    // Frozen closed-form value: d_R = 0.5, d_C = 0.5, sigma(0.5) = 0.5,
    // phi = 0.0625, h = 0.75 * phi + 0.125 = 0.171875.
    CHECK(got == doctest::Approx(0.171875).epsilon(1e-12));

    // Dual-route oracle: re-derive the three branches from first principles.
    auto oracle = [&](double tt, double xx) {
        double r = 1.0;
        double d_R = std::max(0.0, std::fabs(xx) - 1.0);
        double d_C = std::max(0.0, std::fabs(xx) - r);
        double s = d_C;
        double sigma = s <= 0 ? 1.0 : (s >= 1 ? 0.0 : 1.0 - s * s * (3 - 2 * s));
        double phi = 0.5 * d_R * d_R * sigma;
        (void)tt;
        if (s <= 0.0) return phi;
        if (s < 1.0) return (1 - s * s) * phi + 0.5 * s * s;
        return 0.5 * s * s;
    };
    CHECK(got == doctest::Approx(oracle(t, x[0])).epsilon(1e-12));

    // A few more points across all three branches.
    for (double xx : {0.3, 1.2, 1.7, 2.5, 3.4}) {
        Vec pt{xx};
        CHECK(pair.h(0.25, pt) == doctest::Approx(oracle(0.25, xx)).epsilon(1e-12));
    }
}

TEST_CASE("constructed gradients agree with finite differences off the boundary") {
    std::mt19937 rng(31);
    auto R = example_ball();
    auto pair = construct_admissible_pair(R);
    double r = R->pi2_radius();
    std::uniform_real_distribution<double> tdist(0.0, 1.0);
    std::uniform_real_distribution<double> xdist(-pair.work_radius, pair.work_radius);
    int checked = 0;
    while (checked < 500) {
        double t = tdist(rng);
        Vec x{xdist(rng), xdist(rng)};
        Vec q{t, x[0], x[1]};
        double d_R = R->distance(q);
        double d_C = std::max(0.0, nrm(x) - r);
        // Skip thin bands around the region boundary and the blend seams.
        if (d_R < 1e-3) continue;
        if (std::fabs(d_C) < 1e-4 || std::fabs(d_C - 1.0) < 1e-4) continue;
        Vec grad(2);
        pair.grad_x(t, x, grad);
        for (std::size_t k = 0; k < 2; ++k) {
            double step = 1e-6 * (1.0 + std::fabs(x[k]));
            Vec xp = x, xm = x;
            xp[k] += step;
            xm[k] -= step;
            double fd = (pair.h(t, xp) - pair.h(t, xm)) / (2 * step);
            CHECK(std::fabs(fd - grad[k]) <= 1e-5);
        }
        double tstep = 1e-6;
        double fdt = (pair.h(t + tstep, x) - pair.h(t - tstep, x)) / (2 * tstep);
        CHECK(std::fabs(fdt - pair.dh_dt(t, x)) <= 1e-5);
        ++checked;
    }
}

TEST_CASE("half_dist_sq pair on the example ball") {
    auto R = example_ball();
    auto pair = half_dist_sq_pair(R);
    Vec x{3.0, 0.0};
    CHECK(pair.h(0.0, x) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(pair.dh_dt(0.0, x) == doctest::Approx(0.0).epsilon(1e-12));
    Vec grad(2);
    pair.grad_x(0.0, x, grad);
    CHECK(grad[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(grad[1] == doctest::Approx(0.0).epsilon(1e-12));
    double p1;
    Vec p2(2);
    pair.p(0.0, x, p1, p2);
    CHECK(p1 == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(p2[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(p2[1] == doctest::Approx(0.0).epsilon(1e-12));
    Vec member{1.0, 0.5};
    CHECK(pair.h(0.5, member) == 0.0);
    CHECK(pair.p2_bound == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("rescale and sum") {
    auto R = example_ball();
    auto pair = construct_admissible_pair(R);
    Vec x{2.5, 0.0};
    double t = 0.5;

    auto same = rescale_pair(pair, [](double) { return 1.0; }, [](double) { return 0.0; });
    CHECK(same.h(t, x) == pair.h(t, x));
    CHECK(same.dh_dt(t, x) == pair.dh_dt(t, x));

    auto twice = rescale_pair(pair, [](double) { return 2.0; }, [](double) { return 0.0; });
    CHECK(twice.h(t, x) == 2.0 * pair.h(t, x));
    CHECK((twice.h(t, x) > 0) == (pair.h(t, x) > 0));  // (H1) set unchanged

    CHECK_THROWS(rescale_pair(pair, [](double tt) { return tt - 0.5; }, [](double) { return 1.0; }));

    auto a = rescale_pair(pair, [](double) { return 0.3; }, [](double) { return 0.0; });
    auto b = rescale_pair(pair, [](double) { return 0.5; }, [](double) { return 0.0; });
    auto sum = sum_pairs(a, b);
    CHECK(sum.h(t, x) == doctest::Approx(0.8 * pair.h(t, x)).epsilon(1e-14));

    auto other = construct_admissible_pair(cylinder(2.0, 2));
    CHECK_THROWS(sum_pairs(pair, other));  // different p
}

TEST_CASE("build_hhat") {
    auto R = example_ball();
    auto pair = half_dist_sq_pair(R);
    double eps = 0.1, delta = 0.2, t0 = 0.5;
    HhatResult res = build_hhat(pair, eps, delta, t0);
    CHECK(res.eta > 0.0);

    Vec x{3.0, 0.5};
    // Outside the bump window hhat == h; at t0 it differs wherever h != 0.
    CHECK(res.pair.h(0.0, x) == pair.h(0.0, x));
    CHECK(res.pair.h(1.0, x) == pair.h(1.0, x));
    CHECK(res.pair.h(t0, x) != pair.h(t0, x));
    CHECK(res.pair.h(t0, x) == doctest::Approx((1.0 + res.eta) * pair.h(t0, x)).epsilon(1e-14));

    // ||beta'||_0 ||h||_0 < eps, maximizing |beta'| on a fine grid.
    double beta_prime_max = 0.0;
    for (int j = 0; j <= 20000; ++j) {
        double t = j / 20000.0;
        double z = (t - t0) / delta;
        double bp = (std::fabs(z) >= 1.0) ? 0.0 : std::fabs(res.eta / delta * 4.0 * z * (1 - z * z));
        beta_prime_max = std::max(beta_prime_max, bp);
    }
    CHECK(beta_prime_max * res.h_sup_sampled < eps);
    CHECK(beta_prime_max <= res.beta_prime_sup * (1 + 1e-9));

    CHECK_THROWS(build_hhat(pair, -1.0, delta, t0));
    CHECK_THROWS(build_hhat(pair, eps, 0.9, 0.5));  // window escapes (a,b)
}

TEST_CASE("mirrored region and pair") {
    ConvexShape shape;
    shape.members.push_back(BallPrim{{0.5, 1.0, 0.0}, 1.5});
    auto R = std::make_shared<Region>(0.0, 1.0, 2, std::move(shape));
    Region M = R->mirrored();
    Vec q{0.5, 1.2, 0.3};
    Vec qm{0.5, -1.2, -0.3};
    CHECK(R->contains(q) == M.contains(qm));
    CHECK(R->distance(q) == doctest::Approx(M.distance(qm)).epsilon(1e-12));

    auto pair = half_dist_sq_pair(R);
    auto mpair = mirror_pair(pair, std::make_shared<Region>(R->mirrored()));
    Vec x{3.0, 0.2};
    Vec xm{-3.0, -0.2};
    CHECK(mpair.h(0.3, xm) == pair.h(0.3, x));
    Vec g(2), gm(2);
    pair.grad_x(0.3, x, g);
    mpair.grad_x(0.3, xm, gm);
    CHECK(gm[0] == -g[0]);
    CHECK(gm[1] == -g[1]);
}

TEST_CASE("sublevel region distance upper bound") {
    // h = t^2 + x1^2 + x2^2 - 4 describes the example ball.
    SublevelShape s{parse_expression("t^2 + x1^2 + x2^2 - 4", 2), 10.0};
    Region sub(0.0, 1.0, 2, std::move(s));
    Vec q{0.0, 3.0, 0.0};
    double d = sub.distance(q);
    CHECK(d >= 1.0 - 1e-9);  // true distance, never undershoots
    CHECK(d <= 1.0 + 5e-2);  // multistart upper bound stays close
    Vec in{0.0, 1.0, 0.0};
    CHECK(sub.distance(in) == 0.0);
}

TEST_CASE("pi2 radius and unboundedness") {
    auto R = example_ball();
    CHECK(R->max_x_norm() == doctest::Approx(2.0).epsilon(1e-14));
    ConvexShape hs_only;
    hs_only.members.push_back(HalfspacePrim{{0.0, 1.0}, 1.0});
    auto unbounded = std::make_shared<Region>(Region(0.0, 1.0, 1, std::move(hs_only)));
    CHECK_THROWS_AS((void)construct_admissible_pair(unbounded), std::invalid_argument);
}

TEST_CASE("pair_from_user enforces (H1) and wires default p") {
    auto R = cylinder(2.0, 1);
    Expression good = parse_expression("(x1^2 - 4)/2", 1);
    auto pair = pair_from_user(R, good);
    CHECK(!pair.h_nonnegative);
    Vec x{3.0};
    CHECK(pair.h(0.5, x) == doctest::Approx(2.5).epsilon(1e-12));
    Vec grad(1);
    pair.grad_x(0.5, x, grad);
    CHECK(grad[0] == doctest::Approx(3.0).epsilon(1e-5));

    Expression flipped = parse_expression("4 - x1^2", 1);
    CHECK_THROWS_AS((void)pair_from_user(R, flipped), std::invalid_argument);
}
