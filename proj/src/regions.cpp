#include "regionsolve/regions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "regionsolve/sampling.hpp"

namespace regionsolve {

namespace {

constexpr double kDykstraTol = 5e-14;
constexpr int kDykstraMaxCycles = 500;

double dot(std::span<const double> u, std::span<const double> v) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
    return s;
}

double nrm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double dist2(std::span<const double> u, std::span<const double> v) {
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        double d = u[i] - v[i];
        s += d * d;
    }
    return s;
}

// C^1 smoothstep cutoff: 1 on (-inf,0], 0 on [1,inf), 1 - s^2(3-2s) between.
double sigma_cut(double s) {
    if (s <= 0.0) return 1.0;
    if (s >= 1.0) return 0.0;
    return 1.0 - s * s * (3.0 - 2.0 * s);
}

double sigma_cut_prime(double s) {
    if (s <= 0.0 || s >= 1.0) return 0.0;
    return -6.0 * s * (1.0 - s);
}

bool primitive_contains(const ConvexPrimitive& prim, std::span<const double> q, double tol) {
    if (const auto* ball = std::get_if<BallPrim>(&prim)) {
        return std::sqrt(dist2(ball->center, q)) <= ball->radius + tol;
    }
    if (const auto* xb = std::get_if<XBallPrim>(&prim)) {
        double s = 0.0;
        for (std::size_t k = 0; k < xb->center_x.size(); ++k) {
            double d = q[k + 1] - xb->center_x[k];
            s += d * d;
        }
        return std::sqrt(s) <= xb->radius + tol;
    }
    if (const auto* box = std::get_if<BoxPrim>(&prim)) {
        for (std::size_t i = 0; i < box->lo.size(); ++i)
            if (q[i] < box->lo[i] - tol || q[i] > box->hi[i] + tol) return false;
        return true;
    }
    const auto& hs = std::get<HalfspacePrim>(prim);
    return dot(hs.normal, q) <= hs.offset + tol;
}

}  // namespace

Vec project_primitive(const ConvexPrimitive& prim, std::span<const double> q) {
    Vec out(q.begin(), q.end());
    if (const auto* ball = std::get_if<BallPrim>(&prim)) {
        double d = std::sqrt(dist2(ball->center, q));
        if (d > ball->radius) {
            double scale = ball->radius / d;
            for (std::size_t i = 0; i < out.size(); ++i)
                out[i] = ball->center[i] + scale * (q[i] - ball->center[i]);
        }
        return out;
    }
    if (const auto* xb = std::get_if<XBallPrim>(&prim)) {
        double s = 0.0;
        for (std::size_t k = 0; k < xb->center_x.size(); ++k) {
            double d = q[k + 1] - xb->center_x[k];
            s += d * d;
        }
        double d = std::sqrt(s);
        if (d > xb->radius) {
            double scale = xb->radius / d;
            for (std::size_t k = 0; k < xb->center_x.size(); ++k)
                out[k + 1] = xb->center_x[k] + scale * (q[k + 1] - xb->center_x[k]);
        }
        return out;
    }
    if (const auto* box = std::get_if<BoxPrim>(&prim)) {
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = std::clamp(out[i], box->lo[i], box->hi[i]);
        return out;
    }
    const auto& hs = std::get<HalfspacePrim>(prim);
    double excess = dot(hs.normal, q) - hs.offset;
    if (excess > 0.0) {
        double nn = dot(hs.normal, hs.normal);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] -= (excess / nn) * hs.normal[i];
    }
    return out;
}

Region::Region(double a, double b, int n, ConvexShape shape)
    : a_(a), b_(b), n_(n), shape_(std::move(shape)) {
    if (!(b_ > a_)) throw std::invalid_argument("Region: interval must satisfy a < b");
    if (n_ < 1) throw std::invalid_argument("Region: dimension must be >= 1");
    const auto& members = std::get<ConvexShape>(shape_).members;
    if (members.empty()) throw std::invalid_argument("Region: convex shape needs at least one member");
    std::size_t dim = static_cast<std::size_t>(n_) + 1;
    for (const auto& m : members) {
        if (const auto* ball = std::get_if<BallPrim>(&m)) {
            if (ball->center.size() != dim || ball->radius <= 0.0)
                throw std::invalid_argument("Region: bad ball primitive");
        } else if (const auto* xb = std::get_if<XBallPrim>(&m)) {
            if (xb->center_x.size() != dim - 1 || xb->radius <= 0.0)
                throw std::invalid_argument("Region: bad xball primitive");
        } else if (const auto* box = std::get_if<BoxPrim>(&m)) {
            if (box->lo.size() != dim || box->hi.size() != dim)
                throw std::invalid_argument("Region: bad box primitive");
            for (std::size_t i = 0; i < dim; ++i)
                if (box->lo[i] > box->hi[i])
                    throw std::invalid_argument("Region: box has lo > hi");
        } else {
            const auto& hs = std::get<HalfspacePrim>(m);
            if (hs.normal.size() != dim || nrm2(hs.normal) < 1e-14)
                throw std::invalid_argument("Region: bad halfspace primitive");
        }
    }
}

Region::Region(double a, double b, int n, SublevelShape shape)
    : a_(a), b_(b), n_(n), shape_(std::move(shape)) {
    if (!(b_ > a_)) throw std::invalid_argument("Region: interval must satisfy a < b");
    if (n_ < 1) throw std::invalid_argument("Region: dimension must be >= 1");
    const auto& sub = std::get<SublevelShape>(shape_);
    if (!(sub.bound > 0.0))
        throw std::invalid_argument("Region: sublevel shape needs a positive bounding radius");
    if (sub.h.dimension() != n_)
        throw std::invalid_argument("Region: sublevel expression dimension mismatch");
}

bool Region::sublevel_member(std::span<const double> q, double tol) const {
    const auto& sub = std::get<SublevelShape>(shape_);
    if (nrm2(q) > sub.bound + tol) return false;
    Vec env(q.begin(), q.end());
    if (sub.mirror_x)
        for (std::size_t k = 1; k < env.size(); ++k) env[k] = -env[k];
    return sub.h.eval(env) <= tol;
}

bool Region::contains(std::span<const double> q, double tol) const {
    if (q[0] < a_ - tol || q[0] > b_ + tol) return false;
    if (const auto* cv = std::get_if<ConvexShape>(&shape_)) {
        for (const auto& m : cv->members)
            if (!primitive_contains(m, q, tol)) return false;
        return true;
    }
    return sublevel_member(q, tol);
}

Vec Region::project(std::span<const double> q) const {
    const auto* cv = std::get_if<ConvexShape>(&shape_);
    if (!cv) throw std::domain_error("Region::project: shape is not convex");
    if (contains(q)) return Vec(q.begin(), q.end());

    auto clamp_slab = [&](Vec& y) { y[0] = std::clamp(y[0], a_, b_); };

    if (cv->members.size() == 1) {
        Vec y = project_primitive(cv->members[0], q);
        if (y[0] >= a_ && y[0] <= b_) return y;  // already optimal
    }

    // Dykstra's alternating projections over the members plus the time slab.
    std::size_t dim = q.size();
    std::size_t m = cv->members.size() + 1;
    Vec y(q.begin(), q.end());
    std::vector<Vec> incr(m, Vec(dim, 0.0));
    for (int cycle = 0; cycle < kDykstraMaxCycles; ++cycle) {
        double moved = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            Vec z(dim);
            for (std::size_t c = 0; c < dim; ++c) z[c] = y[c] + incr[i][c];
            Vec yn;
            if (i < cv->members.size()) {
                yn = project_primitive(cv->members[i], z);
            } else {
                yn = z;
                clamp_slab(yn);
            }
            for (std::size_t c = 0; c < dim; ++c) {
                incr[i][c] = z[c] - yn[c];
                moved = std::max(moved, std::fabs(yn[c] - y[c]));
            }
            y = std::move(yn);
        }
        if (moved < kDykstraTol) break;
    }
    return y;
}

double Region::distance(std::span<const double> q) const {
    if (contains(q)) return 0.0;
    if (convex()) {
        Vec p = project(q);
        return std::sqrt(dist2(p, q));
    }
    return sublevel_distance(q);
}

double Region::sublevel_distance(std::span<const double> q) const {
    const auto& sub = std::get<SublevelShape>(shape_);
    std::size_t dim = q.size();

    // Deterministic anchor scan over the bounding set.
    std::vector<Vec> anchors;
    HaltonSampler sampler(static_cast<int>(dim), 3);
    for (int trial = 0; trial < 4000 && anchors.size() < 20; ++trial) {
        auto u = sampler.next();
        Vec cand(dim);
        cand[0] = a_ + (b_ - a_) * u[0];
        for (std::size_t k = 1; k < dim; ++k) cand[k] = sub.bound * (2.0 * u[k] - 1.0);
        if (contains(cand)) anchors.push_back(std::move(cand));
    }
    if (anchors.empty()) return std::numeric_limits<double>::infinity();

    std::mt19937 rng(12345);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& anchor : anchors) {
        // Walk along [anchor, q] to the last member, then polish locally.
        Vec lo = anchor;
        Vec hi(q.begin(), q.end());
        for (int it = 0; it < 60; ++it) {
            Vec mid(dim);
            for (std::size_t c = 0; c < dim; ++c) mid[c] = 0.5 * (lo[c] + hi[c]);
            if (contains(mid)) lo = std::move(mid);
            else hi = std::move(mid);
        }
        Vec y = lo;
        double d = std::sqrt(dist2(y, q));
        double step = 0.25 * d;
        for (int it = 0; it < 60 && step > 1e-12; ++it) {
            Vec cand(dim);
            for (std::size_t c = 0; c < dim; ++c) {
                double toward = (q[c] - y[c]) / std::max(d, 1e-300);
                cand[c] = y[c] + step * toward + 0.25 * step * gauss(rng);
            }
            if (contains(cand)) {
                double dc = std::sqrt(dist2(cand, q));
                if (dc < d) {
                    y = std::move(cand);
                    d = dc;
                    continue;
                }
            }
            step *= 0.7;
        }
        best = std::min(best, d);
    }
    return best;  // upper bound on d_R(q)
}

double Region::pi2_radius() const { return max_x_norm(); }

double Region::max_x_norm() const {
    if (const auto* cv = std::get_if<ConvexShape>(&shape_)) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& m : cv->members) {
            double cand = std::numeric_limits<double>::infinity();
            if (const auto* ball = std::get_if<BallPrim>(&m)) {
                double ct = ball->center[0];
                double dt = 0.0;
                if (ct < a_) dt = a_ - ct;
                else if (ct > b_) dt = ct - b_;
                double span2 = ball->radius * ball->radius - dt * dt;
                double cx = 0.0;
                for (std::size_t k = 1; k < ball->center.size(); ++k)
                    cx += ball->center[k] * ball->center[k];
                cand = std::sqrt(cx) + std::sqrt(std::max(0.0, span2));
            } else if (const auto* xb = std::get_if<XBallPrim>(&m)) {
                cand = nrm2(xb->center_x) + xb->radius;
            } else if (const auto* box = std::get_if<BoxPrim>(&m)) {
                double s = 0.0;
                for (std::size_t k = 1; k < box->lo.size(); ++k)
                    s += std::max(box->lo[k] * box->lo[k], box->hi[k] * box->hi[k]);
                cand = std::sqrt(s);
            }
            best = std::min(best, cand);
        }
        if (!std::isfinite(best))
            throw std::invalid_argument("Region: pi_2(R) is unbounded (no bounding member)");
        return best;
    }
    return std::get<SublevelShape>(shape_).bound;
}

std::optional<Vec> Region::slice_member(double t) const {
    return slice_interior_member(t, 0.0);
}

std::optional<Vec> Region::slice_interior_member(double t, double margin) const {
    if (t < a_ - 1e-12 || t > b_ + 1e-12) return std::nullopt;
    std::size_t nx = static_cast<std::size_t>(n_);
    if (const auto* cv = std::get_if<ConvexShape>(&shape_)) {
        // Every member slices to a convex set in x; cyclic projections onto
        // the margin-shrunken slices find a feasible x when one exists.
        struct SliceBall {
            Vec c;
            double r;
        };
        std::vector<SliceBall> balls;
        std::vector<std::pair<Vec, Vec>> boxes;           // lo, hi in x
        std::vector<std::pair<Vec, double>> halfspaces;   // normal_x, offset'
        for (const auto& m : cv->members) {
            if (const auto* ball = std::get_if<BallPrim>(&m)) {
                double dt = t - ball->center[0];
                double r2 = ball->radius * ball->radius - dt * dt;
                if (r2 < margin * margin) return std::nullopt;
                Vec c(ball->center.begin() + 1, ball->center.end());
                balls.push_back({std::move(c), std::sqrt(r2) - margin});
            } else if (const auto* xb = std::get_if<XBallPrim>(&m)) {
                if (xb->radius < margin) return std::nullopt;
                balls.push_back({xb->center_x, xb->radius - margin});
            } else if (const auto* box = std::get_if<BoxPrim>(&m)) {
                if (t < box->lo[0] || t > box->hi[0]) return std::nullopt;
                Vec lo(box->lo.begin() + 1, box->lo.end());
                Vec hi(box->hi.begin() + 1, box->hi.end());
                for (std::size_t k = 0; k < nx; ++k) {
                    lo[k] += margin;
                    hi[k] -= margin;
                    // A degenerate dimension (lo == hi) is fine at margin 0.
                    if (lo[k] > hi[k]) return std::nullopt;
                }
                boxes.emplace_back(std::move(lo), std::move(hi));
            } else {
                const auto& hs = std::get<HalfspacePrim>(m);
                Vec nx_part(hs.normal.begin() + 1, hs.normal.end());
                double nn = nrm2(nx_part);
                double rhs = hs.offset - hs.normal[0] * t;
                if (nn < 1e-14) {
                    if (rhs < -1e-12) return std::nullopt;  // t alone violates it
                    continue;
                }
                halfspaces.emplace_back(std::move(nx_part), rhs - margin * nn);
            }
        }
        Vec x(nx, 0.0);
        if (!balls.empty()) x = balls[0].c;
        else if (!boxes.empty())
            for (std::size_t k = 0; k < nx; ++k) x[k] = 0.5 * (boxes[0].first[k] + boxes[0].second[k]);
        for (int round = 0; round < 300; ++round) {
            for (const auto& bl : balls) {
                double d = 0.0;
                for (std::size_t k = 0; k < nx; ++k) {
                    double e = x[k] - bl.c[k];
                    d += e * e;
                }
                d = std::sqrt(d);
                if (d > bl.r) {
                    double s = (d > 0) ? bl.r / d : 0.0;
                    for (std::size_t k = 0; k < nx; ++k) x[k] = bl.c[k] + s * (x[k] - bl.c[k]);
                }
            }
            for (const auto& bx : boxes)
                for (std::size_t k = 0; k < nx; ++k) x[k] = std::clamp(x[k], bx.first[k], bx.second[k]);
            for (const auto& hsx : halfspaces) {
                double excess = dot(hsx.first, x) - hsx.second;
                if (excess > 0.0) {
                    double nn = dot(hsx.first, hsx.first);
                    for (std::size_t k = 0; k < nx; ++k) x[k] -= (excess / nn) * hsx.first[k];
                }
            }
        }
        // Verify feasibility of the shrunken system.
        Vec q(nx + 1);
        q[0] = t;
        for (std::size_t k = 0; k < nx; ++k) q[k + 1] = x[k];
        for (const auto& bl : balls) {
            double d = 0.0;
            for (std::size_t k = 0; k < nx; ++k) {
                double e = x[k] - bl.c[k];
                d += e * e;
            }
            if (std::sqrt(d) > bl.r + 1e-9) return std::nullopt;
        }
        for (const auto& bx : boxes)
            for (std::size_t k = 0; k < nx; ++k)
                if (x[k] < bx.first[k] - 1e-9 || x[k] > bx.second[k] + 1e-9) return std::nullopt;
        for (const auto& hsx : halfspaces)
            if (dot(hsx.first, x) > hsx.second + 1e-9) return std::nullopt;
        return q;
    }

    // Sublevel: deterministic scan; interior needs an axis-probe ball.
    const auto& sub = std::get<SublevelShape>(shape_);
    HaltonSampler sampler(n_ == 0 ? 1 : n_, 5);
    for (int trial = 0; trial < 3000; ++trial) {
        auto u = sampler.next();
        Vec q(nx + 1);
        q[0] = t;
        for (std::size_t k = 0; k < nx; ++k) q[k + 1] = sub.bound * (2.0 * u[k] - 1.0);
        if (!contains(q)) continue;
        if (margin <= 0.0) return q;
        bool interior = nrm2(q) <= sub.bound - margin;
        for (std::size_t k = 1; k <= nx && interior; ++k) {
            Vec lo = q, hi = q;
            lo[k] -= margin;
            hi[k] += margin;
            interior = contains(lo) && contains(hi);
        }
        if (interior) return q;
    }
    return std::nullopt;
}

double Region::slice_depth(std::span<const double> q) const {
    if (!contains(q, 1e-12)) return 0.0;
    std::size_t nx = static_cast<std::size_t>(n_);
    if (const auto* cv = std::get_if<ConvexShape>(&shape_)) {
        double depth = std::numeric_limits<double>::infinity();
        for (const auto& m : cv->members) {
            if (const auto* ball = std::get_if<BallPrim>(&m)) {
                double dt = q[0] - ball->center[0];
                double r2 = ball->radius * ball->radius - dt * dt;
                double d = 0.0;
                for (std::size_t k = 0; k < nx; ++k) {
                    double e = q[k + 1] - ball->center[k + 1];
                    d += e * e;
                }
                depth = std::min(depth, std::sqrt(std::max(0.0, r2)) - std::sqrt(d));
            } else if (const auto* xb = std::get_if<XBallPrim>(&m)) {
                double d = 0.0;
                for (std::size_t k = 0; k < nx; ++k) {
                    double e = q[k + 1] - xb->center_x[k];
                    d += e * e;
                }
                depth = std::min(depth, xb->radius - std::sqrt(d));
            } else if (const auto* box = std::get_if<BoxPrim>(&m)) {
                for (std::size_t k = 1; k <= nx; ++k)
                    depth = std::min({depth, q[k] - box->lo[k], box->hi[k] - q[k]});
            } else {
                const auto& hs = std::get<HalfspacePrim>(m);
                Vec nxp(hs.normal.begin() + 1, hs.normal.end());
                double nn = nrm2(nxp);
                if (nn > 1e-14) depth = std::min(depth, (hs.offset - dot(hs.normal, q)) / nn);
            }
        }
        return std::max(0.0, depth);
    }
    // Sublevel: bisect along probe directions; a sampled upper bound.
    const auto& sub = std::get<SublevelShape>(shape_);
    double depth = sub.bound - nrm2(q);
    std::mt19937 rng(777);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Vec> dirs;
    for (std::size_t k = 0; k < nx; ++k) {
        Vec d(nx, 0.0);
        d[k] = 1.0;
        dirs.push_back(d);
        d[k] = -1.0;
        dirs.push_back(d);
    }
    for (int extra = 0; extra < 8; ++extra) {
        Vec d(nx);
        for (auto& v : d) v = gauss(rng);
        double nn = nrm2(d);
        if (nn < 1e-12) continue;
        for (auto& v : d) v /= nn;
        dirs.push_back(d);
    }
    for (const auto& dir : dirs) {
        double lo = 0.0, hi = 2.0 * sub.bound;
        for (int it = 0; it < 50; ++it) {
            double mid = 0.5 * (lo + hi);
            Vec cand(q.begin(), q.end());
            for (std::size_t k = 0; k < nx; ++k) cand[k + 1] += mid * dir[k];
            if (contains(cand)) lo = mid;
            else hi = mid;
        }
        depth = std::min(depth, lo);
    }
    return std::max(0.0, depth);
}

Region Region::mirrored() const {
    if (const auto* cv = std::get_if<ConvexShape>(&shape_)) {
        ConvexShape out;
        for (const auto& m : cv->members) {
            if (const auto* ball = std::get_if<BallPrim>(&m)) {
                BallPrim nb = *ball;
                for (std::size_t k = 1; k < nb.center.size(); ++k) nb.center[k] = -nb.center[k];
                out.members.push_back(nb);
            } else if (const auto* xb = std::get_if<XBallPrim>(&m)) {
                XBallPrim nx = *xb;
                for (auto& c : nx.center_x) c = -c;
                out.members.push_back(nx);
            } else if (const auto* box = std::get_if<BoxPrim>(&m)) {
                BoxPrim nb = *box;
                for (std::size_t k = 1; k < nb.lo.size(); ++k) {
                    double lo = -box->hi[k], hi = -box->lo[k];
                    nb.lo[k] = lo;
                    nb.hi[k] = hi;
                }
                out.members.push_back(nb);
            } else {
                HalfspacePrim nh = std::get<HalfspacePrim>(m);
                for (std::size_t k = 1; k < nh.normal.size(); ++k) nh.normal[k] = -nh.normal[k];
                out.members.push_back(nh);
            }
        }
        return Region(a_, b_, n_, std::move(out));
    }
    SublevelShape sub = std::get<SublevelShape>(shape_);
    sub.mirror_x = !sub.mirror_x;
    return Region(a_, b_, n_, std::move(sub));
}

Vec project_convex(const Region& R, std::span<const double> q) { return R.project(q); }

double distance_to_region(const Region& R, std::span<const double> q) { return R.distance(q); }

namespace {

// (1/2) d_R^2 and its full gradient (q - P_R(q) for convex R, central
// differences otherwise).
struct HalfDistSq {
    std::shared_ptr<const Region> R;

    double value(std::span<const double> q) const {
        double d = R->distance(q);
        return 0.5 * d * d;
    }

    Vec gradient(std::span<const double> q) const {
        Vec g(q.size(), 0.0);
        if (R->convex()) {
            Vec p = R->project(q);
            for (std::size_t i = 0; i < q.size(); ++i) g[i] = q[i] - p[i];
            return g;
        }
        Vec work(q.begin(), q.end());
        for (std::size_t i = 0; i < q.size(); ++i) {
            double step = 1e-6 * (1.0 + std::fabs(q[i]));
            double keep = work[i];
            work[i] = keep + step;
            double hp = value(work);
            work[i] = keep - step;
            double hm = value(work);
            work[i] = keep;
            g[i] = (hp - hm) / (2.0 * step);
        }
        return g;
    }
};

Vec assemble_q(double t, std::span<const double> x) {
    Vec q(x.size() + 1);
    q[0] = t;
    for (std::size_t k = 0; k < x.size(); ++k) q[k + 1] = x[k];
    return q;
}

// phi(t,x) = (1/2) d_R^2 * sigma(d_C(x)), which vanishes exactly on
// R union (I x (R^n \ D)) and is C^1 for convex R.
struct ConstructKernel {
    HalfDistSq dist;
    double r;  // C = B[0,r], D = B(0,r+1)

    double d_C(std::span<const double> x) const { return std::max(0.0, nrm2(x) - r); }

    double phi(double t, std::span<const double> x) const {
        Vec q = assemble_q(t, x);
        return dist.value(q) * sigma_cut(d_C(x));
    }

    // Value, time derivative and x-gradient of h at (t,x).
    void eval(double t, std::span<const double> x, double* h_out, double* dhdt_out,
              std::span<double> grad_out) const {
        Vec q = assemble_q(t, x);
        double s = d_C(x);
        double xnorm = nrm2(x);

        double hd = 0.0, dhd_dt = 0.0;
        Vec grad_phi_x(x.size(), 0.0);
        double phi_v = 0.0;
        if (s < 1.0) {  // phi vanishes identically outside D
            hd = dist.value(q);
            Vec g = dist.gradient(q);
            double sig = sigma_cut(s), sigp = sigma_cut_prime(s);
            phi_v = hd * sig;
            dhd_dt = g[0] * sig;
            for (std::size_t k = 0; k < x.size(); ++k) {
                grad_phi_x[k] = g[k + 1] * sig;
                if (s > 0.0 && xnorm > 0.0)
                    grad_phi_x[k] += hd * sigp * (x[k] / xnorm);  // grad d_C = (x-P_C x)/d_C
            }
        }

        if (s <= 0.0) {
            if (h_out) *h_out = phi_v;
            if (dhdt_out) *dhdt_out = dhd_dt;
            if (!grad_out.empty())
                for (std::size_t k = 0; k < x.size(); ++k) grad_out[k] = grad_phi_x[k];
            return;
        }

        // x - P_C(x) for the origin-centered ball of radius r.
        Vec xc(x.size());
        double scale = (xnorm > 0.0) ? (1.0 - r / xnorm) : 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) xc[k] = scale * x[k];

        if (s < 1.0) {
            double blend = 1.0 - s * s;
            if (h_out) *h_out = blend * phi_v + 0.5 * s * s;
            if (dhdt_out) *dhdt_out = blend * dhd_dt;
            if (!grad_out.empty())
                for (std::size_t k = 0; k < x.size(); ++k)
                    grad_out[k] = -2.0 * xc[k] * phi_v + blend * grad_phi_x[k] + xc[k];
        } else {
            if (h_out) *h_out = 0.5 * s * s;
            if (dhdt_out) *dhdt_out = 0.0;
            if (!grad_out.empty())
                for (std::size_t k = 0; k < x.size(); ++k) grad_out[k] = xc[k];
        }
    }
};

double sample_p2_sup(const AdmissiblePair& pair, double radius, int samples) {
    const Region& R = *pair.region;
    HaltonSampler sampler(R.n() + 1, 11);
    std::size_t nx = static_cast<std::size_t>(R.n());
    double sup = 0.0;
    for (int i = 0; i < samples; ++i) {
        auto u = sampler.next();
        double t = R.a() + (R.b() - R.a()) * u[0];
        Vec x(nx);
        for (std::size_t k = 0; k < nx; ++k) x[k] = radius * (2.0 * u[k + 1] - 1.0);
        if (nrm2(x) > radius) continue;
        double p1;
        Vec p2(nx);
        pair.p(t, x, p1, p2);
        sup = std::max(sup, nrm2(p2));
    }
    return sup;
}

double sample_h_sup(const AdmissiblePair& pair, int samples) {
    const Region& R = *pair.region;
    HaltonSampler sampler(R.n() + 1, 13);
    std::size_t nx = static_cast<std::size_t>(R.n());
    double sup = 0.0;
    for (int i = 0; i < samples; ++i) {
        auto u = sampler.next();
        double t = R.a() + (R.b() - R.a()) * u[0];
        Vec x(nx);
        for (std::size_t k = 0; k < nx; ++k) x[k] = pair.work_radius * (2.0 * u[k + 1] - 1.0);
        if (nrm2(x) > pair.work_radius) continue;
        sup = std::max(sup, std::fabs(pair.h(t, x)));
    }
    return sup;
}

}  // namespace

AdmissiblePair construct_admissible_pair(std::shared_ptr<const Region> R) {
    double r = R->pi2_radius();  // throws for unbounded pi_2(R)
    // (H0) must hold before the construction makes sense.
    std::size_t slices = 33;
    for (std::size_t j = 0; j <= slices; ++j) {
        double t = R->a() + (R->b() - R->a()) * static_cast<double>(j) / static_cast<double>(slices);
        if (!R->slice_member(t))
            throw std::invalid_argument("construct_admissible_pair: (H0) fails, empty slice at t=" +
                                        std::to_string(t));
    }

    auto kernel = std::make_shared<ConstructKernel>(ConstructKernel{HalfDistSq{R}, r});

    AdmissiblePair pair;
    pair.region = R;
    pair.provenance = AdmissiblePair::Provenance::constructed;
    pair.work_radius = r + 3.0;
    pair.h_nonnegative = true;
    pair.h = [kernel](double t, std::span<const double> x) {
        double h;
        kernel->eval(t, x, &h, nullptr, {});
        return h;
    };
    pair.dh_dt = [kernel](double t, std::span<const double> x) {
        double d;
        kernel->eval(t, x, nullptr, &d, {});
        return d;
    };
    pair.grad_x = [kernel](double t, std::span<const double> x, std::span<double> out) {
        kernel->eval(t, x, nullptr, nullptr, out);
    };
    pair.p = [kernel](double t, std::span<const double> x, double& p1, std::span<double> p2) {
        p1 = t;
        kernel->eval(t, x, nullptr, nullptr, p2);
        for (std::size_t k = 0; k < x.size(); ++k) p2[k] = x[k] - p2[k];
    };
    pair.p2_bound = std::max(r, 1.02 * sample_p2_sup(pair, r + 1.0, 3000));
    return pair;
}

AdmissiblePair half_dist_sq_pair(std::shared_ptr<const Region> R) {
    if (!R->convex())
        throw std::domain_error("half_dist_sq_pair: exact gradients need a convex region");
    auto dist = std::make_shared<HalfDistSq>(HalfDistSq{R});
    AdmissiblePair pair;
    pair.region = R;
    pair.provenance = AdmissiblePair::Provenance::half_dist_sq;
    pair.work_radius = R->pi2_radius() + 3.0;
    pair.h_nonnegative = true;
    pair.h = [dist](double t, std::span<const double> x) {
        return dist->value(assemble_q(t, x));
    };
    pair.dh_dt = [dist](double t, std::span<const double> x) {
        return dist->gradient(assemble_q(t, x))[0];
    };
    pair.grad_x = [dist](double t, std::span<const double> x, std::span<double> out) {
        Vec g = dist->gradient(assemble_q(t, x));
        for (std::size_t k = 0; k < x.size(); ++k) out[k] = g[k + 1];
    };
    pair.p = [R](double t, std::span<const double> x, double& p1, std::span<double> p2) {
        Vec proj = R->project(assemble_q(t, x));
        p1 = proj[0];
        for (std::size_t k = 0; k < x.size(); ++k) p2[k] = proj[k + 1];
    };
    pair.p2_bound = R->max_x_norm();
    return pair;
}

AdmissiblePair pair_from_user(std::shared_ptr<const Region> R, const Expression& h_expr,
                              const std::vector<Expression>* p_exprs) {
    if (h_expr.dimension() != R->n())
        throw std::invalid_argument("pair_from_user: h expression dimension mismatch");
    std::size_t nx = static_cast<std::size_t>(R->n());
    double r = R->pi2_radius();

    auto h_eval = [h_expr](double t, std::span<const double> x) {
        Vec env(x.size() + 1);
        env[0] = t;
        for (std::size_t k = 0; k < x.size(); ++k) env[k + 1] = x[k];
        return h_expr.eval(env);
    };

    AdmissiblePair pair;
    pair.region = R;
    pair.provenance = AdmissiblePair::Provenance::user;
    pair.work_radius = r + 3.0;
    pair.h = h_eval;
    pair.dh_dt = [h_eval](double t, std::span<const double> x) {
        double step = 1e-6 * (1.0 + std::fabs(t));
        return (h_eval(t + step, x) - h_eval(t - step, x)) / (2.0 * step);
    };
    pair.grad_x = [h_eval](double t, std::span<const double> x, std::span<double> out) {
        Vec work(x.begin(), x.end());
        for (std::size_t k = 0; k < x.size(); ++k) {
            double step = 1e-6 * (1.0 + std::fabs(x[k]));
            double keep = work[k];
            work[k] = keep + step;
            double hp = h_eval(t, work);
            work[k] = keep - step;
            double hm = h_eval(t, work);
            work[k] = keep;
            out[k] = (hp - hm) / (2.0 * step);
        }
    };

    if (p_exprs) {
        if (p_exprs->size() != nx + 1)
            throw std::invalid_argument("pair_from_user: p needs n+1 component expressions");
        for (const auto& e : *p_exprs)
            if (e.dimension() != R->n())
                throw std::invalid_argument("pair_from_user: p expression dimension mismatch");
        auto exprs = std::make_shared<std::vector<Expression>>(*p_exprs);
        pair.p = [exprs](double t, std::span<const double> x, double& p1, std::span<double> p2) {
            Vec env(x.size() + 1);
            env[0] = t;
            for (std::size_t k = 0; k < x.size(); ++k) env[k + 1] = x[k];
            p1 = (*exprs)[0].eval(env);
            for (std::size_t k = 0; k < x.size(); ++k) p2[k] = (*exprs)[k + 1].eval(env);
        };
    } else {
        // Default p2 = x - grad_x h, value-clamped into B[0, r+1] so p stays
        // bounded even when the user h grows fast.
        auto grad = pair.grad_x;
        double cap = r + 1.0;
        pair.p = [grad, cap](double t, std::span<const double> x, double& p1,
                             std::span<double> p2) {
            p1 = t;
            grad(t, x, p2);
            double s = 0.0;
            for (std::size_t k = 0; k < x.size(); ++k) {
                p2[k] = x[k] - p2[k];
                s += p2[k] * p2[k];
            }
            s = std::sqrt(s);
            if (s > cap)
                for (std::size_t k = 0; k < x.size(); ++k) p2[k] *= cap / s;
        };
    }

    // (H1) probe: sign of h must agree with membership away from the boundary.
    {
        HaltonSampler sampler(R->n() + 1, 17);
        for (int i = 0; i < 400; ++i) {
            auto u = sampler.next();
            double t = R->a() + (R->b() - R->a()) * u[0];
            Vec x(nx);
            for (std::size_t k = 0; k < nx; ++k) x[k] = pair.work_radius * (2.0 * u[k + 1] - 1.0);
            if (nrm2(x) > pair.work_radius) continue;
            double hv = h_eval(t, x);
            if (std::fabs(hv) < 1e-7) continue;  // boundary band, ambiguous
            Vec q = assemble_q(t, x);
            bool member = R->contains(q);
            if (member && hv > 1e-7)
                throw std::invalid_argument("pair_from_user: (H1) violated, h > 0 at a member");
            if (!member && hv < -1e-7 && R->distance(q) > 1e-3)
                throw std::invalid_argument("pair_from_user: (H1) violated, h < 0 off the region");
        }
    }

    pair.p2_bound = std::max(r, 1.02 * sample_p2_sup(pair, r + 1.0, 2000));

    double min_h = 0.0;
    {
        HaltonSampler sampler(R->n() + 1, 19);
        for (int i = 0; i < 1500; ++i) {
            auto u = sampler.next();
            double t = R->a() + (R->b() - R->a()) * u[0];
            Vec x(nx);
            for (std::size_t k = 0; k < nx; ++k) x[k] = pair.work_radius * (2.0 * u[k + 1] - 1.0);
            if (nrm2(x) > pair.work_radius) continue;
            min_h = std::min(min_h, h_eval(t, x));
        }
    }
    pair.h_nonnegative = min_h >= -1e-12;
    return pair;
}

AdmissiblePair rescale_pair(const AdmissiblePair& P, std::function<double(double)> beta,
                            std::function<double(double)> beta_prime) {
    const Region& R = *P.region;
    for (int j = 0; j <= 200; ++j) {
        double t = R.a() + (R.b() - R.a()) * j / 200.0;
        if (!(beta(t) > 0.0))
            throw std::invalid_argument("rescale_pair: beta must be positive on the interval");
    }
    AdmissiblePair out = P;
    auto h0 = P.h;
    auto dh0 = P.dh_dt;
    auto g0 = P.grad_x;
    out.h = [h0, beta](double t, std::span<const double> x) { return beta(t) * h0(t, x); };
    out.dh_dt = [h0, dh0, beta, beta_prime](double t, std::span<const double> x) {
        return beta_prime(t) * h0(t, x) + beta(t) * dh0(t, x);
    };
    out.grad_x = [g0, beta](double t, std::span<const double> x, std::span<double> grad) {
        g0(t, x, grad);
        double bt = beta(t);
        for (auto& v : grad) v *= bt;
    };
    return out;
}

AdmissiblePair sum_pairs(const AdmissiblePair& P1, const AdmissiblePair& P2) {
    const Region& R = *P1.region;
    std::size_t nx = static_cast<std::size_t>(R.n());
    HaltonSampler sampler(R.n() + 1, 23);
    for (int i = 0; i < 8; ++i) {
        auto u = sampler.next();
        double t = R.a() + (R.b() - R.a()) * u[0];
        Vec x(nx);
        for (std::size_t k = 0; k < nx; ++k) x[k] = P1.work_radius * (2.0 * u[k + 1] - 1.0);
        double p1a, p1b;
        Vec p2a(nx), p2b(nx);
        P1.p(t, x, p1a, p2a);
        P2.p(t, x, p1b, p2b);
        double diff = std::fabs(p1a - p1b);
        for (std::size_t k = 0; k < nx; ++k) diff = std::max(diff, std::fabs(p2a[k] - p2b[k]));
        if (diff > 1e-12)
            throw std::invalid_argument("sum_pairs: the two pairs do not share p");
    }
    AdmissiblePair out = P1;
    auto h1 = P1.h, h2 = P2.h;
    auto d1 = P1.dh_dt, d2 = P2.dh_dt;
    auto g1 = P1.grad_x, g2 = P2.grad_x;
    out.h = [h1, h2](double t, std::span<const double> x) { return h1(t, x) + h2(t, x); };
    out.dh_dt = [d1, d2](double t, std::span<const double> x) { return d1(t, x) + d2(t, x); };
    out.grad_x = [g1, g2, nx](double t, std::span<const double> x, std::span<double> grad) {
        Vec tmp(nx);
        g1(t, x, grad);
        g2(t, x, tmp);
        for (std::size_t k = 0; k < nx; ++k) grad[k] += tmp[k];
    };
    out.h_nonnegative = P1.h_nonnegative && P2.h_nonnegative;
    return out;
}

HhatResult build_hhat(const AdmissiblePair& P, double eps, double delta, double t0) {
    const Region& R = *P.region;
    if (!(eps > 0.0)) throw std::invalid_argument("build_hhat: eps must be positive");
    if (!(delta > 0.0)) throw std::invalid_argument("build_hhat: delta must be positive");
    if (!(t0 - delta > R.a() && t0 + delta < R.b()))
        throw std::invalid_argument("build_hhat: window [t0-delta, t0+delta] must sit inside (a,b)");

    HhatResult res;
    res.t0 = t0;
    res.delta = delta;
    res.h_sup_sampled = sample_h_sup(P, 4000);
    if (res.h_sup_sampled == 0.0) {
        res.pair = P;  // degenerate: h vanishes on the working box, hhat == h
        return res;
    }

    const double kappa = 16.0 / (3.0 * std::sqrt(3.0));
    double eta = 0.9 * eps * delta / (kappa * res.h_sup_sampled);
    res.eta = eta;
    // max |bump'| = 8/(3 sqrt 3); beta' = (eta/delta) bump'((t-t0)/delta).
    res.beta_prime_sup = eta / delta * (8.0 / (3.0 * std::sqrt(3.0)));

    auto beta = [eta, t0, delta](double t) {
        double z = (t - t0) / delta;
        if (z <= -1.0 || z >= 1.0) return 1.0;
        double w = 1.0 - z * z;
        return 1.0 + eta * w * w;
    };
    auto beta_prime = [eta, t0, delta](double t) {
        double z = (t - t0) / delta;
        if (z <= -1.0 || z >= 1.0) return 0.0;
        return (eta / delta) * (-4.0 * z * (1.0 - z * z));
    };
    res.pair = rescale_pair(P, beta, beta_prime);
    return res;
}

AdmissiblePair mirror_pair(const AdmissiblePair& P,
                           std::shared_ptr<const Region> mirrored_region) {
    AdmissiblePair out = P;
    out.region = std::move(mirrored_region);
    auto h0 = P.h;
    auto d0 = P.dh_dt;
    auto g0 = P.grad_x;
    auto p0 = P.p;
    auto flip = [](std::span<const double> x) {
        Vec nx(x.size());
        for (std::size_t k = 0; k < x.size(); ++k) nx[k] = -x[k];
        return nx;
    };
    out.h = [h0, flip](double t, std::span<const double> x) { return h0(t, flip(x)); };
    out.dh_dt = [d0, flip](double t, std::span<const double> x) { return d0(t, flip(x)); };
    out.grad_x = [g0, flip](double t, std::span<const double> x, std::span<double> grad) {
        g0(t, flip(x), grad);
        for (auto& v : grad) v = -v;
    };
    out.p = [p0, flip](double t, std::span<const double> x, double& p1, std::span<double> p2) {
        p0(t, flip(x), p1, p2);
        for (auto& v : p2) v = -v;
    };
    return out;
}

}  // namespace regionsolve
