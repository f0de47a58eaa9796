#include "regionsolve/hypotheses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "regionsolve/sampling.hpp"

namespace regionsolve {

namespace {

constexpr double kShellWidth = 1e-3;

double nrm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

std::vector<SamplePoint> stratified_samples(const AdmissiblePair& pair, std::size_t count,
                                            std::uint64_t seed) {
    const Region& R = *pair.region;
    std::size_t nx = static_cast<std::size_t>(R.n());
    double K = pair.work_radius;
    double mid_radius = std::min(K, R.pi2_radius() + 1.5);

    std::vector<SamplePoint> out;
    out.reserve(count);
    HaltonSampler sampler(R.n() + 1, seed);

    auto draw = [&](double radius) -> std::optional<Vec> {
        auto u = sampler.next();
        Vec q(nx + 1);
        q[0] = R.a() + (R.b() - R.a()) * u[0];
        double s = 0.0;
        for (std::size_t k = 0; k < nx; ++k) {
            q[k + 1] = radius * (2.0 * u[k + 1] - 1.0);
            s += q[k + 1] * q[k + 1];
        }
        if (std::sqrt(s) > radius) return std::nullopt;
        return q;
    };

    // Mid-range and far-field strata (about 3/4 of the budget) with labels.
    std::size_t volume_target = 3 * count / 4;
    std::size_t attempts = 0;
    while (out.size() < volume_target && attempts < 20 * count) {
        ++attempts;
        bool far = (attempts % 3 == 0);
        auto q = draw(far ? K : mid_radius);
        if (!q) continue;
        SamplePoint p;
        p.member = R.contains(*q);
        p.q = std::move(*q);
        out.push_back(std::move(p));
    }

    // Boundary shell: walk off-region draws to the boundary, then offset
    // about kShellWidth to both sides.
    std::size_t shell_target = count - out.size();
    attempts = 0;
    std::optional<Vec> anchor;  // a known member, for the non-convex bisection
    for (const auto& p : out)
        if (p.member) {
            anchor = p.q;
            break;
        }
    while (shell_target > 0 && attempts < 40 * count) {
        ++attempts;
        auto q = draw(mid_radius);
        if (!q || R.contains(*q)) continue;
        Vec boundary;
        if (R.convex()) {
            boundary = R.project(*q);
        } else {
            if (!anchor) break;
            Vec lo = *anchor, hi = *q;
            for (int it = 0; it < 50; ++it) {
                Vec midp(lo.size());
                for (std::size_t c = 0; c < lo.size(); ++c) midp[c] = 0.5 * (lo[c] + hi[c]);
                if (R.contains(midp)) lo = std::move(midp);
                else hi = std::move(midp);
            }
            boundary = lo;
        }
        Vec dir(boundary.size());
        double dn = 0.0;
        for (std::size_t c = 0; c < dir.size(); ++c) {
            dir[c] = (*q)[c] - boundary[c];
            dn += dir[c] * dir[c];
        }
        dn = std::sqrt(dn);
        if (dn < 1e-12) continue;
        for (auto& v : dir) v /= dn;
        for (double sign : {+1.0, -1.0}) {
            if (shell_target == 0) break;
            Vec s(boundary.size());
            for (std::size_t c = 0; c < s.size(); ++c) s[c] = boundary[c] + sign * kShellWidth * dir[c];
            if (s[0] < R.a() || s[0] > R.b()) continue;
            bool member = R.contains(s);
            if ((sign > 0 && member) || (sign < 0 && !member)) continue;  // slab-face artifacts
            out.push_back({std::move(s), member, true});
            --shell_target;
        }
    }
    return out;
}

CheckReport check_H0(const Region& R, std::size_t grid) {
    CheckReport rep;
    rep.hypothesis = "H0";
    rep.samples = grid + 1;
    for (std::size_t j = 0; j <= grid; ++j) {
        double t = R.a() + (R.b() - R.a()) * static_cast<double>(j) / static_cast<double>(grid);
        if (!R.slice_member(t)) {
            rep.verdict = CheckReport::Verdict::fail;
            rep.worst_violation = 1.0;
            rep.witness = {t};
            rep.note = "empty slice R_t";
            return rep;
        }
    }
    return rep;
}

CheckReport check_H0prime(const Region& R, double margin, std::size_t grid) {
    CheckReport rep;
    rep.hypothesis = "H0'";
    rep.samples = grid + 1;
    rep.tolerance = margin;
    for (std::size_t j = 0; j <= grid; ++j) {
        double t = R.a() + (R.b() - R.a()) * static_cast<double>(j) / static_cast<double>(grid);
        if (!R.slice_interior_member(t, margin)) {
            rep.verdict = CheckReport::Verdict::fail;
            rep.worst_violation = 1.0;
            rep.witness = {t};
            rep.note = "slice R_t has no interior point at margin";
            return rep;
        }
    }
    return rep;
}

CheckReport check_H1(const AdmissiblePair& pair, std::size_t samples, std::uint64_t seed) {
    CheckReport rep;
    rep.hypothesis = "H1";
    rep.tolerance = 1e-9;
    auto pts = stratified_samples(pair, samples, seed);
    rep.samples = pts.size();
    for (const auto& p : pts) {
        double hv = pair.h(p.q[0], std::span<const double>(p.q).subspan(1));
        double violation = 0.0;
        if (p.member && hv > rep.tolerance) violation = hv;
        if (!p.member && hv < -rep.tolerance) violation = -hv;
        if (violation > rep.worst_violation) {
            rep.worst_violation = violation;
            rep.witness = p.q;
        }
    }
    if (rep.worst_violation > rep.tolerance) {
        rep.verdict = CheckReport::Verdict::fail;
        rep.note = "sign of h disagrees with membership";
    }
    return rep;
}

CheckReport check_H3(const AdmissiblePair& pair, std::size_t samples, std::uint64_t seed) {
    CheckReport rep;
    rep.hypothesis = "H3";
    rep.tolerance = 1e-8;
    auto pts = stratified_samples(pair, samples, seed);
    rep.samples = pts.size();
    std::size_t nx = static_cast<std::size_t>(pair.region->n());
    Vec p2(nx), grad(nx);
    double p2_sup = 0.0;
    for (const auto& p : pts) {
        double t = p.q[0];
        auto x = std::span<const double>(p.q).subspan(1);
        double p1;
        pair.p(t, x, p1, p2);
        p2_sup = std::max(p2_sup, nrm2(p2));
        double violation = 0.0;
        if (p.member) {
            double d = (p1 - t) * (p1 - t);
            for (std::size_t k = 0; k < nx; ++k) {
                double e = p2[k] - x[k];
                d += e * e;
            }
            violation = std::sqrt(d);  // p must fix R
        } else {
            pair.grad_x(t, x, grad);
            double inner = 0.0;
            for (std::size_t k = 0; k < nx; ++k) inner += grad[k] * (p2[k] - x[k]);
            violation = std::max(0.0, inner);
        }
        if (violation > rep.worst_violation) {
            rep.worst_violation = violation;
            rep.witness = p.q;
        }
    }
    rep.aux = p2_sup;
    rep.note = "sup ||p2|| over samples = " + std::to_string(p2_sup);
    if (rep.worst_violation > rep.tolerance) {
        rep.verdict = CheckReport::Verdict::fail;
        rep.note = "identity on R or transversality off R fails; " + rep.note;
    }
    return rep;
}

namespace {

CheckReport check_H4_impl(const char* name, const AdmissiblePair& pair, const FieldFn& f,
                          std::size_t samples, std::uint64_t seed, double demand,
                          std::optional<std::pair<double, double>> window,
                          std::optional<double> band_eps) {
    CheckReport rep;
    rep.hypothesis = name;
    rep.tolerance = 1e-8;
    if (band_eps && pair.h_nonnegative) {
        rep.note = "vacuous pass: h >= 0, the band h in (-eps,0) is empty";
        rep.samples = 0;
        return rep;
    }
    auto pts = stratified_samples(pair, samples, seed);
    std::size_t nx = static_cast<std::size_t>(pair.region->n());
    Vec grad(nx), p2(nx), fv(nx);
    double max_L = -std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    for (const auto& p : pts) {
        double t = p.q[0];
        if (window && (t < window->first || t > window->second)) continue;
        auto x = std::span<const double>(p.q).subspan(1);
        if (band_eps) {
            double hv = pair.h(t, x);
            if (!(hv > -*band_eps && hv < 0.0)) continue;
        } else {
            if (p.member) continue;  // off-R quantifier
        }
        ++used;
        double p1;
        pair.p(t, x, p1, p2);
        f(p1, p2, fv);
        pair.grad_x(t, x, grad);
        double L = pair.dh_dt(t, x);
        for (std::size_t k = 0; k < nx; ++k) L += grad[k] * fv[k];
        if (L > max_L) {
            max_L = L;
            rep.witness = p.q;
        }
    }
    rep.samples = used;
    if (used == 0) {
        rep.note = "vacuous pass: empty sample set";
        rep.witness.clear();
        return rep;
    }
    rep.aux = -max_L;  // largest certifiable eps at this resolution
    rep.worst_violation = std::max(0.0, max_L - demand);
    if (rep.worst_violation > rep.tolerance) {
        rep.verdict = CheckReport::Verdict::fail;
        rep.note = "max L = " + std::to_string(max_L);
    } else {
        rep.note = "max L = " + std::to_string(max_L) + " at resolution " + std::to_string(used);
    }
    return rep;
}

}  // namespace

CheckReport check_H4(const AdmissiblePair& pair, const FieldFn& f, std::size_t samples,
                     std::uint64_t seed) {
    return check_H4_impl("H4", pair, f, samples, seed, 0.0, std::nullopt, std::nullopt);
}

CheckReport check_H4prime(const AdmissiblePair& pair, const FieldFn& f, double eps, double delta,
                          double t0, std::size_t samples, std::uint64_t seed) {
    const Region& R = *pair.region;
    if (!(t0 - delta > R.a() && t0 + delta < R.b()))
        throw std::invalid_argument("check_H4prime: window must sit inside (a,b)");
    if (!(eps > 0.0)) throw std::invalid_argument("check_H4prime: eps must be positive");
    return check_H4_impl("H4'", pair, f, samples, seed, -eps,
                         std::make_pair(t0 - delta, t0 + delta), std::nullopt);
}

CheckReport check_H4doubleprime(const AdmissiblePair& pair, const FieldFn& f, double eps,
                                std::size_t samples, std::uint64_t seed) {
    if (!(eps > 0.0)) throw std::invalid_argument("check_H4doubleprime: eps must be positive");
    return check_H4_impl("H4''", pair, f, samples, seed, 0.0, std::nullopt, eps);
}

CheckReport check_H5(const std::vector<SampledPath>& candidates, const AdmissiblePair& pair,
                     double C, bool strict) {
    CheckReport rep;
    rep.hypothesis = strict ? "H5''" : "H5";
    rep.tolerance = strict ? -1e-10 : 1e-8;
    std::size_t skipped = 0;
    for (const auto& u : candidates) {
        if (u.sup_norm() > C + 1e-9) {
            ++skipped;
            continue;  // the hypothesis only quantifies over ||u||_0 <= C
        }
        ++rep.samples;
        double wa = pair.h(u.a, u.at(0));
        double wb = pair.h(u.b, u.at(u.N));
        bool ok = strict ? (wa < -1e-10 || wa < wb - 1e-10) : (wa <= 1e-8 || wa <= wb + 1e-8);
        if (!ok) {
            double violation = std::min(wa, wa - wb);
            if (violation > rep.worst_violation || rep.witness.empty()) {
                rep.worst_violation = violation;
                rep.witness.assign(1, u.a);
                auto ua = u.at(0);
                rep.witness.insert(rep.witness.end(), ua.begin(), ua.end());
            }
            rep.verdict = CheckReport::Verdict::fail;
        }
    }
    if (skipped > 0) rep.note = std::to_string(skipped) + " candidate(s) with ||u||_0 > C skipped";
    if (rep.verdict == CheckReport::Verdict::fail)
        rep.note = "disjunction fails for a candidate; " + rep.note;
    return rep;
}

CheckReport check_H6(const AdmissiblePair& pair, const AdmissiblePair& hhat, const FieldFn* f,
                     std::size_t samples, std::uint64_t seed) {
    CheckReport rep;
    rep.hypothesis = "H6";
    const Region& R = *pair.region;
    std::size_t nx = static_cast<std::size_t>(R.n());

    auto pts = stratified_samples(pair, samples, seed);
    rep.samples = pts.size();

    // Scan a time grid: t1 needs hhat(t1,.) == h(t1,.) on every sample;
    // t2 needs hhat(t2,x) != h(t2,x) on every sampled x off R_{t2}.
    const std::size_t tgrid = 41;
    bool found_t1 = false, found_t2 = false;
    double t1 = 0.0, t2 = 0.0;
    HaltonSampler xsampler(R.n(), seed + 101);
    std::vector<Vec> xs;
    for (int i = 0; i < 160; ++i) {
        auto u = xsampler.next();
        Vec x(nx);
        double s = 0.0;
        for (std::size_t k = 0; k < nx; ++k) {
            x[k] = pair.work_radius * (2.0 * u[k] - 1.0);
            s += x[k] * x[k];
        }
        if (std::sqrt(s) <= pair.work_radius) xs.push_back(std::move(x));
    }
    for (std::size_t j = 0; j <= tgrid; ++j) {
        double t = R.a() + (R.b() - R.a()) * static_cast<double>(j) / static_cast<double>(tgrid);
        bool all_equal = true, all_differ_off_R = true;
        std::size_t off_count = 0;
        for (const auto& x : xs) {
            double hv = pair.h(t, x);
            double hh = hhat.h(t, x);
            double diff = std::fabs(hh - hv);
            if (diff > 1e-12 * (1.0 + std::fabs(hv))) all_equal = false;
            Vec q(nx + 1);
            q[0] = t;
            for (std::size_t k = 0; k < nx; ++k) q[k + 1] = x[k];
            if (!R.contains(q)) {
                ++off_count;
                if (diff <= 1e-12 * (1.0 + std::fabs(hv))) all_differ_off_R = false;
            }
        }
        if (all_equal && !found_t1) {
            found_t1 = true;
            t1 = t;
        }
        if (off_count > 0 && all_differ_off_R && !found_t2) {
            found_t2 = true;
            t2 = t;
        }
    }
    if (!found_t1 || !found_t2) {
        rep.verdict = CheckReport::Verdict::fail;
        rep.note = !found_t1 ? "no t1 with hhat(t1,.) == h(t1,.) found"
                             : "no t2 with hhat(t2,.) != h(t2,.) off R_t2 found";
        return rep;
    }

    // hhat must itself remain admissible (H1, H3); H4 when the field is
    // supplied. H5 is untouched when hhat agrees with h at both endpoints.
    CheckReport h1 = check_H1(hhat, samples, seed + 7);
    CheckReport h3 = check_H3(hhat, samples, seed + 7);
    if (!h1.passed() || !h3.passed()) {
        rep.verdict = CheckReport::Verdict::fail;
        rep.note = "hhat fails " + std::string(!h1.passed() ? "H1" : "H3");
        rep.worst_violation = !h1.passed() ? h1.worst_violation : h3.worst_violation;
        rep.witness = !h1.passed() ? h1.witness : h3.witness;
        return rep;
    }
    if (f) {
        CheckReport h4 = check_H4(hhat, *f, samples, seed + 7);
        if (!h4.passed()) {
            rep.verdict = CheckReport::Verdict::fail;
            rep.note = "hhat fails H4";
            rep.worst_violation = h4.worst_violation;
            rep.witness = h4.witness;
            return rep;
        }
    }
    bool endpoints_equal = true;
    for (const auto& x : xs) {
        for (double t : {R.a(), R.b()}) {
            double hv = pair.h(t, x), hh = hhat.h(t, x);
            if (std::fabs(hh - hv) > 1e-12 * (1.0 + std::fabs(hv))) endpoints_equal = false;
        }
    }
    rep.note = "t1=" + std::to_string(t1) + ", t2=" + std::to_string(t2) +
               (endpoints_equal ? "; hhat matches h at both endpoints (H5 unchanged)"
                                : "; endpoint values differ, re-certify H5 for hhat");
    return rep;
}

BarrierVerdict barrier_verdict(const BarrierInstance& inst, const BarrierOptions& opt) {
    const auto& w = inst.w;
    std::size_t N = w.size() - 1;
    double h = (inst.b - inst.a) / static_cast<double>(N);

    // 3(a)/(b): the endpoint condition of the lemma.
    bool mode_ok = inst.mode == BarrierInstance::Mode::initial
                       ? (w.front() <= inst.z + opt.level_tol)
                       : (w.front() <= w.back() + opt.level_tol);
    if (!mode_ok)
        return {BarrierVerdict::Kind::hypotheses_violated, 0.0,
                inst.mode == BarrierInstance::Mode::initial ? "w(a) > z" : "w(a) > w(b)"};

    // w' <= 0 a.e. on J: every edge meeting {w > z} must be nonincreasing.
    for (std::size_t j = 0; j < N; ++j) {
        if (std::max(w[j], w[j + 1]) <= inst.z + opt.level_tol) continue;
        double slope = (w[j + 1] - w[j]) / h;
        if (slope > opt.slope_tol)
            return {BarrierVerdict::Kind::hypotheses_violated, 0.0,
                    "w increases on J near node " + std::to_string(j)};
    }

    double wmax = *std::max_element(w.begin(), w.end());
    if (wmax <= inst.z + opt.level_tol) return {BarrierVerdict::Kind::below_z, 0.0, ""};

    double wmin = *std::min_element(w.begin(), w.end());
    if (wmax - wmin <= opt.level_tol) {
        double k = w.front();
        std::string note = k > 0.0 ? "" : "constant value is not positive (z < 0 case)";
        return {BarrierVerdict::Kind::constant_k, k, note};
    }
    // Unreachable for exact data; tolerance ratcheting can land here.
    return {BarrierVerdict::Kind::hypotheses_violated, 0.0,
            "inconsistent at tolerance: w exceeds z, is non-constant, yet no increase found"};
}

}  // namespace regionsolve
