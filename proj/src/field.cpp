#include "regionsolve/field.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "regionsolve/sampling.hpp"

namespace regionsolve {

namespace {

double nrm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

FieldFn field_from_expressions(std::vector<Expression> components) {
    auto exprs = std::make_shared<std::vector<Expression>>(std::move(components));
    return [exprs](double t, std::span<const double> x, std::span<double> out) {
        Vec env(x.size() + 1);
        env[0] = t;
        for (std::size_t k = 0; k < x.size(); ++k) env[k + 1] = x[k];
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = (*exprs)[k].eval(env);
    };
}

Vec project_ball(double radius, std::span<const double> v) {
    Vec out(v.begin(), v.end());
    double d = nrm2(v);
    if (d > radius) {
        double s = radius / d;
        for (auto& c : out) c *= s;
    }
    return out;
}

ScaledProjection scaled_projection(double C, double alpha, std::span<const double> x) {
    if (alpha < 0.0) throw std::invalid_argument("scaled_projection: alpha must be >= 0");
    ScaledProjection res;
    res.projection = project_ball(C, x);
    res.lhs.resize(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) res.lhs[k] = alpha * res.projection[k];
    Vec ax(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) ax[k] = alpha * x[k];
    res.rhs = project_ball(alpha * C, ax);
    double d = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        double e = res.lhs[k] - res.rhs[k];
        d += e * e;
    }
    res.discrepancy = std::sqrt(d);
    return res;
}

Constants compute_constants(const Region& R, const AdmissiblePair& pair) {
    Constants c;
    c.m = R.max_x_norm();
    c.C = std::max(c.m, 1.0 + pair.p2_bound);
    c.K = c.C + 1.0;
    return c;
}

std::vector<double> bound_c(const FieldFn& f, const AdmissiblePair& pair, std::size_t N,
                            int samples_per_node) {
    const Region& R = *pair.region;
    std::size_t nx = static_cast<std::size_t>(R.n());
    double h = (R.b() - R.a()) / static_cast<double>(N);

    // One shared x-sample of the working ball, pushed through p at each node.
    HaltonSampler sampler(R.n(), 29);
    std::vector<Vec> xs;
    xs.reserve(static_cast<std::size_t>(samples_per_node));
    while (xs.size() < static_cast<std::size_t>(samples_per_node)) {
        auto u = sampler.next();
        Vec x(nx);
        for (std::size_t k = 0; k < nx; ++k) x[k] = pair.work_radius * (2.0 * u[k] - 1.0);
        if (nrm2(x) <= pair.work_radius) xs.push_back(std::move(x));
    }

    std::vector<double> c(N + 1, 0.0);
    Vec p2(nx), fv(nx);
    for (std::size_t j = 0; j <= N; ++j) {
        double t = R.a() + h * static_cast<double>(j);
        double sup = 0.0;
        for (const auto& x : xs) {
            double p1;
            pair.p(t, x, p1, p2);
            f(p1, p2, fv);
            double norm = nrm2(fv);
            if (!std::isfinite(norm))
                throw std::runtime_error("bound_c: field is non-finite on the p-image at t=" +
                                         std::to_string(t));
            sup = std::max(sup, norm);
        }
        c[j] = 1.1 * sup + 1.0;
    }
    return c;
}

ModifiedField::ModifiedField(FieldFn f, std::shared_ptr<const Region> region, AdmissiblePair pair,
                             std::vector<double> c_nodes, double a, double b)
    : f_(std::move(f)),
      region_(std::move(region)),
      pair_(std::move(pair)),
      c_(std::move(c_nodes)),
      a_(a),
      b_(b) {
    if (c_.size() < 2) throw std::invalid_argument("ModifiedField: damping bound needs >= 2 nodes");
}

double ModifiedField::damping(double t) const {
    double h = (b_ - a_) / static_cast<double>(c_.size() - 1);
    double pos = (t - a_) / h;
    auto j = static_cast<std::size_t>(
        std::clamp(std::floor(pos), 0.0, static_cast<double>(c_.size() - 2)));
    double theta = std::clamp(pos - static_cast<double>(j), 0.0, 1.0);
    return c_[j] + theta * (c_[j + 1] - c_[j]);
}

void ModifiedField::eval(double t, std::span<const double> x, std::span<double> out) const {
    if (pair_.h(t, x) <= 0.0) {  // (H1): h <= 0 exactly on R
        f_(t, x, out);
        return;
    }
    std::size_t nx = x.size();
    double p1;
    Vec p2(nx);
    pair_.p(t, x, p1, p2);
    f_(p1, p2, out);
    double c = damping(t);
    for (std::size_t k = 0; k < nx; ++k) out[k] += c * (p2[k] - x[k]);
}

void ModifiedField::eval_at_p(double t, std::span<const double> x, std::span<double> out) const {
    double p1;
    Vec p2(x.size());
    pair_.p(t, x, p1, p2);
    f_(p1, p2, out);
}

}  // namespace regionsolve
