#include "regionsolve/scenario.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

namespace regionsolve {

using nlohmann::json;

namespace {

Vec read_vec(const json& j, const std::string& path, std::size_t expected) {
    if (!j.is_array()) throw scenario_error(path, "expected an array of numbers");
    if (expected != 0 && j.size() != expected)
        throw scenario_error(path, "expected " + std::to_string(expected) + " entries, got " +
                                       std::to_string(j.size()));
    Vec out;
    for (const auto& v : j) {
        if (!v.is_number()) throw scenario_error(path, "expected numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

ConvexPrimitive parse_primitive(const json& j, const std::string& path, int n) {
    std::size_t dim = static_cast<std::size_t>(n) + 1;
    if (j.contains("ball")) {
        const auto& b = j.at("ball");
        if (!b.contains("center") || !b.contains("radius"))
            throw scenario_error(path + ".ball", "needs center and radius");
        return BallPrim{read_vec(b.at("center"), path + ".ball.center", dim),
                        b.at("radius").get<double>()};
    }
    if (j.contains("xball")) {
        const auto& b = j.at("xball");
        if (!b.contains("center") || !b.contains("radius"))
            throw scenario_error(path + ".xball", "needs center and radius");
        return XBallPrim{read_vec(b.at("center"), path + ".xball.center", dim - 1),
                         b.at("radius").get<double>()};
    }
    if (j.contains("box")) {
        const auto& b = j.at("box");
        if (!b.contains("lo") || !b.contains("hi"))
            throw scenario_error(path + ".box", "needs lo and hi");
        return BoxPrim{read_vec(b.at("lo"), path + ".box.lo", dim),
                       read_vec(b.at("hi"), path + ".box.hi", dim)};
    }
    if (j.contains("halfspace")) {
        const auto& b = j.at("halfspace");
        if (!b.contains("normal") || !b.contains("offset"))
            throw scenario_error(path + ".halfspace", "needs normal and offset");
        return HalfspacePrim{read_vec(b.at("normal"), path + ".halfspace.normal", dim),
                             b.at("offset").get<double>()};
    }
    throw scenario_error(path, "unknown primitive (use ball, xball, box or halfspace)");
}

std::shared_ptr<const Region> parse_region(const json& j, double a, double b, int n) {
    if (j.contains("sublevel")) {
        const auto& s = j.at("sublevel");
        if (!s.contains("h")) throw scenario_error("region.sublevel", "missing h expression");
        if (!s.contains("bound"))
            throw scenario_error("region.sublevel",
                                 "missing bound (compactness needs a bounding radius)");
        SublevelShape shape{parse_expression(s.at("h").get<std::string>(), n),
                            s.at("bound").get<double>()};
        return std::make_shared<Region>(a, b, n, std::move(shape));
    }
    ConvexShape shape;
    if (j.contains("intersection")) {
        const auto& arr = j.at("intersection");
        if (!arr.is_array() || arr.empty())
            throw scenario_error("region.intersection", "expected a non-empty array");
        for (std::size_t i = 0; i < arr.size(); ++i)
            shape.members.push_back(
                parse_primitive(arr[i], "region.intersection[" + std::to_string(i) + "]", n));
    } else {
        shape.members.push_back(parse_primitive(j, "region", n));
    }
    return std::make_shared<Region>(a, b, n, std::move(shape));
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

json vec_json(std::span<const double> v) {
    json out = json::array();
    for (double x : v) out.push_back(x);
    return out;
}

}  // namespace

Scenario parse_scenario_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw scenario_error("(file)", std::string("not valid JSON: ") + e.what());
    }

    Scenario sc;
    if (!j.contains("interval")) throw scenario_error("interval", "missing");
    Vec iv = read_vec(j.at("interval"), "interval", 2);
    sc.a = iv[0];
    sc.b = iv[1];
    if (!(sc.b > sc.a)) throw scenario_error("interval", "must satisfy a < b");

    if (!j.contains("dimension")) throw scenario_error("dimension", "missing");
    sc.n = j.at("dimension").get<int>();
    if (sc.n < 1) throw scenario_error("dimension", "must be >= 1");

    if (!j.contains("field")) throw scenario_error("field", "missing");
    const auto& farr = j.at("field");
    if (!farr.is_array() || static_cast<int>(farr.size()) != sc.n)
        throw scenario_error("field", "expected " + std::to_string(sc.n) +
                                          " component expressions, got " +
                                          std::to_string(farr.size()));
    for (std::size_t i = 0; i < farr.size(); ++i) {
        std::string src = farr[i].get<std::string>();
        try {
            parse_expression(src, sc.n);
        } catch (const parse_error& e) {
            throw scenario_error("field[" + std::to_string(i) + "]", e.what());
        }
        sc.field_exprs.push_back(std::move(src));
    }

    if (!j.contains("region")) throw scenario_error("region", "missing");
    sc.region = parse_region(j.at("region"), sc.a, sc.b, sc.n);

    if (j.contains("pair")) {
        const auto& p = j.at("pair");
        if (p.contains("construct") && p.at("construct").get<bool>()) {
            sc.pair_kind = PairSpecKind::construct;
        } else if (p.contains("half_dist_sq") && p.at("half_dist_sq").get<bool>()) {
            sc.pair_kind = PairSpecKind::half_dist_sq;
        } else if (p.contains("h")) {
            sc.pair_kind = PairSpecKind::user;
            try {
                sc.pair_h = parse_expression(p.at("h").get<std::string>(), sc.n);
            } catch (const parse_error& e) {
                throw scenario_error("pair.h", e.what());
            }
            if (p.contains("p")) {
                const auto& parr = p.at("p");
                if (!parr.is_array() || static_cast<int>(parr.size()) != sc.n + 1)
                    throw scenario_error("pair.p", "expected n+1 component expressions");
                for (std::size_t i = 0; i < parr.size(); ++i) {
                    try {
                        sc.pair_p.push_back(parse_expression(parr[i].get<std::string>(), sc.n));
                    } catch (const parse_error& e) {
                        throw scenario_error("pair.p[" + std::to_string(i) + "]", e.what());
                    }
                }
            }
        } else {
            throw scenario_error("pair", "expected construct, half_dist_sq or a user h");
        }
    }

    if (!j.contains("bc")) throw scenario_error("bc", "missing");
    std::string bc = j.at("bc").get<std::string>();
    if (bc == "cg") sc.bc = BcKind::cg;
    else if (bc == "cg2") sc.bc = BcKind::cg2;
    else if (bc == "ci") sc.bc = BcKind::ci;
    else if (bc == "cp") sc.bc = BcKind::cp;
    else throw scenario_error("bc", "expected one of cg, cg2, ci, cp");

    if (j.contains("functional")) {
        sc.gamma_given = true;
        const auto& g = j.at("functional");
        sc.gamma.a = sc.a;
        sc.gamma.b = sc.b;
        if (g.contains("atoms")) {
            for (std::size_t i = 0; i < g.at("atoms").size(); ++i) {
                const auto& at = g.at("atoms")[i];
                if (!at.contains("at") || !at.contains("weight"))
                    throw scenario_error("functional.atoms[" + std::to_string(i) + "]",
                                         "needs at and weight");
                sc.gamma.atoms.push_back({at.at("at").get<double>(), at.at("weight").get<double>()});
            }
        }
        if (g.contains("density")) {
            try {
                sc.gamma.density = parse_density(g.at("density").get<std::string>());
            } catch (const parse_error& e) {
                throw scenario_error("functional.density", e.what());
            }
        }
        try {
            sc.gamma.validate();
        } catch (const std::exception& e) {
            throw scenario_error("functional", e.what());
        }
    } else if (sc.bc == BcKind::cg || sc.bc == BcKind::cg2) {
        throw scenario_error("functional", "missing (required for cg/cg2 conditions)");
    }

    if (sc.bc == BcKind::cp) {
        sc.r.assign(static_cast<std::size_t>(sc.n), 0.0);
        if (j.contains("r")) throw scenario_error("r", "cp fixes r = 0; remove the field");
    } else {
        if (!j.contains("r")) throw scenario_error("r", "missing");
        sc.r = read_vec(j.at("r"), "r", static_cast<std::size_t>(sc.n));
    }

    if (j.contains("solver")) {
        const auto& s = j.at("solver");
        if (s.contains("N")) sc.N = s.at("N").get<std::size_t>();
        if (sc.N < 2) throw scenario_error("solver.N", "must be >= 2");
        if (s.contains("lambda_steps")) sc.lambda_steps = s.at("lambda_steps").get<std::size_t>();
        if (sc.lambda_steps < 2) throw scenario_error("solver.lambda_steps", "must be >= 2");
        if (s.contains("abs_tol")) sc.abs_tol = s.at("abs_tol").get<double>();
        if (s.contains("seed")) sc.seed = s.at("seed").get<std::uint64_t>();
        if (s.contains("operator")) {
            std::string op = s.at("operator").get<std::string>();
            if (op == "J") sc.op = OperatorKind::J;
            else if (op == "K") sc.op = OperatorKind::K_paper;
            else if (op == "Kp") sc.op = OperatorKind::K_projected;
            else throw scenario_error("solver.operator", "expected J, K or Kp");
        }
    }
    if (j.contains("checks"))
        for (const auto& c : j.at("checks")) sc.checks.push_back(c.get<std::string>());

    return sc;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw scenario_error("(file)", "cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario_json(buf.str());
}

OperatorKind default_operator(BcKind effective_kind) {
    return effective_kind == BcKind::cg ? OperatorKind::J : OperatorKind::K_projected;
}

BuiltProblem build_problem(const Scenario& sc) {
    BuiltProblem out;
    ProblemSpec& spec = out.spec;
    spec.a = sc.a;
    spec.b = sc.b;
    spec.n = sc.n;
    spec.N = sc.N;
    spec.abs_tol = sc.abs_tol;
    spec.seed = sc.seed;
    spec.declared_kind = sc.bc;
    spec.r = sc.r;
    for (std::size_t i = 0; i < sc.lambda_steps; ++i)
        spec.lambda_schedule.push_back(static_cast<double>(i) /
                                       static_cast<double>(sc.lambda_steps - 1));

    // ci and cp are encoded through Gamma: ci as cg2 with Gamma u = u(a),
    // cp as cg with Gamma u = u(b) and r = 0.
    LinearFunctional gamma = sc.gamma;
    if (sc.bc == BcKind::ci) {
        gamma = LinearFunctional{sc.a, sc.b, {{sc.a, 1.0}}, std::nullopt};
        spec.bc_kind = BcKind::cg2;
    } else if (sc.bc == BcKind::cp) {
        gamma = LinearFunctional{sc.a, sc.b, {{sc.b, 1.0}}, std::nullopt};
        spec.bc_kind = BcKind::cg;
    } else {
        spec.bc_kind = sc.bc;
    }

    std::vector<Expression> comps;
    for (const auto& src : sc.field_exprs) comps.push_back(parse_expression(src, sc.n));
    FieldFn field = field_from_expressions(std::move(comps));
    std::shared_ptr<const Region> region = sc.region;

    double M = gamma_mass(gamma, sc.N);
    if (gamma_degenerate(M))
        throw scenario_error("functional", "degenerate: |Gamma(1)| < 1e-12");
    if (M < 0.0) {
        out.reflected = true;
        gamma = reflect_functional(gamma, sc.N);
        field = reflect_field(std::move(field));
        region = std::make_shared<Region>(region->mirrored());
        // r itself is unchanged under v = -u: Gamma~(v - v(a)) = Gamma(u - u(a)).
    }

    switch (sc.pair_kind) {
        case PairSpecKind::construct: spec.pair = construct_admissible_pair(region); break;
        case PairSpecKind::half_dist_sq: spec.pair = half_dist_sq_pair(region); break;
        case PairSpecKind::user: {
            if (out.reflected) {
                auto base = pair_from_user(sc.region, *sc.pair_h,
                                           sc.pair_p.empty() ? nullptr : &sc.pair_p);
                spec.pair = mirror_pair(base, region);
            } else {
                spec.pair = pair_from_user(region, *sc.pair_h,
                                           sc.pair_p.empty() ? nullptr : &sc.pair_p);
            }
            break;
        }
    }
    spec.region = region;
    spec.gamma = std::move(gamma);
    spec.f = std::move(field);
    spec.build();
    return out;
}

std::string check_report_json(const CheckReport& rep) {
    json j;
    j["schema"] = 1;
    j["hypothesis"] = rep.hypothesis;
    j["verdict"] = rep.verdict == CheckReport::Verdict::pass          ? "pass"
                   : rep.verdict == CheckReport::Verdict::fail        ? "fail"
                                                                      : "inconclusive";
    j["worst_violation"] = rep.worst_violation;
    j["samples"] = rep.samples;
    j["tolerance"] = rep.tolerance;
    if (!rep.witness.empty()) {
        j["witness"]["t"] = rep.witness[0];
        j["witness"]["x"] = vec_json(std::span<const double>(rep.witness).subspan(1));
    }
    if (rep.aux != 0.0) j["aux"] = rep.aux;
    if (!rep.note.empty()) j["note"] = rep.note;
    return j.dump(2);
}

std::string solve_report_json(const SolveReport& rep, const ProblemSpec& spec,
                              const std::vector<std::string>& extra_notes) {
    json j;
    j["schema"] = 1;
    j["converged"] = rep.converged;
    j["operator"] = rep.op == OperatorKind::J          ? "J"
                    : rep.op == OperatorKind::K_paper  ? "K"
                                                       : "Kp";
    j["N"] = spec.N;
    j["M"] = spec.M;
    j["constants"] = {{"m", spec.constants.m}, {"C", spec.constants.C}, {"K", spec.constants.K}};
    json trace = json::array();
    for (const auto& e : rep.lambda_trace)
        trace.push_back({{"lambda", e.lambda},
                         {"iterations", e.iterations},
                         {"quasi_newton_steps", e.quasi_newton_steps},
                         {"residual", e.residual},
                         {"sup_norm", e.sup_norm},
                         {"converged", e.converged}});
    j["lambda_trace"] = trace;
    j["fixed_point_residual"] = rep.fixed_point_residual;
    j["ode_residual"] = rep.ode_residual;
    j["bc_residual"] = rep.bc_residual;
    j["condition8_residual"] = rep.condition8_residual;
    if (rep.op == OperatorKind::K_paper) j["gamma_phi_residual"] = rep.gamma_phi_residual;
    j["containment"] = {{"max_h", rep.containment_max_h},
                        {"max_dist", rep.containment_max_dist}};
    j["norm_bound"] = {{"sup_norm", rep.sup_norm}, {"C", rep.norm_bound_C}};
    j["h_monotonicity_violation"] = rep.h_monotonicity_violation;
    j["barrier"] = {{"kind", rep.barrier.kind == BarrierVerdict::Kind::below_z ? "below_z"
                             : rep.barrier.kind == BarrierVerdict::Kind::constant_k
                                 ? "constant_k"
                                 : "hypotheses_violated"},
                    {"k", rep.barrier.k},
                    {"note", rep.barrier.note}};
    j["interior_margin"] = rep.interior_margin;
    json notes = json::array();
    for (const auto& n : rep.notes) notes.push_back(n);
    for (const auto& n : extra_notes) notes.push_back(n);
    j["notes"] = notes;
    return j.dump(2);
}

void write_solution_csv(std::ostream& os, const SampledPath& u, const AdmissiblePair& pair) {
    os << "t";
    for (int k = 1; k <= u.n; ++k) os << ",x" << k;
    os << ",h,norm\n";
    for (std::size_t j = 0; j <= u.N; ++j) {
        double t = u.node(j);
        auto x = u.at(j);
        double h = pair.h(t, x);
        double s = t * t;
        for (double v : x) s += v * v;
        os << fmt(t);
        for (double v : x) os << ',' << fmt(v);
        os << ',' << fmt(h) << ',' << fmt(std::sqrt(s)) << '\n';
    }
}

SampledPath read_solution_csv(std::istream& is, double a, double b, int n) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("read_solution_csv: empty file");
    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (static_cast<int>(row.size()) < n + 1)
            throw std::runtime_error("read_solution_csv: short row");
        rows.push_back(std::move(row));
    }
    if (rows.size() < 3) throw std::runtime_error("read_solution_csv: need at least 3 rows");
    SampledPath u(a, b, n, rows.size() - 1);
    for (std::size_t j = 0; j < rows.size(); ++j)
        for (int k = 0; k < n; ++k) u.at(j)[static_cast<std::size_t>(k)] =
            rows[j][static_cast<std::size_t>(k) + 1];
    return u;
}

}  // namespace regionsolve
