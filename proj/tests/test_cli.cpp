#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "regionsolve/cli.hpp"

using namespace regionsolve;

namespace {

const char* kDecayCi = R"({
  "interval": [0, 1],
  "dimension": 1,
  "field": ["-x1"],
  "region": {"xball": {"center": [0], "radius": 2}},
  "pair": {"half_dist_sq": true},
  "bc": "ci",
  "r": [0],
  "solver": {"N": 100}
})";

const char* kOutward = R"({
  "interval": [0, 1],
  "dimension": 1,
  "field": ["x1"],
  "region": {"xball": {"center": [0], "radius": 2}},
  "pair": {"half_dist_sq": true},
  "bc": "ci",
  "r": [0],
  "checks": ["H0", "H1", "H3", "H4"]
})";

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& contents) {
        static int counter = 0;
        path = "cli_test_tmp_" + std::to_string(counter++) + ".json";
        std::ofstream out(path);
        out << contents;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("builtin example scenario") {
    Scenario sc = builtin_example_scenario();
    CHECK(sc.n == 2);
    CHECK(sc.bc == BcKind::cg2);
    CHECK(sc.N == 400);
    CHECK(sc.field_exprs.size() == 2);
    BuiltProblem built = build_problem(sc);
    CHECK(built.spec.M == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(built.spec.constants.C == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(!built.reflected);
}

TEST_CASE("scenario validation names the offending field") {
    try {
        parse_scenario_json(R"({"interval": [0,1], "dimension": 1, "field": ["-x1"],
                                "bc": "ci", "r": [0]})");
        FAIL("expected scenario_error");
    } catch (const scenario_error& e) {
        CHECK(e.path() == "region");
    }
    try {
        parse_scenario_json(R"({"interval": [0,1], "dimension": 2,
                                "field": ["-x1", "-x2", "x1"],
                                "region": {"xball": {"center": [0,0], "radius": 2}},
                                "bc": "ci", "r": [0,0]})");
        FAIL("expected scenario_error");
    } catch (const scenario_error& e) {
        CHECK(e.path() == "field");
    }
    try {
        parse_scenario_json(R"({"interval": [0,1], "dimension": 1, "field": ["-x1"],
                                "region": {"xball": {"center": [0], "radius": 2}},
                                "bc": "cg2", "r": [0]})");
        FAIL("expected scenario_error");
    } catch (const scenario_error& e) {
        CHECK(e.path() == "functional");
    }
    CHECK_THROWS_AS(load_scenario("does_not_exist.json"), scenario_error);
}

TEST_CASE("solve command writes an all-zero CSV for the trivial problem") {
    TempFile file(kDecayCi);
    Scenario sc = load_scenario(file.path);
    SolveOptions opt;
    opt.csv_path = "cli_test_solution.csv";
    std::ostringstream report;
    int code = cmd_solve(sc, opt, report);
    CHECK(code == kExitOk);
    CHECK(report.str().find("\"converged\": true") != std::string::npos);

    std::ifstream csv("cli_test_solution.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "t,x1,h,norm");
    std::string line;
    std::size_t rows = 0;
    while (std::getline(csv, line)) {
        ++rows;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');  // t
        std::getline(ss, cell, ',');  // x1
        CHECK(std::stod(cell) == 0.0);
    }
    CHECK(rows == 101);
    std::remove("cli_test_solution.csv");
}

TEST_CASE("check command exits 2 on an H4 violation with a witness") {
    TempFile file(kOutward);
    Scenario sc = load_scenario(file.path);
    std::ostringstream report;
    int code = cmd_check(sc, report);
    CHECK(code == kExitHypothesisFail);
    CHECK(report.str().find("\"hypothesis\": \"H4\"") != std::string::npos);
    CHECK(report.str().find("\"witness\"") != std::string::npos);
    CHECK(report.str().find("\"fail\"") != std::string::npos);
}

TEST_CASE("construct-pair summarizes the pair") {
    TempFile file(kDecayCi);
    Scenario sc = load_scenario(file.path);
    std::ostringstream report;
    int code = cmd_construct_pair(sc, report);
    CHECK(code == kExitOk);
    CHECK(report.str().find("half_dist_sq") != std::string::npos);
    CHECK(report.str().find("\"C\"") != std::string::npos);
}

TEST_CASE("CSV round-trip reproduces residuals") {
    Scenario sc = builtin_example_scenario();
    sc.N = 150;
    BuiltProblem built = build_problem(sc);
    SolveReport rep = solve_homotopy(built.spec, OperatorKind::K_projected);
    REQUIRE(rep.converged);

    std::stringstream csv;
    write_solution_csv(csv, rep.solution, built.spec.pair);
    SampledPath back = read_solution_csv(csv, 0.0, 1.0, 2);
    REQUIRE(back.N == rep.solution.N);

    SolveReport again;
    verify_solution(built.spec, back, OperatorKind::K_projected, 1.0, again);
    CHECK(std::fabs(again.fixed_point_residual - rep.fixed_point_residual) <= 1e-12);
    CHECK(std::fabs(again.bc_residual - rep.bc_residual) <= 1e-12);
    CHECK(std::fabs(again.ode_residual - rep.ode_residual) <= 1e-12);
    CHECK(std::fabs(again.containment_max_h - rep.containment_max_h) <= 1e-12);
}

TEST_CASE("negative-mass functionals are reflected end to end") {
    // Gamma u = -int u, r = (-0.5): equivalent to int u = 0.5 with f == 0,
    // so the solution is the constant 0.5.
    const char* scenario = R"({
      "interval": [0, 1],
      "dimension": 1,
      "field": ["0"],
      "region": {"xball": {"center": [0], "radius": 2}},
      "pair": {"half_dist_sq": true},
      "functional": {"density": "0-1"},
      "bc": "cg2",
      "r": [-0.5],
      "solver": {"N": 100}
    })";
    TempFile file(scenario);
    Scenario sc = load_scenario(file.path);
    BuiltProblem built = build_problem(sc);
    CHECK(built.reflected);
    CHECK(built.spec.M == doctest::Approx(1.0).epsilon(1e-12));

    std::ostringstream report;
    SolveOptions opt;
    int code = cmd_solve(sc, opt, report);
    CHECK(code == kExitOk);
    // The reported solution is already negated back to u-space: u == 0.5.
    auto j = report.str();
    CHECK(j.find("reflected") != std::string::npos);

    SolveReport rep = solve_homotopy(built.spec, OperatorKind::K_projected);
    REQUIRE(rep.converged);
    for (std::size_t node = 0; node <= rep.solution.N; ++node)
        CHECK(-rep.solution.at(node)[0] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("check command runs the H4'/H5'/H6 pipeline") {
    const char* scenario = R"({
      "interval": [0, 1],
      "dimension": 1,
      "field": ["-x1"],
      "region": {"xball": {"center": [0], "radius": 2}},
      "pair": {"half_dist_sq": true},
      "bc": "ci",
      "r": [1],
      "solver": {"N": 100},
      "checks": ["H0", "H0prime", "H1", "H3", "H4", "H4prime", "H4doubleprime",
                 "H5prime", "H6"]
    })";
    TempFile file(scenario);
    Scenario sc = load_scenario(file.path);
    std::ostringstream report;
    int code = cmd_check(sc, report);
    CHECK(code == kExitOk);
    CHECK(report.str().find("\"hypothesis\": \"H6\"") != std::string::npos);
    CHECK(report.str().find("\"hypothesis\": \"H5'\"") != std::string::npos);
    CHECK(report.str().find("\"hypothesis\": \"H4'\"") != std::string::npos);

    // The strict variant cannot hold for a nonnegative surrogate h
    // (h(a,u(a)) = 0 is never < 0, nor < h(b,u(b)) = 0): expect a clean fail.
    sc.checks = {"H5doubleprime"};
    std::ostringstream strict;
    CHECK(cmd_check(sc, strict) == kExitHypothesisFail);
}

TEST_CASE("unreachable tolerance reports non-convergence with a partial trace") {
    Scenario sc;
    sc.a = 0.0;
    sc.b = 1.0;
    sc.n = 1;
    sc.field_exprs = {"-x1"};
    ConvexShape shape;
    shape.members.push_back(XBallPrim{{0.0}, 2.0});
    sc.region = std::make_shared<Region>(0.0, 1.0, 1, std::move(shape));
    sc.pair_kind = PairSpecKind::half_dist_sq;
    sc.bc = BcKind::ci;
    sc.r = {1.0};
    sc.N = 40;
    sc.lambda_steps = 3;
    sc.abs_tol = 1e-30;  // unattainable: forces the lambda-halving floor
    BuiltProblem built = build_problem(sc);
    built.spec.rel_tol = 0.0;
    SolveReport rep = solve_homotopy(built.spec, OperatorKind::K_projected);
    CHECK(!rep.converged);
    CHECK(!rep.lambda_trace.empty());
    bool noted = false;
    for (const auto& n : rep.notes)
        noted = noted || n.find("non-convergence") != std::string::npos;
    CHECK(noted);
}

TEST_CASE("solve exits 4 when the solution leaves the region") {
    // Outward field with a start near the boundary: the modified problem is
    // solvable but its solution pokes out of R, so containment fails.
    const char* scenario = R"({
      "interval": [0, 1],
      "dimension": 1,
      "field": ["x1"],
      "region": {"xball": {"center": [0], "radius": 2}},
      "pair": {"half_dist_sq": true},
      "bc": "ci",
      "r": [1.9],
      "solver": {"N": 200}
    })";
    TempFile file(scenario);
    Scenario sc = load_scenario(file.path);
    std::ostringstream report;
    int code = cmd_solve(sc, SolveOptions{}, report);
    CHECK(code == kExitContainmentFail);
    CHECK(report.str().find("containment failed") != std::string::npos);
}

TEST_CASE("crossing operator and condition kind warns") {
    TempFile file(kDecayCi);
    Scenario sc = load_scenario(file.path);
    SolveOptions opt;
    opt.op = OperatorKind::J;  // J targets cg; the scenario is ci -> cg2
    std::ostringstream report;
    cmd_solve(sc, opt, report);
    CHECK(report.str().find("targets the cg condition") != std::string::npos);
}

TEST_CASE("seed env override") {
    Scenario sc = builtin_example_scenario();
    CHECK(sc.seed == 0);
    setenv("REGION_SOLVE_SEED", "1234", 1);
    apply_seed_env(sc);
    unsetenv("REGION_SOLVE_SEED");
    CHECK(sc.seed == 1234);
}

TEST_CASE("check reports are deterministic for a fixed seed") {
    TempFile file(kOutward);
    Scenario sc = load_scenario(file.path);
    std::ostringstream a, b;
    cmd_check(sc, a);
    cmd_check(sc, b);
    CHECK(a.str() == b.str());
}
