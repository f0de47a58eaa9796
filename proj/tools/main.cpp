#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "regionsolve/cli.hpp"

using namespace regionsolve;

int main(int argc, char** argv) {
    CLI::App app{"region-solve: solution-region method for first-order ODE systems "
                 "under general linear boundary conditions"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string op_name;
    std::size_t n_override = 0;
    std::string csv_out;

    auto* check = app.add_subcommand("check", "run the hypothesis suite of a scenario");
    check->add_option("scenario", scenario_path, "scenario JSON file")->required();

    auto* solve = app.add_subcommand("solve", "solve a scenario and verify the solution");
    solve->add_option("scenario", scenario_path, "scenario JSON file")->required();
    solve->add_option("--operator", op_name, "J, K or Kp (default per boundary condition)");
    solve->add_option("--N", n_override, "grid cells override");
    solve->add_option("--out", csv_out, "write the solution CSV here");

    auto* cpair = app.add_subcommand("construct-pair", "build and summarize the admissible pair");
    cpair->add_option("scenario", scenario_path, "scenario JSON file")->required();

    auto* repro = app.add_subcommand("reproduce-example", "run the built-in worked example");
    repro->add_option("--out", csv_out, "write the solution CSV here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (repro->parsed()) {
            std::optional<std::string> csv;
            if (!csv_out.empty()) csv = csv_out;
            return cmd_reproduce_example(std::cout, csv);
        }
        Scenario sc = load_scenario(scenario_path);
        apply_seed_env(sc);
        if (check->parsed()) return cmd_check(sc, std::cout);
        if (cpair->parsed()) return cmd_construct_pair(sc, std::cout);
        SolveOptions opt;
        if (!op_name.empty()) {
            if (op_name == "J") opt.op = OperatorKind::J;
            else if (op_name == "K") opt.op = OperatorKind::K_paper;
            else if (op_name == "Kp") opt.op = OperatorKind::K_projected;
            else {
                std::cerr << "unknown operator '" << op_name << "' (use J, K or Kp)\n";
                return 1;
            }
        }
        if (n_override > 0) opt.N = n_override;
        if (!csv_out.empty()) opt.csv_path = csv_out;
        return cmd_solve(sc, opt, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
