// enskog: scenario-driven front end. See README.md for the commands and file formats.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "enskog/scenario.hpp"

using namespace enskog;

namespace {

struct Args {
    std::string scenario;
    std::string out = ".";
    std::uint64_t seed = 0;
    std::vector<double> ladder;
    long budget = 0;
    std::string format = "csv";
};

void add_options(CLI::App* cmd, Args& args, bool outputs) {
    cmd->add_option("--scenario", args.scenario, "scenario JSON file")->required()->check(CLI::ExistingFile);
    if (!outputs) return;
    cmd->add_option("--out", args.out, "output directory");
    cmd->add_option("--seed", args.seed, "override the scenario seed");
    cmd->add_option("--epsilon-ladder", args.ladder, "override the epsilon ladder, comma separated")->delimiter(',');
    cmd->add_option("--budget", args.budget, "collision cap, or Monte Carlo samples for residual-scan and ge-check")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--format", args.format, "table format")->check(CLI::IsMember({"csv", "json"}));
}

int validate(const Args& args) {
    auto problems = validate_file(args.scenario);
    for (auto& p : problems) std::cout << p << "\n";
    return problems.empty() ? 0 : 2;
}

int execute(Command command, const Args& args, const CLI::App& cmd) {
    try {
        Overrides o;
        if (cmd.count("--seed")) o.seed = args.seed;
        if (cmd.count("--epsilon-ladder")) o.ladder = args.ladder;
        if (cmd.count("--budget")) o.budget = args.budget;
        Scenario s = apply(load_scenario(args.scenario), o, command);
        for (auto& p : diagnostics(s)) std::cerr << "invalid scenario: " << p << "\n";
        Report r = run(command, s);

        namespace fs = std::filesystem;
        fs::create_directories(args.out);
        const std::string stem = command_name(command);
        bool csv = args.format == "csv";
        if (csv)
            for (std::size_t k = 0; k < r.tables.size(); ++k) {
                std::string name = k == 0 ? stem : stem + "_" + r.tables[k].name;
                write_atomic((fs::path(args.out) / (name + ".csv")).string(), to_csv(r.tables[k]));
            }
        write_atomic((fs::path(args.out) / (stem + ".json")).string(), report_json(r, s, !csv));
        for (auto& [k, v] : r.summary) std::printf("%s = %.17g\n", k.c_str(), v);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hard-sphere kinetic theory runs driven by scenario files"};
    app.require_subcommand(1);
    Args args;
    std::vector<std::pair<CLI::App*, Command>> commands;
    for (auto [name, what] : {std::pair{"simulate", "event log and trajectory frames"},
                              {"conserve", "momentum and energy bookkeeping per collision"},
                              {"reverse", "velocity-reversal round trip"},
                              {"jacobian", "finite-difference flow-map determinants"},
                              {"residual-scan", "weak and mild residuals along the epsilon ladder"},
                              {"ge-check", "generalized Enskog series and mild check"}}) {
        CLI::App* cmd = app.add_subcommand(name, what);
        add_options(cmd, args, true);
        commands.push_back({cmd, *parse_command(name)});
    }
    CLI::App* check = app.add_subcommand("validate", "list violated scenario invariants");
    add_options(check, args, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    if (check->parsed()) return validate(args);
    for (auto& [cmd, command] : commands)
        if (cmd->parsed()) return execute(command, args, *cmd);
    return 2;
}
