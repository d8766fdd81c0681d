#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "enskog/errors.hpp"
#include "enskog/genenskog.hpp"
#include "enskog/residual.hpp"

namespace enskog {

// Malformed scenario file: the message names the line or the field.
struct ScenarioError : ValidationError { using ValidationError::ValidationError; };

struct Budget {
    long pair_samples = 20000;
    long gain_samples = 256;
    long series_samples = 20000;
    long flux_samples = 20000;
    long collision_cap = 1000000;
};

struct Scenario {
    std::string name;
    double a = 1.0;
    Domain domain = FreeSpace{};
    std::vector<PhasePoint> spheres;  // kernel centres (q_i, w_i) at t = 0
    RestitutionModel model;
    double epsilon = 0.1;
    std::vector<double> ladder{0.2, 0.1, 0.05, 0.025};
    double horizon = 3.0;
    std::uint64_t seed = 1;
    Budget budget;
    std::vector<double> probe_times;  // centre probes at these times
    int probes_per_sphere = 2;
    std::vector<ResidualProbe> probes;  // explicit probes, appended after the centre probes
    double ge_t0 = 0.5;
    std::vector<TestFunction> tests;
    std::string source;  // the parsed JSON, compact
};

// Throws ScenarioError on syntax errors (with line and column) and on missing or mistyped fields.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);

// Every violated invariant, empty when the scenario is usable.
std::vector<std::string> diagnostics(const Scenario& s);
// Same for a file; a parse error is reported as the single diagnostic.
std::vector<std::string> validate_file(const std::string& path);

InitialDensity initial_density(const Scenario& s, double eps);
SystemState initial_state(const Scenario& s);
FieldConfig field_config(const Scenario& s);
GEConfig ge_config(const Scenario& s, double eps);
std::vector<ResidualProbe> scenario_probes(const Scenario& s, const InitialDensity& d);

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;  // NaN is written as an empty cell
};

// RFC 4180, header row, 17 significant digits
std::string to_csv(const Table& t);

enum class Command { Simulate, Conserve, Reverse, Jacobian, ResidualScan, GECheck };
std::optional<Command> parse_command(const std::string& name);
std::string command_name(Command c);

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::vector<double>> ladder;
    // collision cap for the dynamics commands, Monte Carlo samples for residual-scan and ge-check
    std::optional<long> budget;
};
Scenario apply(Scenario s, const Overrides& o, Command c);

struct Report {
    Command command;
    std::vector<Table> tables;  // the first is the command's main table
    std::vector<std::pair<std::string, double>> summary;
    double wall_time = 0;
};

// Throws the library errors; see exit_code.
Report run(Command c, const Scenario& s);

// schema-versioned; tables are embedded when with_tables is set
std::string report_json(const Report& r, const Scenario& s, bool with_tables);

// 0 success, 2 validation, 3 numerical budget, 4 excluded trajectory, 1 anything else
int exit_code(const std::exception& e);

// write to a sibling temporary, then rename
void write_atomic(const std::string& path, const std::string& content);

}  // namespace enskog
