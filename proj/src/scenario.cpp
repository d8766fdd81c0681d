#include "enskog/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

namespace enskog {

namespace {

using json = nlohmann::json;
constexpr int kSchemaVersion = 1;

[[noreturn]] void field_error(const std::string& path, const std::string& what) {
    throw ScenarioError("field '" + (path.empty() ? std::string("(root)") : path) + "': " + what);
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

double number(const json& j, const std::string& path) {
    if (!j.is_number()) field_error(path, "expected a number");
    double x = j.get<double>();
    if (!std::isfinite(x)) field_error(path, "must be finite");
    return x;
}

long integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) field_error(path, "expected an integer");
    return j.get<long>();
}

Vec3 vec3(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 3) field_error(path, "expected an array of 3 numbers");
    return {number(j[0], index(path, 0)), number(j[1], index(path, 1)), number(j[2], index(path, 2))};
}

std::vector<double> numbers(const json& j, const std::string& path) {
    if (!j.is_array()) field_error(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], index(path, i)));
    return out;
}

const json& member(const json& obj, const std::string& key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) field_error(join(path, key), "missing");
    return *it;
}

std::string text(const json& j, const std::string& path) {
    if (!j.is_string()) field_error(path, "expected a string");
    return j.get<std::string>();
}

// "_..." and "units" keys are comments
void known_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
    if (!obj.is_object()) field_error(path, "expected an object");
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (auto& [k, _] : obj.items())
        if (!allowed.count(k) && k != "units" && (k.empty() || k[0] != '_')) field_error(join(path, k), "unknown field");
}

PhasePoint phase(const json& j, const std::string& rkey, const std::string& vkey, const std::string& path) {
    return {vec3(member(j, rkey, path), join(path, rkey)), vec3(member(j, vkey, path), join(path, vkey))};
}

TestFunction test_function(const json& j, const std::string& path) {
    std::string type = text(member(j, "type", path), join(path, "type"));
    auto num = [&](const char* k) { return number(member(j, k, path), join(path, k)); };
    if (type == "bump") {
        known_keys(j, path, {"type", "r", "v", "t", "r_width", "v_width", "t_width"});
        return TestFunction::bump(phase(j, "r", "v", path), num("t"), num("r_width"), num("v_width"), num("t_width"));
    }
    if (type == "window") {
        known_keys(j, path, {"type", "r_lo", "v_lo", "r_hi", "v_hi", "t_lo", "t_hi", "taper", "t_taper"});
        return TestFunction::window(phase(j, "r_lo", "v_lo", path), phase(j, "r_hi", "v_hi", path), num("t_lo"),
                                    num("t_hi"), num("taper"), num("t_taper"));
    }
    field_error(join(path, "type"), "expected \"bump\" or \"window\"");
}

RestitutionModel restitution(const json& j, const std::string& path) {
    known_keys(j, path, {"type", "mu"});
    std::string type = text(member(j, "type", path), join(path, "type"));
    if (type == "elastic") return RestitutionModel::elastic();
    if (type == "constant") {
        double mu = number(member(j, "mu", path), join(path, "mu"));
        if (!(mu > 0 && mu <= 1)) field_error(join(path, "mu"), "restitution coefficient must lie in (0, 1]");
        return RestitutionModel::constant(mu);
    }
    field_error(join(path, "type"), "expected \"elastic\" or \"constant\"");
}

void line_column(const std::string& text, std::size_t byte, std::size_t& line, std::size_t& column) {
    line = 1;
    column = 1;
    for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ScenarioError("cannot open scenario file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

Scenario parse_scenario(const std::string& source) {
    json root;
    try {
        root = json::parse(source, nullptr, true, true);
    } catch (const json::parse_error& e) {
        std::size_t line, column;
        line_column(source, e.byte, line, column);
        throw ScenarioError("line " + std::to_string(line) + ", column " + std::to_string(column) + ": syntax error");
    }
    known_keys(root, "", {"name", "a", "domain", "spheres", "restitution", "epsilon", "epsilon_ladder", "horizon",
                          "seed", "budget", "probes", "ge_t0", "test_functions"});
    Scenario s;
    s.source = root.dump();
    if (root.contains("name")) s.name = text(root["name"], "name");
    if (root.contains("a")) s.a = number(root["a"], "a");

    if (root.contains("domain")) {
        const json& d = root["domain"];
        known_keys(d, "domain", {"type", "lengths"});
        std::string type = text(member(d, "type", "domain"), "domain.type");
        if (type == "torus") {
            const json& l = member(d, "lengths", "domain");
            s.domain = Torus{l.is_number() ? Vec3{1, 1, 1} * number(l, "domain.lengths") : vec3(l, "domain.lengths")};
        } else if (type != "free") {
            field_error("domain.type", "expected \"free\" or \"torus\"");
        }
    }

    const json& spheres = member(root, "spheres", "");
    if (!spheres.is_array()) field_error("spheres", "expected an array");
    for (std::size_t i = 0; i < spheres.size(); ++i) {
        std::string path = index("spheres", i);
        known_keys(spheres[i], path, {"q", "w"});
        s.spheres.push_back(phase(spheres[i], "q", "w", path));
    }

    if (root.contains("restitution")) s.model = restitution(root["restitution"], "restitution");
    if (root.contains("epsilon")) s.epsilon = number(root["epsilon"], "epsilon");
    if (root.contains("epsilon_ladder")) s.ladder = numbers(root["epsilon_ladder"], "epsilon_ladder");
    if (root.contains("horizon")) s.horizon = number(root["horizon"], "horizon");
    if (root.contains("seed")) {
        if (!root["seed"].is_number_unsigned()) field_error("seed", "expected a non-negative integer");
        s.seed = root["seed"].get<std::uint64_t>();
    }
    if (root.contains("budget")) {
        const json& b = root["budget"];
        known_keys(b, "budget", {"pair_samples", "gain_samples", "series_samples", "flux_samples", "collision_cap"});
        auto set = [&](const char* k, long& x) {
            if (b.contains(k)) x = integer(b[k], join("budget", k));
        };
        set("pair_samples", s.budget.pair_samples);
        set("gain_samples", s.budget.gain_samples);
        set("series_samples", s.budget.series_samples);
        set("flux_samples", s.budget.flux_samples);
        set("collision_cap", s.budget.collision_cap);
    }
    if (root.contains("probes")) {
        const json& p = root["probes"];
        known_keys(p, "probes", {"times", "per_sphere", "points"});
        if (p.contains("times")) s.probe_times = numbers(p["times"], "probes.times");
        if (p.contains("per_sphere")) s.probes_per_sphere = static_cast<int>(integer(p["per_sphere"], "probes.per_sphere"));
        if (p.contains("points")) {
            const json& pts = p["points"];
            if (!pts.is_array()) field_error("probes.points", "expected an array");
            for (std::size_t i = 0; i < pts.size(); ++i) {
                std::string path = index("probes.points", i);
                known_keys(pts[i], path, {"r", "v", "t"});
                PhasePoint x = phase(pts[i], "r", "v", path);
                s.probes.push_back({x.r, x.v, number(member(pts[i], "t", path), join(path, "t"))});
            }
        }
    }
    if (root.contains("ge_t0")) s.ge_t0 = number(root["ge_t0"], "ge_t0");
    if (root.contains("test_functions")) {
        const json& t = root["test_functions"];
        if (!t.is_array()) field_error("test_functions", "expected an array");
        for (std::size_t i = 0; i < t.size(); ++i) s.tests.push_back(test_function(t[i], index("test_functions", i)));
    }
    return s;
}

Scenario load_scenario(const std::string& path) { return parse_scenario(read_file(path)); }

std::vector<std::string> diagnostics(const Scenario& s) {
    std::vector<std::string> out;
    auto fmt = [](double x) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", x);
        return std::string(buf);
    };
    if (!(s.a > 0)) out.push_back("diameter a must be positive");
    if (s.spheres.empty()) out.push_back("scenario needs at least one sphere");
    if (auto* torus = std::get_if<Torus>(&s.domain))
        for (int k = 0; k < 3; ++k)
            if (!(torus->lengths[k] > 2 * s.a)) {
                out.push_back("box length must exceed 2a");
                break;
            }
    if (!(s.epsilon > 0)) out.push_back("epsilon must be positive");

    bool ladder_ok = s.ladder.size() >= 2;
    if (!ladder_ok) out.push_back("epsilon ladder needs at least two entries");
    for (std::size_t k = 0; k < s.ladder.size(); ++k) {
        if (!(s.ladder[k] > 0)) {
            out.push_back("epsilon ladder entries must be positive");
            ladder_ok = false;
            break;
        }
        if (k > 0 && !(s.ladder[k] < s.ladder[k - 1])) {
            out.push_back("epsilon ladder must be strictly decreasing");
            ladder_ok = false;
            break;
        }
    }

    double widest = s.epsilon;
    for (double e : s.ladder) widest = std::max(widest, e);
    for (std::size_t i = 0; i < s.spheres.size(); ++i)
        for (std::size_t j = i + 1; j < s.spheres.size(); ++j) {
            double d = norm(displacement(s.domain, s.spheres[i].r, s.spheres[j].r));
            if (!(d > s.a + 2 * widest))
                out.push_back("support separation violated: spheres " + std::to_string(i) + " and " + std::to_string(j) +
                              " are " + fmt(d) + " apart, need more than a + 2 eps = " + fmt(s.a + 2 * widest));
        }

    if (!(s.horizon > 0)) out.push_back("horizon must be positive");
    for (double t : s.probe_times)
        if (!(t > 0 && t <= s.horizon)) {
            out.push_back("probe times must lie in (0, horizon]");
            break;
        }
    for (auto& p : s.probes)
        if (!(p.t > 0 && p.t <= s.horizon)) {
            out.push_back("probe times must lie in (0, horizon]");
            break;
        }
    if (s.probes_per_sphere < 1) out.push_back("probes.per_sphere must be at least 1");
    if (!(s.ge_t0 > 0 && s.ge_t0 <= s.horizon)) out.push_back("ge_t0 must lie in (0, horizon]");
    const std::pair<const char*, long> budgets[] = {{"pair_samples", s.budget.pair_samples},
                                                    {"gain_samples", s.budget.gain_samples},
                                                    {"series_samples", s.budget.series_samples},
                                                    {"flux_samples", s.budget.flux_samples},
                                                    {"collision_cap", s.budget.collision_cap}};
    for (auto& [name, value] : budgets)
        if (value < 1) out.push_back(std::string("budget.") + name + " must be positive");
    return out;
}

std::vector<std::string> validate_file(const std::string& path) {
    try {
        return diagnostics(load_scenario(path));
    } catch (const ScenarioError& e) {
        return {e.what()};
    }
}

InitialDensity initial_density(const Scenario& s, double eps) {
    InitialDensity d;
    for (auto& x : s.spheres) d.kernels.push_back(Kernel{x, eps});
    d.a = s.a;
    d.domain = s.domain;
    return d;
}

SystemState initial_state(const Scenario& s) { return initial_density(s, s.epsilon).centres(s.model); }

FieldConfig field_config(const Scenario& s) {
    FieldConfig cfg;
    cfg.horizon = s.horizon;
    cfg.pair_samples = s.budget.pair_samples;
    cfg.gain_samples = s.budget.gain_samples;
    cfg.seed = s.seed;
    cfg.dynamics.collision_cap = s.budget.collision_cap;
    return cfg;
}

GEConfig ge_config(const Scenario& s, double eps) {
    GEConfig cfg;
    cfg.initial = initial_density(s, eps);
    cfg.model = s.model;
    cfg.series_samples = s.budget.series_samples;
    cfg.fields = field_config(s);
    cfg.seed = s.seed;
    return cfg;
}

std::vector<ResidualProbe> scenario_probes(const Scenario& s, const InitialDensity& d) {
    std::vector<ResidualProbe> out;
    if (!s.probe_times.empty()) out = centre_probes(d, s.probe_times, s.probes_per_sphere);
    out.insert(out.end(), s.probes.begin(), s.probes.end());
    return out;
}

namespace {

std::string cell(double x) {
    if (std::isnan(x)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string quoted(const std::string& f) {
    if (f.find_first_of(",\"\r\n") == std::string::npos) return f;
    std::string out = "\"";
    for (char c : f) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

void add(Table& t, std::vector<double> row) { t.rows.push_back(std::move(row)); }

void push3(std::vector<double>& row, const Vec3& x) { row.insert(row.end(), {x[0], x[1], x[2]}); }

std::vector<std::string> cols3(const std::string& stem) { return {stem + "_x", stem + "_y", stem + "_z"}; }

Table make_table(std::string name, std::initializer_list<std::vector<std::string>> groups) {
    Table t;
    t.name = std::move(name);
    for (auto& g : groups) t.columns.insert(t.columns.end(), g.begin(), g.end());
    return t;
}

DynamicsOptions dynamics_options(const Scenario& s) {
    DynamicsOptions opt;
    opt.collision_cap = s.budget.collision_cap;
    return opt;
}

constexpr int kFrames = 100;

Report simulate(const Scenario& s) {
    Report r{Command::Simulate, {}, {}, 0};
    SystemState start = initial_state(s);
    auto opt = dynamics_options(s);
    EventLog log;
    SystemState end = evolve(start, s.horizon, opt, &log);
    Table events = make_table("events", {{"time", "i", "j"}, cols3("sigma"), cols3("vi_pre"), cols3("vj_pre"),
                                         cols3("vi_post"), cols3("vj_post")});
    for (auto& e : log) {
        std::vector<double> row{e.time, double(e.i), double(e.j)};
        for (auto* x : {&e.sigma, &e.vi_pre, &e.vj_pre, &e.vi_post, &e.vj_post}) push3(row, *x);
        add(events, row);
    }
    Table frames = make_table("frames", {{"time", "sphere"}, cols3("r"), cols3("v")});
    SystemState cur = start;
    for (int k = 0; k <= kFrames; ++k) {
        if (k > 0) cur = evolve(cur, s.horizon * k / kFrames - cur.time, opt);
        for (std::size_t i = 0; i < cur.size(); ++i) {
            std::vector<double> row{cur.time, double(i)};
            push3(row, cur.positions[i]);
            push3(row, cur.velocities[i]);
            add(frames, row);
        }
    }
    r.tables = {events, frames};
    r.summary = {{"events", double(log.size())},
                 {"energy_initial", kinetic_energy(start)},
                 {"energy_final", kinetic_energy(end)}};
    return r;
}

Report conserve(const Scenario& s) {
    Report r{Command::Conserve, {}, {}, 0};
    SystemState state = initial_state(s);
    EventLog log;
    evolve(state, s.horizon, dynamics_options(s), &log);
    const double e0 = kinetic_energy(state);
    const Vec3 p0 = total_momentum(state);
    Table t = make_table("events", {{"time", "i", "j", "energy"}, cols3("momentum"),
                                    {"energy_change", "expected_change"}});
    double momentum_drift = 0, energy_drift = 0, change_error = 0;
    for (auto& e : log) {
        state.velocities[e.i] = e.vi_post;
        state.velocities[e.j] = e.vj_post;
        double energy = kinetic_energy(state);
        Vec3 p = total_momentum(state);
        double change = 0.5 * (norm2(e.vi_post) + norm2(e.vj_post) - norm2(e.vi_pre) - norm2(e.vj_pre));
        double g = std::abs(dot(e.vi_pre - e.vj_pre, e.sigma));
        double h = s.model.restituted_speed(g);
        double expected = -(g * g - h * h) / 4;
        momentum_drift = std::max(momentum_drift, norm(p - p0));
        energy_drift = std::max(energy_drift, std::abs(energy - e0));
        change_error = std::max(change_error, std::abs(change - expected));
        std::vector<double> row{e.time, double(e.i), double(e.j), energy};
        push3(row, p);
        row.insert(row.end(), {change, expected});
        add(t, row);
    }
    r.tables = {t};
    r.summary = {{"events", double(log.size())},
                 {"max_momentum_drift", momentum_drift},
                 {"max_energy_drift", energy_drift},
                 {"max_energy_change_error", change_error}};
    return r;
}

Report reverse(const Scenario& s) {
    if (!s.model.is_elastic()) throw InvalidArgument("reverse needs an elastic restitution model");
    Report r{Command::Reverse, {}, {}, 0};
    SystemState start = initial_state(s);
    auto opt = dynamics_options(s);
    EventLog log;
    SystemState there = evolve(start, s.horizon, opt, &log);
    for (auto& v : there.velocities) v = -v;
    SystemState back = evolve(there, s.horizon, opt);
    for (auto& v : back.velocities) v = -v;
    Table t = make_table("mismatch", {{"sphere", "position_error", "velocity_error"}});
    double worst = 0;
    for (std::size_t i = 0; i < start.size(); ++i) {
        double dr = norm(displacement(s.domain, start.positions[i], back.positions[i]));
        double dv = norm(back.velocities[i] - start.velocities[i]);
        worst = std::max({worst, dr, dv});
        add(t, {double(i), dr, dv});
    }
    r.tables = {t};
    r.summary = {{"events", double(log.size())}, {"max_mismatch", worst}};
    return r;
}

Report jacobian(const Scenario& s) {
    Report r{Command::Jacobian, {}, {}, 0};
    SystemState start = initial_state(s);
    auto opt = dynamics_options(s);
    EventLog log = event_log(start, s.horizon, opt);
    // backward across each collision from just after it: full determinant and position block
    Table t = make_table("collisions", {{"time", "i", "j", "normal_speed", "mu", "backward_determinant",
                                         "expected_determinant", "position_block_determinant",
                                         "expected_position_block"}});
    for (std::size_t k = 0; k < log.size(); ++k) {
        const auto& e = log[k];
        double before = k > 0 ? e.time - log[k - 1].time : e.time;
        double after = (k + 1 < log.size() ? log[k + 1].time : s.horizon) - e.time;
        double delta = std::min({1e-4, before / 4, after / 4});
        if (!(delta > 0)) throw EventOrderChanged("collisions too close for a finite-difference Jacobian");
        double g = std::abs(dot(e.vi_pre - e.vj_pre, e.sigma));
        SystemState just_after = evolve(start, e.time + delta, opt);
        FlowJacobian jb = flow_jacobian_fd(just_after, -2 * delta, delta * 1e-5, opt);
        add(t, {e.time, double(e.i), double(e.j), g, s.model.mu(g), std::abs(jb.determinant),
                1 / collision_volume_factor(g, s.model), std::abs(jb.position_block_determinant), 1 / s.model.mu(g)});
    }
    // the whole-horizon matrix is ill-conditioned after a few collisions: multiply the determinants of
    // segments cut midway between events
    std::vector<double> cuts{0.0};
    for (std::size_t k = 1; k < log.size(); ++k) cuts.push_back(0.5 * (log[k - 1].time + log[k].time));
    cuts.push_back(s.horizon);
    double forward = 1;
    SystemState end = start;
    for (std::size_t k = 1; k < cuts.size(); ++k) {
        forward *= std::abs(flow_jacobian_fd(end, cuts[k] - cuts[k - 1], 1e-6, opt).determinant);
        end = evolve(end, cuts[k] - cuts[k - 1], opt);
    }
    r.tables = {t};
    r.summary = {{"events", double(log.size())},
                 {"forward_determinant", forward},
                 {"expected_forward_determinant", std::exp(end.log_jacobian)}};
    return r;
}

Report residual_scan(const Scenario& s) {
    if (s.tests.empty()) throw InvalidArgument("residual-scan needs test_functions in the scenario");
    Report r{Command::ResidualScan, {}, {}, 0};
    ScanSetup setup;
    setup.make = [&](double eps) { return FieldEvaluator(initial_density(s, eps), s.model, field_config(s)); };
    setup.phis = s.tests;
    if (!s.probe_times.empty() || !s.probes.empty())
        setup.probes = [&](const FieldEvaluator& fe) { return scenario_probes(s, fe.initial()); };
    setup.mild.flux_samples = s.budget.flux_samples;
    setup.mild.seed = s.seed;
    ScanResult scan = epsilon_scan(setup, s.ladder);
    Table t = make_table("scan", {{"epsilon"}});
    for (std::size_t f = 0; f < s.tests.size(); ++f) {
        t.columns.push_back("pairing_" + std::to_string(f));
        t.columns.push_back("pairing_" + std::to_string(f) + "_error");
    }
    t.columns.insert(t.columns.end(), {"mild_sup", "mild_error"});
    const double nan = std::numeric_limits<double>::quiet_NaN();
    bool mild = static_cast<bool>(setup.probes);
    for (auto& rep : scan.reports) {
        std::vector<double> row{rep.epsilon};
        for (auto& p : rep.pairings) row.insert(row.end(), {p.value, p.error});
        row.insert(row.end(), {mild ? rep.mild_sup : nan, mild ? rep.mild_error : nan});
        add(t, row);
    }
    r.tables = {t};
    for (std::size_t f = 0; f < scan.pairing_decays.size(); ++f)
        r.summary.push_back({"pairing_" + std::to_string(f) + "_decays", scan.pairing_decays[f] ? 1.0 : 0.0});
    if (mild) r.summary.push_back({"mild_decays", scan.mild_decays ? 1.0 : 0.0});
    return r;
}

Report ge_check(const Scenario& s) {
    Report r{Command::GECheck, {}, {}, 0};
    GESolution ge(ge_config(s, s.epsilon));
    auto probes = scenario_probes(s, ge.config().initial);
    if (probes.empty()) throw InvalidArgument("ge-check needs probes in the scenario");
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> mild(probes.size(), nan), mild_error(probes.size(), nan);
    double mild_sup = nan, mild_budget = nan;
    if (ge.config().initial.size() == 2) {
        std::vector<ResidualProbe> late;
        std::vector<std::size_t> which;
        for (std::size_t k = 0; k < probes.size(); ++k)
            if (probes[k].t >= s.ge_t0) {
                late.push_back(probes[k]);
                which.push_back(k);
            }
        if (!late.empty()) {
            MildConfig cfg;
            cfg.flux_samples = s.budget.flux_samples;
            cfg.seed = s.seed;
            MildResidual m = ge.mild_check(late, s.ge_t0, cfg);
            for (std::size_t k = 0; k < which.size(); ++k) {
                mild[which[k]] = m.values[k];
                mild_error[which[k]] = m.errors[k];
            }
            mild_sup = m.sup;
            mild_budget = m.error;
        }
    }
    Table t = make_table("probes", {{"t"}, cols3("r"), cols3("v"),
                                    {"series", "series_error", "direct", "direct_error", "difference",
                                     "difference_error", "mild_residual", "mild_error"}});
    double worst = 0;
    for (std::size_t k = 0; k < probes.size(); ++k) {
        const auto& p = probes[k];
        SeriesEstimate e = ge.series(p.r, p.v, p.t);
        if (e.difference.error > 0) worst = std::max(worst, std::abs(e.difference.value) / e.difference.error);
        else if (e.difference.value != 0) worst = std::numeric_limits<double>::infinity();
        std::vector<double> row{p.t};
        push3(row, p.r);
        push3(row, p.v);
        row.insert(row.end(), {e.series.value, e.series.error, e.direct.value, e.direct.error, e.difference.value,
                               e.difference.error, mild[k], mild_error[k]});
        add(t, row);
    }
    r.tables = {t};
    r.summary = {{"max_difference_in_errors", worst}, {"mild_sup", mild_sup}, {"mild_error", mild_budget}};
    return r;
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

}  // namespace

std::string to_csv(const Table& t) {
    std::string out;
    for (std::size_t c = 0; c < t.columns.size(); ++c) out += (c ? "," : "") + quoted(t.columns[c]);
    out += "\r\n";
    for (auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) out += (c ? "," : "") + cell(row[c]);
        out += "\r\n";
    }
    return out;
}

namespace {
const std::pair<Command, const char*> kCommands[] = {
    {Command::Simulate, "simulate"},          {Command::Conserve, "conserve"}, {Command::Reverse, "reverse"},
    {Command::Jacobian, "jacobian"},          {Command::ResidualScan, "residual-scan"},
    {Command::GECheck, "ge-check"}};
}

std::optional<Command> parse_command(const std::string& name) {
    for (auto& [c, n] : kCommands)
        if (name == n) return c;
    return std::nullopt;
}

std::string command_name(Command c) {
    for (auto& [k, n] : kCommands)
        if (k == c) return n;
    return "unknown";
}

Scenario apply(Scenario s, const Overrides& o, Command c) {
    if (o.seed) s.seed = *o.seed;
    if (o.ladder) s.ladder = *o.ladder;
    if (o.budget) {
        switch (c) {
            case Command::ResidualScan: s.budget.pair_samples = *o.budget; break;
            case Command::GECheck: s.budget.series_samples = *o.budget; break;
            default: s.budget.collision_cap = *o.budget; break;
        }
    }
    return s;
}

Report run(Command c, const Scenario& s) {
    auto problems = diagnostics(s);
    if (!problems.empty()) throw ValidationError(problems.front());
    auto t0 = std::chrono::steady_clock::now();
    Report r{c, {}, {}, 0};
    switch (c) {
        case Command::Simulate: r = simulate(s); break;
        case Command::Conserve: r = conserve(s); break;
        case Command::Reverse: r = reverse(s); break;
        case Command::Jacobian: r = jacobian(s); break;
        case Command::ResidualScan: r = residual_scan(s); break;
        case Command::GECheck: r = ge_check(s); break;
    }
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

std::string report_json(const Report& r, const Scenario& s, bool with_tables) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["command"] = command_name(r.command);
    j["scenario"] = json::parse(s.source);
    j["inputs"] = {{"seed", s.seed},
                   {"epsilon", s.epsilon},
                   {"epsilon_ladder", s.ladder},
                   {"horizon", s.horizon},
                   {"budget",
                    {{"pair_samples", s.budget.pair_samples},
                     {"gain_samples", s.budget.gain_samples},
                     {"series_samples", s.budget.series_samples},
                     {"flux_samples", s.budget.flux_samples},
                     {"collision_cap", s.budget.collision_cap}}}};
    json summary = json::object();
    for (auto& [k, v] : r.summary) summary[k] = finite_or_null(v);
    j["summary"] = summary;
    json tables = json::array();
    for (auto& t : r.tables) {
        json e = {{"name", t.name}, {"columns", t.columns}, {"row_count", t.rows.size()}};
        if (with_tables) {
            json rows = json::array();
            for (auto& row : t.rows) {
                json out = json::array();
                for (double x : row) out.push_back(finite_or_null(x));
                rows.push_back(out);
            }
            e["rows"] = rows;
        }
        tables.push_back(e);
    }
    j["tables"] = tables;
    j["wall_time_s"] = r.wall_time;
    return j.dump(2) + "\n";
}

int exit_code(const std::exception& e) {
    if (dynamic_cast<const ExcludedTrajectory*>(&e)) return 4;
    if (dynamic_cast<const NumericalFailure*>(&e) || dynamic_cast<const EventOrderChanged*>(&e)) return 3;
    if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const InvalidArgument*>(&e) ||
        dynamic_cast<const InvalidState*>(&e) || dynamic_cast<const NoInverse*>(&e))
        return 2;
    return 1;
}

void write_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, target);
}

}  // namespace enskog
