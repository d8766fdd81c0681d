// Acceptance run: one PASS/FAIL line per criterion. Always exits 0; the lines are the result.
// usage: acceptance <enskog cli> <scenario dir>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <unistd.h>

#include "enskog/genenskog.hpp"
#include "enskog/rng.hpp"
#include "enskog/scenario.hpp"
#include "oracles.hpp"

using namespace enskog;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... xs) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, xs...);
    return buf;
}

void criterion(int id, const char* name, const std::function<Outcome()>& body) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), s);
    std::fflush(stdout);
}

double elapsed_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// non-overlapping uniform positions in a periodic box, velocities in the unit ball
SystemState random_box(int n, double box, RestitutionModel model, Rng& rng) {
    SystemState s;
    s.domain = Torus{{box, box, box}};
    s.model = model;
    while (static_cast<int>(s.size()) < n) {
        Vec3 r{box * (rng.uniform() - 0.5), box * (rng.uniform() - 0.5), box * (rng.uniform() - 0.5)};
        bool clear = true;
        for (auto& q : s.positions) clear = clear && norm(displacement(s.domain, q, r)) > 1.05;
        if (!clear) continue;
        s.positions.push_back(r);
        s.velocities.push_back(rng.in_ball(1.0));
    }
    return s;
}

Vec3 momentum_sum(const std::vector<Vec3>& vs) {
    Vec3 p;
    for (auto& v : vs) p += v;
    return p;
}

double energy_sum(const std::vector<Vec3>& vs) {
    double e = 0;
    for (auto& v : vs) e += 0.5 * dot(v, v);
    return e;
}

Outcome conservation() {
    auto t0 = std::chrono::steady_clock::now();
    Rng rng(101);
    double dp = 0, de = 0;
    long fewest = 1L << 40;
    for (int n : {2, 3, 4}) {
        SystemState s = random_box(n, 2.2, RestitutionModel::elastic(), rng);
        const Vec3 p0 = momentum_sum(s.velocities);
        const double e0 = energy_sum(s.velocities);
        long events = 0;
        while (events < 10000) {
            EventLog log;
            s = evolve(s, 50.0, {}, &log);
            events += static_cast<long>(log.size());
        }
        fewest = std::min(fewest, events);
        dp = std::max(dp, norm(momentum_sum(s.velocities) - p0));
        de = std::max(de, std::abs(energy_sum(s.velocities) - e0));
    }
    // inelastic: each collision's energy change against -(1 - mu^2) (v21.sigma)^2 / 4, over fresh
    // states since the collision rate dies out as the gas cools
    const double mu = 0.5;
    double change_err = 0;
    long inelastic = 0;
    while (inelastic < 1000) {
        SystemState s = random_box(4, 2.2, RestitutionModel::constant(mu), rng);
        EventLog log;
        try {
            evolve(s, 20.0, {}, &log);
        } catch (const ExcludedTrajectory&) {
            continue;
        }
        for (auto& e : log) {
            double g = dot(e.vj_pre - e.vi_pre, e.sigma);
            double expected = -(1 - mu * mu) * g * g / 4;
            double change = 0.5 * (dot(e.vi_post, e.vi_post) + dot(e.vj_post, e.vj_post) - dot(e.vi_pre, e.vi_pre) -
                                   dot(e.vj_pre, e.vj_pre));
            change_err = std::max(change_err, std::abs(change - expected));
        }
        inelastic += static_cast<long>(log.size());
    }
    double secs = elapsed_since(t0);
    bool ok = dp <= 1e-10 && de <= 1e-10 && change_err <= 1e-10 && secs < 10;
    return {ok, fmt("elastic N=2..4, >=%ld events each: momentum drift %.2e, energy drift %.2e; "
                    "inelastic %ld collisions: max energy-change error %.2e",
                    fewest, dp, de, inelastic, change_err)};
}

Outcome reversibility() {
    Rng rng(202);
    double worst = 0;
    long fewest = 1L << 40;
    for (int trial = 0; trial < 5; ++trial) {
        SystemState s = random_box(4, 2.6, RestitutionModel::elastic(), rng);
        EventLog log = event_log(s, 200.0);
        if (log.size() < 9) return {false, "random state produced fewer than 9 collisions"};
        // stop between the 8th and 9th collision
        double horizon = 0.5 * (log[7].time + log[8].time);
        EventLog used;
        SystemState there = evolve(s, horizon, {}, &used);
        fewest = std::min(fewest, static_cast<long>(used.size()));
        for (auto& v : there.velocities) v = -v;
        SystemState back = evolve(there, horizon);
        for (std::size_t i = 0; i < s.size(); ++i) {
            worst = std::max(worst, norm(displacement(s.domain, s.positions[i], back.positions[i])));
            worst = std::max(worst, norm(-back.velocities[i] - s.velocities[i]));
        }
    }
    return {fewest >= 5 && worst <= 1e-9,
            fmt("5 torus round trips with >= %ld collisions: max mismatch %.2e", fewest, worst)};
}

// pair with impact parameter 0.41, one collision near t = 1.05
SystemState oblique(RestitutionModel model) {
    SystemState o;
    o.positions = {{0, 0, 0}, {3, 0.4, 0.1}};
    o.velocities = {{0, 0, 0}, {-2, 0, 0}};
    o.model = model;
    return o;
}

Outcome liouville() {
    SystemState o = oblique(RestitutionModel::elastic());
    const double t = 2.0;
    if (event_log(o, t).size() != 1) return {false, "fixture does not collide exactly once"};
    double lib = flow_jacobian_fd(o, t, 1e-6).determinant;
    // oracle: central differences of the small-step integrator, 12 x 12
    using V12 = Eigen::Matrix<double, 12, 1>;
    auto flow = [&](const V12& x) {
        oracle::StepState st{{{x[0], x[1], x[2]}, {x[6], x[7], x[8]}}, {{x[3], x[4], x[5]}, {x[9], x[10], x[11]}}};
        st = oracle::step_integrate(st, 1.0, t, 0.05, FreeSpace{});
        V12 y;
        for (int i = 0; i < 2; ++i)
            for (int c = 0; c < 3; ++c) {
                y[6 * i + c] = st.r[i][c];
                y[6 * i + 3 + c] = st.v[i][c];
            }
        return y;
    };
    V12 x0;
    for (int i = 0; i < 2; ++i)
        for (int c = 0; c < 3; ++c) {
            x0[6 * i + c] = o.positions[i][c];
            x0[6 * i + 3 + c] = o.velocities[i][c];
        }
    Eigen::Matrix<double, 12, 12> jac;
    const double h = 1e-6;
    for (int k = 0; k < 12; ++k) {
        V12 xp = x0, xm = x0;
        xp[k] += h;
        xm[k] -= h;
        jac.col(k) = (flow(xp) - flow(xm)) / (2 * h);
    }
    double ref = jac.determinant();
    return {std::abs(lib - 1) <= 1e-3 && std::abs(ref - 1) <= 1e-3,
            fmt("det across one elastic collision: library %.8f, step-integrator oracle %.8f", lib, ref)};
}

Outcome inelastic_jacobian() {
    const double mu = 0.5;
    SystemState o = oblique(RestitutionModel::constant(mu));
    auto log = event_log(o, 2.0);
    if (log.size() != 1) return {false, "fixture does not collide exactly once"};
    const double delta = 1e-4;
    SystemState after = evolve(o, log[0].time + delta);
    FlowJacobian jb = flow_jacobian_fd(after, -2 * delta, 1e-9);
    double lib = std::abs(jb.position_block_determinant);
    // oracle in relative coordinates: run back to contact, undo the normal restitution, run on; velocity fixed
    const Vec3 v = after.velocities[1] - after.velocities[0];
    auto back = [&](const Vec3& r) {
        double tau = oracle::backward_contact_bisect(r, v, 1.0);
        Vec3 rc = r - tau * v;
        Vec3 n = unit(rc);
        Vec3 pre = v - dot(v, n) * n - dot(v, n) / mu * n;
        return Vec3(rc - (2 * delta - tau) * pre);
    };
    const Vec3 r0 = after.positions[1] - after.positions[0];
    Eigen::Matrix3d jac;
    const double h = 1e-9;
    for (int k = 0; k < 3; ++k) {
        Vec3 rp = r0, rm = r0;
        rp[k] += h;
        rm[k] -= h;
        Vec3 d = (back(rp) - back(rm)) / (2 * h);
        jac.col(k) << d[0], d[1], d[2];
    }
    double ref = std::abs(jac.determinant());
    double chi = chi_factor(log[0].vi_post, log[0].vj_post, log[0].sigma, o.model);
    bool ok = std::abs(lib - 1 / mu) <= 1e-2 && std::abs(ref - 1 / mu) <= 1e-2 && std::abs(chi - 1 / (mu * mu)) <= 1e-6;
    return {ok, fmt("position block %.6f (oracle %.6f, expected 2); chi_factor %.10f (oracle 1/mu^2 = 4)", lib, ref,
                    chi)};
}

InitialDensity head_on(double eps) {
    InitialDensity d;
    d.kernels = {Kernel{{{-2.5, 0, 0}, {2, 0, 0}}, eps}, Kernel{{{2.5, 0, 0}, {-2, 0, 0}}, eps}};
    return d;
}

Outcome factorization() {
    auto t0 = std::chrono::steady_clock::now();
    FieldEvaluator fe(head_on(0.05), RestitutionModel::elastic());
    Rng rng(505);
    double worst = 0, peak = 0;
    int probes = 0;
    while (probes < 20) {
        // a pair drawn from the kernels, placed just before its contact
        PhasePoint x = sample_kernel(fe.initial().kernels[0], rng), y = sample_kernel(fe.initial().kernels[1], rng);
        double s = oracle::backward_contact_bisect(y.r - x.r, x.v - y.v, 1.0);
        if (!std::isfinite(s)) continue;
        double t = s - 1e-9;
        PhasePoint x1{x.r + t * x.v, x.v}, x2{y.r + t * y.v, y.v};
        double f2 = eval_F2(fe, x1, x2, t);
        double ff = eval_f0(fe.initial(), x.r, x.v) * eval_f0(fe.initial(), y.r, y.v);
        worst = std::max(worst, std::abs(f2 - ff));
        peak = std::max(peak, ff);
        ++probes;
    }
    double secs = elapsed_since(t0);
    return {peak > 0 && worst / peak <= 0.05 && secs < 60,
            fmt("20 pre-collision contact probes at eps = 0.05: max |F2 - f0 f0| / max = %.2e", worst / peak)};
}

std::string scenario_dir;
std::string cli_path;

std::string decay_detail(const ScanResult& scan, std::size_t f) {
    std::string out = "[";
    for (std::size_t k = 0; k < scan.reports.size(); ++k)
        out += fmt(k ? ", %.3g" : "%.3g", scan.reports[k].pairings[f].value);
    return out + "]";
}

Outcome weak_decay(const std::string& file, bool with_probes, ScanResult* keep) {
    auto t0 = std::chrono::steady_clock::now();
    Scenario s = load_scenario(scenario_dir + "/" + file);
    if (s.tests.size() < 3) return {false, "scenario has fewer than 3 test functions"};
    ScanSetup setup;
    setup.make = [&](double eps) { return FieldEvaluator(initial_density(s, eps), s.model, field_config(s)); };
    setup.phis = s.tests;
    setup.ratio = 0.8;
    if (with_probes) setup.probes = [&](const FieldEvaluator& fe) { return scenario_probes(s, fe.initial()); };
    setup.mild.seed = s.seed;
    ScanResult scan = epsilon_scan(setup, {0.2, 0.1, 0.05, 0.025});
    double secs = elapsed_since(t0);
    bool ok = secs < 300;
    std::string detail;
    for (std::size_t f = 0; f < s.tests.size(); ++f) {
        ok = ok && scan.pairing_decays[f];
        detail += fmt("%sphi%zu %s", f ? "; " : "", f, decay_detail(scan, f).c_str());
    }
    if (keep) *keep = scan;
    return {ok, "ratio < 0.8 per step: " + detail};
}

ScanResult elastic_scan;
std::size_t elastic_probe_count = 0;

Outcome mild_decay() {
    if (elastic_scan.reports.size() != 4) return {false, "elastic scan did not complete"};
    std::string sups;
    for (std::size_t k = 0; k < 4; ++k) sups += fmt(k ? ", %.3g" : "%.3g", elastic_scan.reports[k].mild_sup);
    return {elastic_scan.mild_decays && elastic_probe_count >= 10,
            fmt("%zu probes, sup over probes along the ladder: [%s]", elastic_probe_count, sups.c_str())};
}

Outcome ge_exactness() {
    auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = true;
    for (const char* file : {"head_on_elastic.json", "head_on_inelastic.json"}) {
        Scenario s = load_scenario(scenario_dir + "/" + file);
        GEConfig cfg = ge_config(s, 0.05);
        cfg.fields.gain_samples = 1024;
        GESolution ge(cfg);
        auto probes = centre_probes(cfg.initial, {0.95, 1.05, 1.3, 1.8}, 2);
        MildResidual m = ge.mild_check(probes, 0.5);
        int bad = 0;
        double ratio = 0;
        for (std::size_t k = 0; k < probes.size(); ++k) {
            bool within = std::abs(m.values[k]) <= 3 * m.errors[k];
            bad += !within;
            if (m.errors[k] > 0) ratio = std::max(ratio, std::abs(m.values[k]) / m.errors[k]);
        }
        ok = ok && bad == 0;
        detail += fmt("%s%s: %d of %zu probes over 3x budget, max residual %.3g, max |residual|/budget %.1f",
                      detail.empty() ? "" : "; ", s.model.is_elastic() ? "elastic" : "mu=0.5", bad, probes.size(),
                      m.sup, ratio);
    }
    return {ok && elapsed_since(t0) < 300, detail};
}

Outcome telescoping() {
    struct Probe {
        Vec3 r, v;
        double t;
    };
    int count = 0, bad = 0;
    double worst = 0;
    auto check = [&](const GESolution& ge, const std::vector<Probe>& probes) {
        for (auto& p : probes) {
            SeriesEstimate e = ge.series(p.r, p.v, p.t);
            double z = e.difference.error > 0 ? std::abs(e.difference.value) / e.difference.error
                                              : (e.difference.value == 0 ? 0.0 : INFINITY);
            worst = std::max(worst, z);
            bad += z > 3;
            ++count;
        }
    };
    GEConfig two = ge_config(load_scenario(scenario_dir + "/head_on_elastic.json"), 0.05);
    two.series_samples = 200000;
    two.fields.gain_samples = 1024;
    // before contact, at contact, both scattered spheres, a ghost point
    check(GESolution(two), {{{-1.49, 0.01, 0}, {2, 0, 0}, 0.5},
                            {{-0.5, 0.02, 0}, {2, 0, 0}, 1.0},
                            {{-1.5, 0.01, 0}, {-2, 0, 0}, 1.5},
                            {{1.5, -0.01, 0}, {2, 0, 0}, 1.5},
                            {{1.1, 0.01, 0}, {2, 0, 0}, 1.8}});
    GEConfig three = ge_config(load_scenario(scenario_dir + "/billiard.json"), 0.025);
    three.series_samples = 1000000;
    three.fields.gain_samples = 1024;
    // A at rest after its collision (twice), B moving, C before and after B arrives, B at rest
    check(GESolution(three), {{{-0.995, 0, 0}, {0, 0, 0}, 1.0},
                              {{1.005, 0, 0}, {2, 0, 0}, 1.0},
                              {{-0.995, 0, 0}, {0, 0, 0}, 2.8},
                              {{4.505, 0, 0}, {0, 0, 0}, 2.0},
                              {{5.605, 0, 0}, {2, 0, 0}, 2.8},
                              {{3.505, 0, 0}, {0, 0, 0}, 2.8}});
    return {bad == 0, fmt("%d probes (N=2: 5, N=3: 6): %d outside 3 standard errors, max |series - direct| / SE %.2f",
                          count, bad, worst)};
}

Outcome t_star_oracle() {
    Rng rng(1111);
    double err_bisect = 0, err_forward = 0;
    int contacts = 0;
    for (int n = 0; n < 10000; ++n) {
        Vec3 dir = unit(rng.in_ball(1.0) + Vec3{1e-12, 0, 0});
        Vec3 r = (1.0 + 3.0 * rng.uniform()) * dir;
        Vec3 v = 2.0 * rng.in_ball(1.0);
        if (n % 2 == 0) v = (0.5 + rng.uniform()) * (dir + 0.4 * rng.in_ball(1.0));  // aimed: mostly a contact
        double ts = t_star(r, v, 1.0);
        double ref = oracle::backward_contact_bisect(r, v, 1.0);
        if (std::isfinite(ts) != std::isfinite(ref)) return {false, fmt("finite/infinite mismatch at input %d", n)};
        if (!std::isfinite(ts)) continue;
        ++contacts;
        err_bisect = std::max(err_bisect, std::abs(ts - ref));
        // forward predictor on the time-reflected pair
        auto fwd = time_to_collision({{0, 0, 0}, {0, 0, 0}}, {r, -v}, 1.0, FreeSpace{});
        if (!fwd) return {false, fmt("forward predictor finds no contact at input %d", n)};
        err_forward = std::max(err_forward, std::abs(*fwd - ts));
    }
    return {err_bisect <= 1e-10 && err_forward <= 1e-9 && contacts > 2000,
            fmt("10^4 inputs, %d contacts: max error vs bisection %.2e, vs reflected forward predictor %.2e", contacts,
                err_bisect, err_forward)};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    namespace fs = std::filesystem;
    fs::path root = fs::temp_directory_path() / ("enskog_acceptance_" + std::to_string(::getpid()));
    struct Run {
        std::string command, scenario, extra, file;
    };
    const std::vector<Run> runs = {
        {"simulate", "torus_four.json", "", "simulate.csv"},
        {"ge-check", "head_on_elastic.json", "--budget 4000", "ge-check.csv"},
        {"residual-scan", "head_on_elastic.json", "--budget 4000 --epsilon-ladder 0.2,0.1", "residual-scan.csv"}};
    std::string detail;
    bool ok = true;
    for (auto& r : runs) {
        std::string body[2];
        for (int k = 0; k < 2; ++k) {
            fs::path out = root / (r.command + std::to_string(k));
            // different thread caps on the two runs
            std::string cmd = "ENSKOG_THREADS=" + std::string(k ? "3" : "1") + " '" + cli_path + "' " + r.command +
                              " --scenario '" + scenario_dir + "/" + r.scenario + "' --seed 4242 --out '" +
                              out.string() + "' " + r.extra + " > /dev/null";
            int status = std::system(cmd.c_str());
            if (status != 0) return {false, r.command + " exited with status " + std::to_string(status)};
            body[k] = slurp(out / r.file);
        }
        bool same = !body[0].empty() && body[0] == body[1];
        ok = ok && same;
        detail += fmt("%s%s %s (%zu bytes)", detail.empty() ? "" : "; ", r.command.c_str(),
                      same ? "identical" : "DIFFERENT", body[0].size());
    }
    fs::remove_all(root);
    return {ok, "two CLI runs, seed 4242, 1 vs 3 threads: " + detail};
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::fprintf(stderr, "usage: acceptance <enskog cli> <scenario dir>\n");
        return 2;
    }
    cli_path = argv[1];
    scenario_dir = argv[2];
    criterion(1, "conservation", conservation);
    criterion(2, "reversibility", reversibility);
    criterion(3, "Liouville determinant", liouville);
    criterion(4, "inelastic Jacobian", inelastic_jacobian);
    criterion(5, "pre-collision factorization", factorization);
    criterion(6, "weak residual decay, elastic", [] {
        Outcome o = weak_decay("head_on_elastic.json", true, &elastic_scan);
        Scenario s = load_scenario(scenario_dir + "/head_on_elastic.json");
        elastic_probe_count = scenario_probes(s, initial_density(s, s.epsilon)).size();
        return o;
    });
    criterion(7, "weak residual decay, mu = 0.5", [] { return weak_decay("head_on_inelastic.json", false, nullptr); });
    criterion(8, "mild residual decay", mild_decay);
    criterion(9, "generalized Enskog exactness", ge_exactness);
    criterion(10, "cumulant telescoping", telescoping);
    criterion(11, "t* closed form", t_star_oracle);
    criterion(12, "determinism", determinism);
    return 0;
}
