#include <cmath>

#include "doctest.h"
#include "enskog/dynamics.hpp"
#include "enskog/errors.hpp"
#include "enskog/rng.hpp"
#include "oracles.hpp"

using namespace enskog;

namespace {

SystemState head_on(RestitutionModel m = RestitutionModel::elastic()) {
    SystemState s;
    s.positions = {{0, 0, 0}, {3, 0, 0}};
    s.velocities = {{0, 0, 0}, {-2, 0, 0}};
    s.model = m;
    return s;
}

SystemState billiard() {
    SystemState s;
    s.positions = {{0, 0, 0}, {3, 0.3, 0}, {6, -0.2, 0.1}};
    s.velocities = {{1, 0, 0}, {0, 0, 0}, {-1, 0.05, 0}};
    return s;
}

double max_mismatch(const SystemState& a, const SystemState& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, norm(displacement(a.domain, a.positions[i], b.positions[i])));
        m = std::max(m, norm(a.velocities[i] - b.velocities[i]));
    }
    return m;
}

oracle::StepState to_step(const SystemState& s) { return {s.positions, s.velocities}; }

// random non-overlapping state in a box
SystemState random_state(Rng& rng, int n, double box, double a) {
    SystemState s;
    s.a = a;
    s.domain = Torus{{box, box, box}};
    while (static_cast<int>(s.size()) < n) {
        Vec3 r{rng.uniform(0, box), rng.uniform(0, box), rng.uniform(0, box)};
        bool ok = true;
        for (auto& q : s.positions) ok = ok && norm(displacement(s.domain, q, r)) > a * 1.05;
        if (!ok) continue;
        s.positions.push_back(r);
        s.velocities.push_back(rng.in_ball(1.0));
    }
    return s;
}

}  // namespace

TEST_CASE("time_to_collision examples") {
    FreeSpace fs;
    auto t = time_to_collision({{0, 0, 0}, {0, 0, 0}}, {{3, 0, 0}, {-2, 0, 0}}, 1.0, fs);
    REQUIRE(t);
    CHECK(*t == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_FALSE(time_to_collision({{0, 0, 0}, {0, 0, 0}}, {{3, 4, 0}, {0, -1, 0}}, 1.0, fs));
    CHECK_THROWS_AS(time_to_collision({{0, 0, 0}, {0, 0, 0}}, {{0.5, 0, 0}, {0, 0, 0}}, 1.0, fs), InvalidState);
    // touching and approaching
    auto t0 = time_to_collision({{0, 0, 0}, {0, 0, 0}}, {{1, 0, 0}, {-1, 0, 0}}, 1.0, fs);
    REQUIRE(t0);
    CHECK(*t0 == 0.0);

    // torus: r2 = 9 lies 1 away through the boundary... after 0.5 the moving sphere hits the image
    Torus box{{10, 10, 10}};
    PhasePoint p1{{0.5, 0, 0}, {0, 0, 0}}, p2{{9.0, 0, 0}, {1, 0, 0}};
    auto tt = time_to_collision(p1, p2, 1.0, box);
    REQUIRE(tt);
    CHECK(*tt == doctest::Approx(0.5).epsilon(1e-14));
    SystemState s;
    s.domain = box;
    s.positions = {p1.r, p2.r};
    s.velocities = {p1.v, p2.v};
    int hits = 0;
    auto o = oracle::step_integrate(to_step(s), 1.0, 0.6, 1e-5, box, 1.0, &hits);
    CHECK(hits == 1);
    auto log = event_log(s, 0.6);
    REQUIRE(log.size() == 1);
    CHECK(log[0].time == doctest::Approx(0.5).epsilon(1e-12));
    auto fin = evolve(s, 0.6);
    for (int i = 0; i < 2; ++i) CHECK(norm(displacement(box, fin.positions[i], o.r[i])) < 1e-9);
}

TEST_CASE("free flight and head-on exchange") {
    SystemState s;
    s.positions = {{0, 0, 0}, {0, 5, 0}};
    s.velocities = {{1, 0, 0}, {0, 0, 1}};
    auto f = evolve(s, 5.0);
    CHECK(norm(f.positions[0] - Vec3{5, 0, 0}) < 1e-14);
    CHECK(norm(f.positions[1] - Vec3{0, 5, 5}) < 1e-14);
    CHECK(event_log(s, 5.0).empty());

    auto h = evolve(head_on(), 2.0);
    CHECK(norm(h.velocities[0] - Vec3{-2, 0, 0}) < 1e-14);
    CHECK(norm(h.velocities[1] - Vec3{0, 0, 0}) < 1e-14);
    CHECK(norm(h.positions[0] - Vec3{-2, 0, 0}) < 1e-12);
    CHECK(norm(h.positions[1] - Vec3{1, 0, 0}) < 1e-12);
    auto log = event_log(head_on(), 2.0);
    REQUIRE(log.size() == 1);
    CHECK(log[0].time == doctest::Approx(1.0));
    CHECK(std::abs(std::abs(log[0].sigma.x) - 1.0) < 1e-14);
}

TEST_CASE("three-sphere billiard matches the step oracle") {
    auto s = billiard();
    auto log = event_log(s, 6.0);
    CHECK(log.size() >= 2);
    int hits = 0;
    auto o = oracle::step_integrate(to_step(s), 1.0, 6.0, 1e-4, FreeSpace{}, 1.0, &hits);
    CHECK(hits == static_cast<int>(log.size()));
    auto f = evolve(s, 6.0);
    for (int i = 0; i < 3; ++i) {
        CHECK(norm(f.positions[i] - o.r[i]) < 1e-6);
        CHECK(norm(f.velocities[i] - o.v[i]) < 1e-6);
    }
}

TEST_CASE("random torus trajectories match the step oracle") {
    Rng rng(2024);
    for (int trial = 0; trial < 3; ++trial) {
        auto s = random_state(rng, 4, 4.0, 1.0);
        auto log = event_log(s, 3.0);
        int hits = 0;
        auto o = oracle::step_integrate(to_step(s), 1.0, 3.0, 1e-3, s.domain, 1.0, &hits);
        CHECK(hits == static_cast<int>(log.size()));
        auto f = evolve(s, 3.0);
        for (int i = 0; i < 4; ++i) CHECK(norm(displacement(s.domain, f.positions[i], o.r[i])) < 1e-5);
    }
}

TEST_CASE("inelastic trajectory matches the step oracle and loses energy") {
    auto s = billiard();
    s.model = RestitutionModel::constant(0.5);
    EventLog log;
    auto f = evolve(s, 6.0, {}, &log);
    int hits = 0;
    auto o = oracle::step_integrate(to_step(s), 1.0, 6.0, 1e-4, FreeSpace{}, 0.5, &hits);
    CHECK(hits == static_cast<int>(log.size()));
    for (int i = 0; i < 3; ++i) CHECK(norm(f.positions[i] - o.r[i]) < 1e-6);
    CHECK(kinetic_energy(f) < kinetic_energy(s));
    CHECK(norm(total_momentum(f) - total_momentum(s)) < 1e-12);
    CHECK(f.log_jacobian == doctest::Approx(log.size() * std::log(0.25)));
}

TEST_CASE("flow property, reversibility and backward inelastic flow") {
    auto s = billiard();
    auto a = evolve(evolve(s, 1.3), 2.4);
    auto b = evolve(s, 3.7);
    CHECK(max_mismatch(a, b) < 1e-9);

    auto fwd = evolve(s, 5.0);
    auto back = evolve(fwd, -5.0);
    CHECK(max_mismatch(back, s) < 1e-9);
    auto rev = fwd;
    for (auto& v : rev.velocities) v = -v;
    rev = evolve(rev, 5.0);
    for (auto& v : rev.velocities) v = -v;
    CHECK(max_mismatch(rev, s) < 1e-9);

    auto in = head_on(RestitutionModel::constant(0.5));
    auto f = evolve(in, 2.0);
    auto r = evolve(f, -2.0);
    CHECK(max_mismatch(r, in) < 1e-12);
    CHECK(f.log_jacobian == doctest::Approx(std::log(0.25)));
    CHECK(r.log_jacobian == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("excluded trajectories") {
    SystemState graze;
    graze.positions = {{0, 0, 0}, {3, 1, 0}};
    graze.velocities = {{0, 0, 0}, {-1, 0, 0}};
    CHECK_THROWS_AS(evolve(graze, 5.0), GrazingCollision);

    // sphere 1 hit from both sides at the same instant
    SystemState triple;
    triple.positions = {{-3, 0, 0}, {0, 0, 0}, {3, 0, 0}};
    triple.velocities = {{1, 0, 0}, {0, 0, 0}, {-1, 0, 0}};
    CHECK_THROWS_AS(evolve(triple, 5.0), SimultaneousCollision);

    DynamicsOptions tight;
    tight.collision_cap = 0;
    CHECK_THROWS_AS(evolve(head_on(), 2.0, tight), CollisionCapExceeded);

    SystemState small_box = head_on();
    small_box.domain = Torus{{1.5, 5, 5}};
    CHECK_THROWS_AS(small_box.validate(), InvalidArgument);
}

TEST_CASE("partition times") {
    CHECK(partition_times({}, 3.0) == std::vector<double>{0.0, 3.0});
    EventLog one{{1.0, 0, 1, {1, 0, 0}, {}, {}, {}, {}}};
    auto p1 = partition_times(one, 3.0);
    CHECK(p1.front() == 0.0);
    CHECK(p1.back() == 3.0);
    EventLog two{{1.0, 0, 1, {1, 0, 0}, {}, {}, {}, {}}, {1.5, 1, 2, {1, 0, 0}, {}, {}, {}, {}}};
    auto p2 = partition_times(two, 3.0);
    bool between = false;
    for (double t : p2) between = between || (t > 1.0 && t < 1.5);
    CHECK(between);

    // property: each sphere at most once per cell, no T_k on an event
    auto log = event_log(billiard(), 6.0);
    auto parts = partition_times(log, 6.0);
    for (std::size_t k = 0; k + 1 < parts.size(); ++k) {
        std::vector<int> seen(3, 0);
        for (auto& e : log) {
            CHECK(e.time != parts[k]);
            if (e.time > parts[k] && e.time <= parts[k + 1]) {
                CHECK(++seen[e.i] == 1);
                CHECK(++seen[e.j] == 1);
            }
        }
    }
}

TEST_CASE("finite-difference flow Jacobian") {
    SystemState s;
    s.positions = {{0, 0, 0}, {0, 5, 0}};
    s.velocities = {{1, 0, 0}, {0, 0, 1}};
    CHECK(flow_jacobian_fd(s, 2.0, 1e-6).determinant == doctest::Approx(1.0).epsilon(1e-9));

    SystemState o;
    o.positions = {{0, 0, 0}, {3, 0.4, 0.1}};
    o.velocities = {{0, 0, 0}, {-2, 0, 0}};
    CHECK(std::abs(flow_jacobian_fd(o, 2.0, 1e-6).determinant - 1.0) < 1e-4);

    o.model = RestitutionModel::constant(0.5);
    auto jf = flow_jacobian_fd(o, 2.0, 1e-6);
    CHECK(std::abs(jf.determinant) == doctest::Approx(0.25).epsilon(1e-4));
    // backward from just past the collision: velocity-fixed position block gives 1/mu
    auto log = event_log(o, 2.0);
    REQUIRE(log.size() == 1);
    auto just_after = evolve(o, log[0].time + 1e-4);
    auto jb = flow_jacobian_fd(just_after, -2e-4, 1e-9);
    CHECK(std::abs(jb.determinant) == doctest::Approx(4.0).epsilon(1e-4));
    CHECK(std::abs(jb.position_block_determinant) == doctest::Approx(2.0).epsilon(1e-2));

    CHECK_THROWS_AS(flow_jacobian_fd(head_on(), 1.0, 1e-6), EventOrderChanged);
}
