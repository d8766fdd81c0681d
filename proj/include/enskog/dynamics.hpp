#pragma once

#include <Eigen/Dense>
#include <optional>
#include <variant>
#include <vector>

#include "enskog/core.hpp"
#include "enskog/vec3.hpp"

namespace enskog {

struct FreeSpace {};
struct Torus {
    Vec3 lengths;
};
using Domain = std::variant<FreeSpace, Torus>;

bool is_torus(const Domain& d);
// to - from, minimum image on a torus
Vec3 displacement(const Domain& d, const Vec3& from, const Vec3& to);
Vec3 wrap(const Domain& d, const Vec3& r);

struct DynamicsOptions {
    double tol_grazing = 1e-9;  // times the speed scale of the state
    double tol_time = 1e-12;
    long collision_cap = 1000000;
};

struct SystemState {
    std::vector<Vec3> positions;
    std::vector<Vec3> velocities;
    double a = 1.0;
    Domain domain = FreeSpace{};
    RestitutionModel model;
    double time = 0.0;
    // log of the phase-volume factor accumulated by the flow (0 for elastic)
    double log_jacobian = 0.0;

    std::size_t size() const { return positions.size(); }
    PhasePoint phase(std::size_t i) const { return {positions[i], velocities[i]}; }
    // throws InvalidState / InvalidArgument on violated invariants
    void validate() const;
};

struct CollisionEvent {
    double time = 0;
    int i = 0, j = 0;
    Vec3 sigma;  // unit, from j to i
    Vec3 vi_pre, vj_pre, vi_post, vj_post;
};
using EventLog = std::vector<CollisionEvent>;

std::optional<double> time_to_collision(const PhasePoint& p1, const PhasePoint& p2, double a, const Domain& domain);

// S_t: t may be negative. Events are appended to log (in the order they are processed) when given.
SystemState evolve(const SystemState& state, double t, const DynamicsOptions& opt = {}, EventLog* log = nullptr);
EventLog event_log(const SystemState& state, double horizon, const DynamicsOptions& opt = {});
std::vector<double> partition_times(const EventLog& log, double horizon);

struct FlowJacobian {
    Eigen::MatrixXd matrix;  // 6N x 6N, variables ordered (r_1, v_1, r_2, v_2, ...)
    double determinant = 0;
    double position_block_determinant = 0;  // d(final positions)/d(initial positions)
};

// Central differences of the flow map; throws EventOrderChanged if a perturbation alters the event sequence.
FlowJacobian flow_jacobian_fd(const SystemState& state, double t, double h, const DynamicsOptions& opt = {});

double kinetic_energy(const SystemState& s);
Vec3 total_momentum(const SystemState& s);

}  // namespace enskog
