#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "enskog/core.hpp"
#include "enskog/quadrature.hpp"
#include "enskog/vec3.hpp"

namespace enskog {

// Where a density component can be nonzero at the evaluation time. Given velocity v the position
// support is the ball about r_center + shear (v - v_center) of radius r_radius.
struct SupportBall {
    Vec3 r_center;
    double r_radius = std::numeric_limits<double>::infinity();
    Vec3 v_center;
    double v_radius = 1.0;
    double shear = 0.0;

    Vec3 position_centre(const Vec3& v) const { return r_center + shear * (v - v_center); }
    // radius of a ball containing the position support for every admissible velocity
    double position_reach() const { return r_radius + std::abs(shear) * v_radius; }
    bool contains(const Vec3& r, const Vec3& v) const;
};

struct FieldComponent {
    std::function<double(const Vec3& r, const Vec3& v)> eval;
    SupportBall support;
    bool loss_partner = true;  // false: the caller accounts for losses against this component itself
};

// f = sum of components; the collision operators are expanded bilinearly over component pairs
using ComponentDensity = std::vector<FieldComponent>;

struct QuadratureConfig {
    int n_theta = 8;
    int n_phi = 16;
    int n_velocity = 8;  // tensor Gauss nodes per axis for the gain velocity box
    int n_radial = 6;  // radial nodes for velocity balls (loss)
    int n_ball_theta = 6;
    int n_ball_phi = 12;
    bool estimate_error = true;

    QuadratureConfig reduced() const;
};

struct Integral {
    double value = 0;
    double error = 0;
};

// Post-collision pair (v1, v2) with normal sigma -> pre-collision pair and the gain weight chi.
struct PreCollision {
    Vec3 v1, v2;
    double weight;
};
PreCollision pre_collision(const Vec3& v1, const Vec3& v2, const Vec3& sigma, const RestitutionModel& model);

using PairDensity = std::function<double(const PhasePoint& x1, const PhasePoint& x2)>;
// Returns F(x1, x2) times the factor zeta(x1) zeta(x2) or 1.
using PointFactor = std::function<double(const Vec3& r, const Vec3& v)>;

Integral q_be(const ComponentDensity& f, const Vec3& r, const Vec3& v, double a, const QuadratureConfig& quad);
Integral q_be_inelastic(const ComponentDensity& f, const Vec3& r, const Vec3& v, double a,
                        const RestitutionModel& model, const QuadratureConfig& quad);

// Gain and loss parts separately (value fields); used by callers that need the split.
struct GainLoss {
    Integral gain, loss;
};
GainLoss q_be_parts(const ComponentDensity& f, const Vec3& r, const Vec3& v, double a, const RestitutionModel& model,
                    const QuadratureConfig& quad, const PointFactor& zeta = {});

// First BBGKY right-hand side for a pair density; partner_supports bound where F2 is nonzero
// in its second argument.
Integral bbgky_rhs(const PairDensity& F2, const std::vector<SupportBall>& partner_supports, const Vec3& r,
                   const Vec3& v, double a, const RestitutionModel& model, const QuadratureConfig& quad);

// Two-particle generalized Enskog collision integral: every f factor carries zeta.
Integral q_ge2(const ComponentDensity& f, const PointFactor& zeta, const Vec3& r, const Vec3& v, double a,
               const RestitutionModel& model, const QuadratureConfig& quad);

}  // namespace enskog
