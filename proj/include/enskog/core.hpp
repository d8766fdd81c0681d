#pragma once

#include <functional>
#include <string>
#include <utility>

#include "enskog/vec3.hpp"

namespace enskog {

class Rng;

// Elastic, constant mu, or a curve mu(g). h(g) = mu(g) g is the restituted normal speed.
class RestitutionModel {
public:
    enum class Kind { Elastic, Constant, Curve };
    using Curve = std::function<double(double)>;

    RestitutionModel() = default;
    static RestitutionModel elastic();
    static RestitutionModel constant(double mu);
    // dmu may be empty, then h'(g) is taken by central differences
    static RestitutionModel curve(Curve mu, Curve dmu = {}, std::string label = "curve");

    Kind kind() const { return kind_; }
    bool is_elastic() const { return kind_ == Kind::Elastic || (kind_ == Kind::Constant && mu_ == 1.0); }
    double constant_mu() const { return mu_; }
    const std::string& label() const { return label_; }

    double mu(double g) const;
    double restituted_speed(double g) const { return mu(g) * g; }
    double restituted_speed_derivative(double g) const;
    // g'' with mu(g'') g'' = g; throws NoInverse when h is not strictly increasing on the bracket
    double invert(double g) const;

private:
    Kind kind_ = Kind::Elastic;
    double mu_ = 1.0;
    Curve curve_;
    Curve dcurve_;
    std::string label_ = "elastic";
};

using VelocityPair = std::pair<Vec3, Vec3>;

VelocityPair collide_elastic(const Vec3& v1, const Vec3& v2, const Vec3& sigma);
VelocityPair collide_inelastic(const Vec3& v1, const Vec3& v2, const Vec3& sigma, const RestitutionModel& model);
VelocityPair inverse_collision(const Vec3& v1, const Vec3& v2, const Vec3& sigma, const RestitutionModel& model);
double chi_factor(const Vec3& v1, const Vec3& v2, const Vec3& sigma, const RestitutionModel& model);

// Phase-volume factor of one forward collision with pre-collision normal speed g: mu(g) h'(g).
// Its reciprocal at g'' is chi.
double collision_volume_factor(double g, const RestitutionModel& model);

// One sphere's normal velocity change |k| = (g + h(g)) / 2 in terms of the pre- and post-collision
// normal relative speeds g and u = h(g).
struct NormalSpeeds {
    double u, g, dkappa_du;
};
NormalSpeeds normal_speeds(double kappa, const RestitutionModel& model);

// Product bump C b(|r|/eps) b(|v|/eps), b(s) = (1 - s^2)^2 on s < 1.
struct Kernel {
    PhasePoint center;
    double eps = 0.1;
};

double kernel_profile(const Vec3& dr, const Vec3& dv, double eps);
double kernel_peak(double eps);
double kernel_eval(const Kernel& k, const Vec3& r, const Vec3& v);
// exact draw from the normalized kernel
PhasePoint sample_kernel(const Kernel& k, Rng& rng);
// offset with density proportional to b(|x|/eps) in a ball
Vec3 sample_bump_offset(double eps, Rng& rng);

}  // namespace enskog
