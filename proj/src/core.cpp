#include "enskog/core.hpp"

#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <numbers>

#include "enskog/errors.hpp"
#include "enskog/rng.hpp"

namespace enskog {

namespace {

void require_unit(const Vec3& sigma) {
    if (!finite(sigma) || std::abs(norm(sigma) - 1.0) > 1e-12)
        throw InvalidArgument("sigma must be a unit vector");
}

double profile_1d(double s) {
    if (s >= 1.0) return 0.0;
    double w = 1.0 - s * s;
    return w * w;
}

}  // namespace

RestitutionModel RestitutionModel::elastic() { return RestitutionModel{}; }

RestitutionModel RestitutionModel::constant(double mu) {
    if (!(mu > 0.0 && mu <= 1.0)) throw InvalidArgument("restitution coefficient must lie in (0,1]");
    RestitutionModel m;
    m.kind_ = Kind::Constant;
    m.mu_ = mu;
    m.label_ = "constant";
    return m;
}

RestitutionModel RestitutionModel::curve(Curve mu, Curve dmu, std::string label) {
    if (!mu) throw InvalidArgument("restitution curve is empty");
    RestitutionModel m;
    m.kind_ = Kind::Curve;
    m.curve_ = std::move(mu);
    m.dcurve_ = std::move(dmu);
    m.label_ = std::move(label);
    return m;
}

double RestitutionModel::mu(double g) const {
    if (kind_ != Kind::Curve) return mu_;
    double m = curve_(g);
    if (!(m > 0.0 && m <= 1.0)) throw InvalidArgument("restitution curve left (0,1] at g=" + std::to_string(g));
    return m;
}

double RestitutionModel::restituted_speed_derivative(double g) const {
    if (kind_ != Kind::Curve) return mu_;
    if (dcurve_) return mu(g) + dcurve_(g) * g;
    double h = 1e-6 * std::max(1.0, g);
    double lo = std::max(0.0, g - h);
    return (restituted_speed(g + h) - restituted_speed(lo)) / (g + h - lo);
}

double RestitutionModel::invert(double g) const {
    if (g < 0) throw InvalidArgument("normal speed must be nonnegative");
    if (g == 0) return 0.0;
    if (kind_ != Kind::Curve) return g / mu_;
    // h(g'') <= g'' since mu <= 1, so the root lies above g
    double lo = g, hi = 2.0 * g;
    int doublings = 0;
    while (restituted_speed(hi) < g) {
        lo = hi;
        hi *= 2.0;
        if (++doublings > 200) throw NoInverse("mu(g) g never reaches the post-collision speed");
    }
    constexpr int kChecks = 32;
    double prev = restituted_speed(lo);
    for (int k = 1; k <= kChecks; ++k) {
        double cur = restituted_speed(lo + (hi - lo) * k / kChecks);
        if (!(cur > prev)) throw NoInverse("mu(g) g is not strictly increasing; inverse collision undefined");
        prev = cur;
    }
    auto f = [&](double x) { return restituted_speed(x) - g; };
    double tol = 1e-12 * std::max(1.0, g);
    auto bracket = boost::math::tools::bisect(f, lo, hi, [tol](double a, double b) { return std::abs(b - a) <= tol; });
    return 0.5 * (bracket.first + bracket.second);
}

VelocityPair collide_elastic(const Vec3& v1, const Vec3& v2, const Vec3& sigma) {
    require_unit(sigma);
    Vec3 dv = dot(v2 - v1, sigma) * sigma;
    return {v1 + dv, v2 - dv};
}

VelocityPair collide_inelastic(const Vec3& v1, const Vec3& v2, const Vec3& sigma, const RestitutionModel& model) {
    require_unit(sigma);
    double u = dot(v2 - v1, sigma);
    Vec3 dv = 0.5 * (1.0 + model.mu(std::abs(u))) * u * sigma;
    return {v1 + dv, v2 - dv};
}

VelocityPair inverse_collision(const Vec3& v1, const Vec3& v2, const Vec3& sigma, const RestitutionModel& model) {
    require_unit(sigma);
    double u = dot(v2 - v1, sigma);
    double gpp = model.invert(std::abs(u));
    double m = model.mu(gpp);
    Vec3 dv = (1.0 + m) / (2.0 * m) * u * sigma;
    return {v1 + dv, v2 - dv};
}

double collision_volume_factor(double g, const RestitutionModel& model) {
    if (model.kind() != RestitutionModel::Kind::Curve) return model.mu(g) * model.mu(g);
    return model.mu(g) * model.restituted_speed_derivative(g);
}

double chi_factor(const Vec3& v1, const Vec3& v2, const Vec3& sigma, const RestitutionModel& model) {
    require_unit(sigma);
    if (model.kind() == RestitutionModel::Kind::Elastic) return 1.0;
    double gpp = model.invert(std::abs(dot(v2 - v1, sigma)));
    return 1.0 / collision_volume_factor(gpp, model);
}

NormalSpeeds normal_speeds(double kappa, const RestitutionModel& model) {
    switch (model.kind()) {
        case RestitutionModel::Kind::Elastic:
            return {kappa, kappa, 1.0};
        case RestitutionModel::Kind::Constant: {
            double m = model.constant_mu(), g = 2 * kappa / (1 + m);
            return {m * g, g, (1 + m) / (2 * m)};
        }
        case RestitutionModel::Kind::Curve:
            break;
    }
    auto f = [&](double g) { return 0.5 * (g + model.restituted_speed(g)) - kappa; };
    auto root = boost::math::tools::bisect(f, kappa, 2 * kappa, boost::math::tools::eps_tolerance<double>(50));
    double g = 0.5 * (root.first + root.second);
    double hp = model.restituted_speed_derivative(g);
    return {model.restituted_speed(g), g, 0.5 * (1 + 1 / hp)};
}

double kernel_peak(double eps) {
    double c = 105.0 / (32.0 * std::numbers::pi * eps * eps * eps);
    return c * c;
}

double kernel_profile(const Vec3& dr, const Vec3& dv, double eps) {
    double sr = norm2(dr) / (eps * eps);
    if (sr >= 1.0) return 0.0;
    double sv = norm2(dv) / (eps * eps);
    if (sv >= 1.0) return 0.0;
    return kernel_peak(eps) * (1.0 - sr) * (1.0 - sr) * (1.0 - sv) * (1.0 - sv);
}

double kernel_eval(const Kernel& k, const Vec3& r, const Vec3& v) {
    return kernel_profile(r - k.center.r, v - k.center.v, k.eps);
}

Vec3 sample_bump_offset(double eps, Rng& rng) {
    for (;;) {
        double s = std::cbrt(rng.uniform());
        if (rng.uniform() < profile_1d(s)) return eps * s * rng.unit_vector();
    }
}

PhasePoint sample_kernel(const Kernel& k, Rng& rng) {
    return {k.center.r + sample_bump_offset(k.eps, rng), k.center.v + sample_bump_offset(k.eps, rng)};
}

}  // namespace enskog
