#include "enskog/collision.hpp"

#include <cmath>

#include "enskog/errors.hpp"

namespace enskog {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Cap of directions sigma with centre + a sigma inside the ball (c, rho), viewed from centre.
SphereQuadrature cap_towards(const Vec3& centre, const Vec3& c, double rho, double a, int nt, int np) {
    if (!std::isfinite(rho)) return SphereQuadrature::product(nt, np);
    Vec3 d = c - centre;
    double dist = norm(d);
    if (dist <= 1e-14 * a) {
        if (rho >= a) return SphereQuadrature::product(nt, np);
        return {};
    }
    double cmin = (dist * dist + a * a - rho * rho) / (2 * a * dist);
    if (cmin > 1.0) return {};
    return SphereQuadrature::cap(d / dist, cmin, nt, np);
}

struct Parts {
    double gain = 0, loss = 0;
};

double point_value(const ComponentDensity& f, const Vec3& r, const Vec3& v) {
    double s = 0;
    for (auto& c : f)
        if (c.support.contains(r, v)) s += c.eval(r, v);
    return s;
}

Parts components_core(const ComponentDensity& f, const Vec3& r, const Vec3& v, double a, const RestitutionModel& model,
                      const QuadratureConfig& q, const PointFactor& zeta) {
    Parts out;
    double a2 = a * a;
    double fx = point_value(f, r, v);
    if (fx != 0) {
        if (zeta) fx *= zeta(r, v);
        double loss = 0;
        for (auto& c : f) {
            if (!c.loss_partner) continue;
            auto vq = VelocityQuadrature::ball(c.support.v_center, c.support.v_radius, q.n_radial, q.n_ball_theta,
                                               q.n_ball_phi);
            for (auto& vn : vq.nodes) {
                auto sq = cap_towards(r, c.support.position_centre(vn.v), c.support.r_radius, a, q.n_theta, q.n_phi);
                // partner sits at r - a sigma, so flip the cap
                for (auto& sn : sq.nodes) {
                    Vec3 sigma = -sn.sigma;
                    double u = dot(vn.v - v, sigma);
                    if (u <= 0) continue;
                    Vec3 rp = r - a * sigma;
                    double val = c.eval(rp, vn.v);
                    if (val == 0) continue;
                    if (zeta) val *= zeta(rp, vn.v);
                    loss += vn.weight * sn.weight * u * val;
                }
            }
        }
        out.loss = a2 * fx * loss;
    }

    double gain = 0;
    for (auto& c1 : f) {
        const SupportBall& s1 = c1.support;
        if (std::isfinite(s1.r_radius) && norm(r - s1.r_center) > s1.position_reach()) continue;
        for (auto& c2 : f) {
            const SupportBall& s2 = c2.support;
            auto sq = cap_towards(r, s2.r_center, s2.position_reach(), a, q.n_theta, q.n_phi);
            if (sq.nodes.empty()) continue;
            Vec3 pc = s1.v_center + s2.v_center - v;
            double pr = s1.v_radius + s2.v_radius;
            auto vq = VelocityQuadrature::box(pc - Vec3{pr, pr, pr}, pc + Vec3{pr, pr, pr}, q.n_velocity);
            for (auto& vn : vq.nodes) {
                if (norm(vn.v - pc) > pr) continue;
                for (auto& sn : sq.nodes) {
                    double u = dot(vn.v - v, sn.sigma);
                    if (u <= 0) continue;
                    auto pre = pre_collision(v, vn.v, sn.sigma, model);
                    if (!s1.contains(r, pre.v1)) continue;
                    Vec3 rp = r + a * sn.sigma;
                    if (!s2.contains(rp, pre.v2)) continue;
                    double f1 = c1.eval(r, pre.v1);
                    if (f1 == 0) continue;
                    double f2 = c2.eval(rp, pre.v2);
                    if (f2 == 0) continue;
                    if (zeta) f1 *= zeta(r, pre.v1) * zeta(rp, pre.v2);
                    gain += vn.weight * sn.weight * u * pre.weight * f1 * f2;
                }
            }
        }
    }
    out.gain = a2 * gain;
    return out;
}

int first_match(const std::vector<SupportBall>& balls, const Vec3& r, const Vec3& v) {
    for (std::size_t k = 0; k < balls.size(); ++k)
        if (balls[k].contains(r, v)) return static_cast<int>(k);
    return -1;
}

Parts pair_core(const PairDensity& F2, const std::vector<SupportBall>& balls, const Vec3& r, const Vec3& v, double a,
                const RestitutionModel& model, const QuadratureConfig& q) {
    Parts out;
    double loss = 0, gain = 0;
    for (std::size_t k = 0; k < balls.size(); ++k) {
        const SupportBall& s = balls[k];
        auto vq = VelocityQuadrature::ball(s.v_center, s.v_radius, q.n_radial, q.n_ball_theta, q.n_ball_phi);
        for (auto& vn : vq.nodes) {
            auto sq = cap_towards(r, s.position_centre(vn.v), s.r_radius, a, q.n_theta, q.n_phi);
            for (auto& sn : sq.nodes) {
                Vec3 sigma = -sn.sigma;
                double u = dot(vn.v - v, sigma);
                if (u <= 0) continue;
                Vec3 rp = r - a * sigma;
                if (first_match(balls, rp, vn.v) != static_cast<int>(k)) continue;
                loss += vn.weight * sn.weight * u * F2({r, v}, {rp, vn.v});
            }
        }
    }
    for (std::size_t k1 = 0; k1 < balls.size(); ++k1) {
        const SupportBall& s1 = balls[k1];
        for (std::size_t k2 = 0; k2 < balls.size(); ++k2) {
            const SupportBall& s2 = balls[k2];
            auto sq = cap_towards(r, s2.r_center, s2.position_reach(), a, q.n_theta, q.n_phi);
            if (sq.nodes.empty()) continue;
            Vec3 pc = s1.v_center + s2.v_center - v;
            double pr = s1.v_radius + s2.v_radius;
            auto vq = VelocityQuadrature::box(pc - Vec3{pr, pr, pr}, pc + Vec3{pr, pr, pr}, q.n_velocity);
            for (auto& vn : vq.nodes) {
                if (norm(vn.v - pc) > pr) continue;
                for (auto& sn : sq.nodes) {
                    double u = dot(vn.v - v, sn.sigma);
                    if (u <= 0) continue;
                    auto pre = pre_collision(v, vn.v, sn.sigma, model);
                    Vec3 rp = r + a * sn.sigma;
                    if (first_match(balls, r, pre.v1) != static_cast<int>(k1)) continue;
                    if (first_match(balls, rp, pre.v2) != static_cast<int>(k2)) continue;
                    gain += vn.weight * sn.weight * u * pre.weight * F2({r, pre.v1}, {rp, pre.v2});
                }
            }
        }
    }
    out.loss = a * a * loss;
    out.gain = a * a * gain;
    return out;
}

template <class Core>
GainLoss with_error(const QuadratureConfig& quad, Core core) {
    Parts fine = core(quad);
    GainLoss out;
    out.gain.value = fine.gain;
    out.loss.value = fine.loss;
    if (quad.estimate_error) {
        Parts coarse = core(quad.reduced());
        out.gain.error = std::abs(fine.gain - coarse.gain);
        out.loss.error = std::abs(fine.loss - coarse.loss);
    }
    return out;
}

Integral difference(const GainLoss& p) { return {p.gain.value - p.loss.value, p.gain.error + p.loss.error}; }

}  // namespace

PreCollision pre_collision(const Vec3& v, const Vec3& v2, const Vec3& sigma, const RestitutionModel& model) {
    if (model.is_elastic()) {
        auto p = collide_elastic(v, v2, sigma);
        return {p.first, p.second, 1.0};
    }
    auto p = inverse_collision(v, v2, sigma, model);
    return {p.first, p.second, chi_factor(v, v2, sigma, model)};
}

bool SupportBall::contains(const Vec3& r, const Vec3& v) const {
    if (norm2(v - v_center) > v_radius * v_radius) return false;
    if (!std::isfinite(r_radius)) return true;
    return norm2(r - position_centre(v)) <= r_radius * r_radius;
}

QuadratureConfig QuadratureConfig::reduced() const {
    QuadratureConfig q = *this;
    auto shrink = [](int n) { return std::max(2, (2 * n + 2) / 3); };
    q.n_theta = shrink(n_theta);
    q.n_phi = shrink(n_phi);
    q.n_velocity = shrink(n_velocity);
    q.n_radial = shrink(n_radial);
    q.n_ball_theta = shrink(n_ball_theta);
    q.n_ball_phi = shrink(n_ball_phi);
    q.estimate_error = false;
    return q;
}

GainLoss q_be_parts(const ComponentDensity& f, const Vec3& r, const Vec3& v, double a, const RestitutionModel& model,
                    const QuadratureConfig& quad, const PointFactor& zeta) {
    return with_error(quad, [&](const QuadratureConfig& q) { return components_core(f, r, v, a, model, q, zeta); });
}

Integral q_be(const ComponentDensity& f, const Vec3& r, const Vec3& v, double a, const QuadratureConfig& quad) {
    return difference(q_be_parts(f, r, v, a, RestitutionModel::elastic(), quad));
}

Integral q_be_inelastic(const ComponentDensity& f, const Vec3& r, const Vec3& v, double a,
                        const RestitutionModel& model, const QuadratureConfig& quad) {
    return difference(q_be_parts(f, r, v, a, model, quad));
}

Integral bbgky_rhs(const PairDensity& F2, const std::vector<SupportBall>& partner_supports, const Vec3& r,
                   const Vec3& v, double a, const RestitutionModel& model, const QuadratureConfig& quad) {
    return difference(
        with_error(quad, [&](const QuadratureConfig& q) { return pair_core(F2, partner_supports, r, v, a, model, q); }));
}

Integral q_ge2(const ComponentDensity& f, const PointFactor& zeta, const Vec3& r, const Vec3& v, double a,
               const RestitutionModel& model, const QuadratureConfig& quad) {
    if (!zeta) throw InvalidArgument("q_ge2 needs a zeta evaluator");
    return difference(q_be_parts(f, r, v, a, model, quad, zeta));
}

}  // namespace enskog
