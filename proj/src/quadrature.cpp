#include "enskog/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "enskog/errors.hpp"

namespace enskog {

namespace {

GaussRule compute_gauss_legendre(int n) {
    GaussRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            double pn = n == 0 ? 1 : p1;
            double pnm1 = n == 1 ? 1 : p0;
            dp = n * (x * pn - pnm1) / (x * x - 1);
            double dx = pn / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        double w = 2.0 / ((1 - x * x) * dp * dp);
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    return rule;
}

}  // namespace

GaussRule gauss_legendre(int n) {
    if (n < 1) throw InvalidArgument("Gauss rule needs at least one node");
    static std::mutex guard;
    static std::map<int, GaussRule> cache;
    std::lock_guard<std::mutex> lock(guard);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, compute_gauss_legendre(n)).first;
    return it->second;
}

void orthonormal_frame(const Vec3& axis, Vec3& e1, Vec3& e2) {
    Vec3 helper = std::abs(axis.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    e1 = unit(cross(axis, helper));
    e2 = cross(axis, e1);
}

SphereQuadrature SphereQuadrature::product(int n_theta, int n_phi) {
    return cap({0, 0, 1}, -1.0, n_theta, n_phi);
}

SphereQuadrature SphereQuadrature::cap(const Vec3& axis, double cos_min, int n_theta, int n_phi) {
    SphereQuadrature q;
    q.order = std::min(2 * n_theta - 1, n_phi - 1);
    cos_min = std::max(cos_min, -1.0);
    if (cos_min >= 1.0) return q;
    Vec3 z = unit(axis), e1, e2;
    orthonormal_frame(z, e1, e2);
    GaussRule g = gauss_legendre(n_theta);
    double half = 0.5 * (1.0 - cos_min), mid = 0.5 * (1.0 + cos_min);
    double dphi = 2.0 * std::numbers::pi / n_phi;
    q.nodes.reserve(static_cast<std::size_t>(n_theta) * n_phi);
    for (int i = 0; i < n_theta; ++i) {
        double c = mid + half * g.nodes[i];
        double s = std::sqrt(std::max(0.0, 1.0 - c * c));
        for (int j = 0; j < n_phi; ++j) {
            double phi = (j + 0.5) * dphi;
            Vec3 sigma = c * z + s * std::cos(phi) * e1 + s * std::sin(phi) * e2;
            q.nodes.push_back({sigma, half * g.weights[i] * dphi});
        }
    }
    return q;
}

double SphereQuadrature::weight_sum() const {
    double s = 0;
    for (auto& n : nodes) s += n.weight;
    return s;
}

VelocityQuadrature VelocityQuadrature::box(const Vec3& lo, const Vec3& hi, int n) {
    VelocityQuadrature q;
    q.lo = lo;
    q.hi = hi;
    GaussRule g = gauss_legendre(n);
    Vec3 half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    q.nodes.reserve(static_cast<std::size_t>(n) * n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                Vec3 v{mid.x + half.x * g.nodes[i], mid.y + half.y * g.nodes[j], mid.z + half.z * g.nodes[k]};
                q.nodes.push_back({v, half.x * half.y * half.z * g.weights[i] * g.weights[j] * g.weights[k]});
            }
    return q;
}

VelocityQuadrature VelocityQuadrature::ball(const Vec3& centre, double radius, int n_radial, int n_theta, int n_phi) {
    VelocityQuadrature q;
    q.lo = centre - Vec3{radius, radius, radius};
    q.hi = centre + Vec3{radius, radius, radius};
    GaussRule g = gauss_legendre(n_radial);
    SphereQuadrature dirs = SphereQuadrature::product(n_theta, n_phi);
    for (int i = 0; i < n_radial; ++i) {
        double rho = 0.5 * radius * (1.0 + g.nodes[i]);
        double w = 0.5 * radius * g.weights[i] * rho * rho;
        for (auto& d : dirs.nodes) q.nodes.push_back({centre + rho * d.sigma, w * d.weight});
    }
    return q;
}

}  // namespace enskog
