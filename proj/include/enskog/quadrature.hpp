#pragma once

#include <vector>

#include "enskog/vec3.hpp"

namespace enskog {

struct GaussRule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;
};

GaussRule gauss_legendre(int n);

struct SphereNode {
    Vec3 sigma;
    double weight;
};

// Product Gauss-Legendre in cos(theta) times uniform azimuth, optionally restricted to a cap about an axis.
struct SphereQuadrature {
    std::vector<SphereNode> nodes;
    int order = 0;  // exact for spherical polynomials up to this degree (full sphere)

    static SphereQuadrature product(int n_theta, int n_phi);
    // {sigma : (sigma, axis) >= cos_min}; empty when cos_min > 1
    static SphereQuadrature cap(const Vec3& axis, double cos_min, int n_theta, int n_phi);
    double weight_sum() const;
};

struct VelocityNode {
    Vec3 v;
    double weight;
};

struct VelocityQuadrature {
    Vec3 lo, hi;
    std::vector<VelocityNode> nodes;

    // tensor Gauss over an axis-aligned box
    static VelocityQuadrature box(const Vec3& lo, const Vec3& hi, int n);
    // radial Gauss times product sphere rule over a ball
    static VelocityQuadrature ball(const Vec3& centre, double radius, int n_radial, int n_theta, int n_phi);
};

// orthonormal pair completing a unit axis
void orthonormal_frame(const Vec3& axis, Vec3& e1, Vec3& e2);

}  // namespace enskog
