#pragma once
// Independent reference computations used only by tests.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "enskog/dynamics.hpp"
#include "enskog/vec3.hpp"

namespace oracle {

using enskog::Vec3;

// root of f on [lo, hi] with a sign change, plain halving
inline double bisect(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-14) {
    double flo = f(lo);
    for (int it = 0; it < 400 && hi - lo > tol; ++it) {
        double mid = 0.5 * (lo + hi);
        double fm = f(mid);
        if ((fm > 0) == (flo > 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// smallest t > 0 with |r - v t| = a by scanning then halving; infinity if none in [0, tmax]
inline double backward_contact_scan(const Vec3& r, const Vec3& v, double a, double tmax, int steps = 20000) {
    auto gap = [&](double t) { return enskog::norm(r - t * v) - a; };
    double prev = 0;
    for (int k = 1; k <= steps; ++k) {
        double t = tmax * k / steps;
        if (gap(t) <= 0) return bisect(gap, prev, t, 1e-15);
        prev = t;
    }
    return std::numeric_limits<double>::infinity();
}

// first s >= 0 with |r - v s| = a: halving on [0, closest approach]; infinity when the pair never gets within a
inline double backward_contact_bisect(const Vec3& r, const Vec3& v, double a) {
    double vv = enskog::dot(v, v), vr = enskog::dot(v, r);
    if (vv == 0 || vr <= 0) return std::numeric_limits<double>::infinity();
    double closest = vr / vv;
    auto gap = [&](double s) { return enskog::norm(r - s * v) - a; };
    if (gap(closest) >= 0) return std::numeric_limits<double>::infinity();
    return bisect(gap, 0.0, closest, 1e-16);
}

// determinant of the finite-difference Jacobian of a map R^6 -> R^6
inline double fd_det6(const std::function<Eigen::Matrix<double, 6, 1>(const Eigen::Matrix<double, 6, 1>&)>& map,
                      const Eigen::Matrix<double, 6, 1>& x, double h = 1e-6) {
    Eigen::Matrix<double, 6, 6> jac;
    for (int k = 0; k < 6; ++k) {
        auto xp = x, xm = x;
        xp(k) += h;
        xm(k) -= h;
        jac.col(k) = (map(xp) - map(xm)) / (2 * h);
    }
    return jac.determinant();
}

struct StepState {
    std::vector<Vec3> r, v;
};

// Pair update written on normal components directly: the normal relative speed becomes -mu times itself.
inline void reflect_pair(Vec3& vi, Vec3& vj, const Vec3& n, double mu) {
    double ai = enskog::dot(vi, n), aj = enskog::dot(vj, n);
    double centre = 0.5 * (ai + aj);
    double rel = aj - ai;
    double ai_new = centre + 0.5 * mu * rel;
    double aj_new = centre - 0.5 * mu * rel;
    vi += (ai_new - ai) * n;
    vj += (aj_new - aj) * n;
}

// Small-step integrator: free steps of size dt, contacts located by halving on the pair distance.
inline StepState step_integrate(StepState s, double a, double horizon, double dt, const enskog::Domain& domain,
                                double mu = 1.0, int* collisions = nullptr) {
    const std::size_t n = s.r.size();
    auto dist = [&](const StepState& st, std::size_t i, std::size_t j, double tau) {
        return enskog::norm(enskog::displacement(domain, st.r[i] + tau * st.v[i], st.r[j] + tau * st.v[j]));
    };
    double t = 0;
    while (t < horizon) {
        double step = std::min(dt, horizon - t);
        double first = step;
        int fi = -1, fj = -1;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                if (dist(s, i, j, step) >= a) continue;
                double tau = bisect([&](double x) { return dist(s, i, j, x) - a; }, 0.0, step, 1e-16);
                if (tau < first) {
                    first = tau;
                    fi = static_cast<int>(i);
                    fj = static_cast<int>(j);
                }
            }
        for (std::size_t k = 0; k < n; ++k) s.r[k] = enskog::wrap(domain, s.r[k] + first * s.v[k]);
        t += first;
        if (fi >= 0) {
            Vec3 nrm = enskog::unit(enskog::displacement(domain, s.r[fj], s.r[fi]));
            reflect_pair(s.v[fi], s.v[fj], nrm, mu);
            if (collisions) ++*collisions;
        }
    }
    return s;
}

}  // namespace oracle
