#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "enskog/fields.hpp"
#include "enskog/residual.hpp"

namespace enskog {

// First backward contact time of a free pair with r = r2 - r1, v = v2 - v1: the smallest s >= 0 with
// |r - v s| = a, +inf when there is none. Throws InvalidArgument for |r| < a.
double t_star(const Vec3& r, const Vec3& v, double a);

struct ClusterDynamics {
    double a = 1.0;
    RestitutionModel model;
    DynamicsOptions options;
};

using ClusterFunction = std::function<double(const std::vector<PhasePoint>&)>;

// Cumulant A^{(1+n)}_{-t} of the flow applied to g at x, where x[0..s) is the cluster Y and
// x[s..s+n) are single particles, n <= 2. Sum over partitions of {Y, s+1, .., s+n} with weight
// (-1)^{|P|-1} (|P|-1)!; each block runs backward under its own flow (with its phase-volume factor)
// and a block with overlapping spheres contributes 0.
double cumulant_apply(int n, double t, int s, const ClusterFunction& g, const std::vector<PhasePoint>& x,
                      const ClusterDynamics& dyn);

struct GEConfig {
    InitialDensity initial;  // free space, at most 3 kernels with 2 eps < a
    RestitutionModel model;
    long series_samples = 20000;
    long survival_samples = 2048;  // draws per kernel behind the B- integral
    double zeta_floor = 1e-8;
    FieldConfig fields;  // scattered term and the support balls of the series proposal
    std::uint64_t seed = 0x6e6e;

    void validate() const;
};

struct SeriesEstimate {
    Integral series;      // free term plus the cumulant terms
    Integral direct;      // (1/(N-1)!) int S^{(N)}_{-t} prod f0 on the same draws
    Integral difference;  // series - direct, draw by draw
};

// Generalized Enskog solution for a finite initial density. The series works for N <= 3; the
// two-particle closure (f1, zeta, mild_check) needs N = 2.
class GESolution {
public:
    explicit GESolution(GEConfig cfg);

    const GEConfig& config() const;

    SeriesEstimate series(const Vec3& r, const Vec3& v, double t) const;

    // int over B- of f0: partner states at t whose free backward paths miss (r, v)'s
    double survival_integral(const Vec3& r, const Vec3& v, double t) const;
    // throws SurvivalUnderflow below the floor
    double zeta(const Vec3& r, const Vec3& v, double t) const;
    // f0(r - vt, v) times the B- integral, plus the scattered density from B+
    double f1(const Vec3& r, const Vec3& v, double t) const;
    Integral f1_estimate(const Vec3& r, const Vec3& v, double t) const;
    ComponentDensity components(double t) const;

    // |F1(probe) - F1(r - v(t - t0), v, t0) - int_{t0}^t Q_GE2 ds| per probe, in units of kernel_peak
    MildResidual mild_check(const std::vector<ResidualProbe>& probes, double t0, const MildConfig& cfg = {}) const;

    struct Impl;

private:
    std::shared_ptr<const Impl> impl_;
};

Integral ge_series_f1(const GEConfig& cfg, const Vec3& r, const Vec3& v, double t);
double f1_two_particle(const GEConfig& cfg, const Vec3& r, const Vec3& v, double t);
double zeta(const GEConfig& cfg, const Vec3& r, const Vec3& v, double t);
MildResidual ge_mild_check(const GEConfig& cfg, const std::vector<ResidualProbe>& probes, double t0,
                           const MildConfig& mild = {});

}  // namespace enskog
