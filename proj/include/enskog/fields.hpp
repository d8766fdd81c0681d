#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "enskog/collision.hpp"
#include "enskog/dynamics.hpp"

namespace enskog {

struct InitialDensity {
    std::vector<Kernel> kernels;
    double a = 1.0;
    Domain domain = FreeSpace{};

    std::size_t size() const { return kernels.size(); }
    // support separation |q_i - q_j| > a + 2 eps; throws ValidationError
    void validate() const;
    SystemState centres(const RestitutionModel& model) const;
};

double eval_f0(const InitialDensity& d, const Vec3& r, const Vec3& v);

// One coordinate of a test function: 1 on [lo, hi], (1 - s^2)^2 tapers of the given width outside.
struct AxisProfile {
    double lo = 0, hi = 0, taper = 1;
    double value(double x) const;
    double derivative(double x) const;
    std::array<double, 4> knots() const { return {lo - taper, lo, hi, hi + taper}; }
};

// Finite sums of tensor products of axis profiles in (r, v, t).
class TestFunction {
public:
    struct Term {
        double weight = 1;
        std::array<AxisProfile, 3> r, v;
        AxisProfile t;
    };

    static TestFunction bump(const PhasePoint& centre, double t_centre, double r_width, double v_width,
                             double t_width);
    static TestFunction window(const PhasePoint& lo, const PhasePoint& hi, double t_lo, double t_hi, double taper,
                               double t_taper);

    double value(const Vec3& r, const Vec3& v, double t) const;
    Vec3 grad_r(const Vec3& r, const Vec3& v, double t) const;
    double dt(const Vec3& r, const Vec3& v, double t) const;
    double transport(const Vec3& r, const Vec3& v, double t) const { return dt(r, v, t) + dot(v, grad_r(r, v, t)); }

    double t_min() const;
    double t_max() const;
    // times in (t0, t1) where the free path r + v (s - t0) crosses a profile knot
    void knots_along(const Vec3& r, const Vec3& v, double t0, double t1, std::vector<double>& out) const;
    // integral of phi along the free path from t0 to t1 (exact up to rounding for these profiles)
    double integrate_path(const Vec3& r, const Vec3& v, double t0, double t1) const;

    TestFunction operator+(const TestFunction& o) const;
    TestFunction operator*(double c) const;
    const std::vector<Term>& terms() const { return terms_; }

private:
    std::vector<Term> terms_;
};

struct FieldConfig {
    double horizon = 3.0;
    std::vector<double> partition;  // empty: midpoints of the centre trajectory's events
    QuadratureConfig quad;
    long gain_samples = 4096;       // pointwise gain density
    long survival_samples = 16384;  // partner samples behind the B- survival integral
    long support_samples = 4096;    // post-collision samples fixing scattered support balls
    long pair_samples = 100000;     // pairings
    double support_inflation = 1.5;
    int max_depth = 2;
    std::uint64_t seed = 0x5eed;
    DynamicsOptions dynamics;
};

struct CollisionWindow {
    int interval = 0;
    int i = 0, j = 0;
    double start = 0, end = 0;  // absolute times: first possible contact, all pairs certainly collided
};

enum class Field { f_eps, F1 };

class FieldEvaluator {
public:
    FieldEvaluator(InitialDensity initial, RestitutionModel model, FieldConfig cfg = {});

    const InitialDensity& initial() const;
    const RestitutionModel& model() const;
    const FieldConfig& config() const;
    const std::vector<double>& partition() const;
    const EventLog& centre_events() const;
    const std::vector<CollisionWindow>& windows() const;
    int interval_of(double t) const;
    // partner of sphere i in the interval, or -1
    int partner(int interval, int i) const;
    const CollisionWindow* window(int interval, int i) const;

    double f_eps(const Vec3& r, const Vec3& v, double t) const;
    double F1(const Vec3& r, const Vec3& v, double t) const;
    double F2(const PhasePoint& x1, const PhasePoint& x2, double t) const;
    // B- survival of sphere i's free term against its partner (1 without a partner)
    double survival(int i, const Vec3& r, const Vec3& v, double t) const;
    // free-streamed initial-law term of sphere i at time t, without cut or survival
    double free_term(int i, const Vec3& r, const Vec3& v, double t) const;
    // scattered term of sphere i (0 without a partner)
    double gain_term(int i, const Vec3& r, const Vec3& v, double t) const;
    // same with the Monte Carlo standard error
    Integral gain_estimate(int i, const Vec3& r, const Vec3& v, double t) const;

    ComponentDensity components(Field which, double t) const;
    SupportBall free_support(int i, double t) const;
    // empty optional when sphere i has no partner at t
    bool gain_support(int i, double t, SupportBall& out) const;

    // Sphere i's state sampled from its law at the start of interval k.
    PhasePoint sample_law(int k, int i, Rng& rng) const;

    struct PairSample {
        PhasePoint x, y;   // states at the interval start
        double contact;    // relative to the interval start, +inf if none
        Vec3 x_post, y_post;
    };
    PairSample sample_pair(int k, int i, int j, Rng& rng) const;

    struct Impl;

private:
    std::shared_ptr<const Impl> impl_;
};

double eval_f_eps(const FieldEvaluator& fe, const Vec3& r, const Vec3& v, double t);
double eval_F1(const FieldEvaluator& fe, const Vec3& r, const Vec3& v, double t);
double eval_F2(const FieldEvaluator& fe, const PhasePoint& x1, const PhasePoint& x2, double t);

// integral of field * phi over phase space and time, by sampling the laws and integrating along paths
Integral weak_pairing(const FieldEvaluator& fe, Field which, const TestFunction& phi);
// Same integral with the transport derivative of phi in place of phi.
Integral weak_pairing_transport(const FieldEvaluator& fe, Field which, const TestFunction& phi);

}  // namespace enskog
