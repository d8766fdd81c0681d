#pragma once

#include <functional>
#include <vector>

#include "enskog/fields.hpp"

namespace enskog {

// Pairing of f_eps - F1 with the transport derivative of phi. Sampled pair by pair: the difference is
// the ghost of each collided path between its contact and the window end, so the pairing is
// E[phi(ghost at window end) - phi(ghost at contact)].
Integral weak_residual(const FieldEvaluator& fe, const TestFunction& phi);

// Low-resolution direct form: -<f_eps, d_t phi + v.grad phi> - <Q(f_eps, f_eps), phi>, by Monte Carlo
// over (r, v, t) with Q from the collision quadrature. Assumes phi vanishes at t = 0.
struct DirectConfig {
    long points = 2000;
    QuadratureConfig quad{4, 8, 6, 3, 4, 6, false};
    std::uint64_t seed = 0xd1ec;
};
struct DirectResidual {
    Integral transport;  // <f_eps, d_t phi + v.grad phi>
    Integral collision;  // <Q(f_eps, f_eps), phi>
    Integral residual;   // -transport - collision
};
DirectResidual direct_residual(const FieldEvaluator& fe, const TestFunction& phi, const DirectConfig& cfg = {});

struct ResidualProbe {
    Vec3 r, v;
    double t = 0;
};

struct MildConfig {
    QuadratureConfig quad;
    double rel_tol = 1e-3;
    int max_depth = 10;
    int screen_points = 1000;
    long flux_samples = 20000;
    std::uint64_t seed = 0xf1c5;
};

// Residual of the mild form along each probe's characteristic, in units of kernel_peak(eps):
// f_eps(r,v,t) - f0(r - vt, v) - int_0^t Q(f_eps, f_eps)(r - v(t-s), v, s) ds.
// Losses against scattered components are sampled as the flux of their pushforward paths into the
// contact sphere around the characteristic; everything else uses the collision quadrature.
struct MildResidual {
    std::vector<double> values, errors;
    double sup = 0;    // max |value|
    double error = 0;  // max error
    double scale = 1;  // kernel_peak(eps) used for the normalization
};
MildResidual mild_residual(const FieldEvaluator& fe, const std::vector<ResidualProbe>& probes,
                           const MildConfig& cfg = {});

// Probes on the free characteristics of the kernel centres, offset by fractions of eps.
std::vector<ResidualProbe> centre_probes(const InitialDensity& d, const std::vector<double>& times, int per_sphere);

struct ResidualReport {
    double epsilon = 0;
    std::vector<Integral> pairings;  // one per test function
    double mild_sup = 0;
    double mild_error = 0;
    double quad_err = 0;  // largest error estimate of the row
};

struct ScanResult {
    std::vector<ResidualReport> reports;
    std::vector<bool> pairing_decays;  // per test function
    bool mild_decays = false;
};

struct ScanSetup {
    std::function<FieldEvaluator(double eps)> make;
    std::vector<TestFunction> phis;
    // probes for a given evaluator; empty result skips the mild residual
    std::function<std::vector<ResidualProbe>(const FieldEvaluator&)> probes;
    MildConfig mild;
    double ratio = 0.8;
};

ScanResult epsilon_scan(const ScanSetup& setup, const std::vector<double>& epsilons);

// each |x_{k+1}| < ratio |x_k|
bool decays(const std::vector<double>& xs, double ratio);

}  // namespace enskog
