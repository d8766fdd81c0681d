#pragma once

#include <functional>

#include "enskog/residual.hpp"

// Integrals along a probe's free characteristic shared by the mild residual and the generalized
// Enskog check.
namespace enskog::detail {

using ComponentsAt = std::function<ComponentDensity(double s)>;
using FactorAt = std::function<PointFactor(double s)>;

// int_{t0}^{t} (gain - loss)(r - v(t - s), v, s) ds, with GK15 over the spans where Q can be nonzero.
// Error: GK estimate plus the change under the reduced quadrature.
Integral characteristic_quadrature(const ComponentsAt& comps, const FactorAt& zeta, const ResidualProbe& p, double t0,
                                   double a, const RestitutionModel& model, const MildConfig& cfg);

// Loss against the scattered laws: sum over spheres with a partner of E[weight(te, z)] where z is the
// scattered path's state when it enters the contact sphere around the characteristic at te in (t0, t).
using EntryWeight = std::function<double(double te, const PhasePoint& z)>;
Integral flux_loss(const FieldEvaluator& fe, const ResidualProbe& p, double t0, const MildConfig& cfg,
                   const EntryWeight& weight);

}  // namespace enskog::detail
