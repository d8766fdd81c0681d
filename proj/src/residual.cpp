#include "enskog/residual.hpp"

#include "characteristic.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>

#include "enskog/errors.hpp"
#include "enskog/rng.hpp"

namespace enskog {

namespace {

using GK = boost::math::quadrature::gauss_kronrod<double, 15>;

std::vector<int> cells_in(const FieldEvaluator& fe, double lo, double hi) {
    const auto& T = fe.partition();
    std::vector<int> cells;
    for (int k = 0; k + 1 < static_cast<int>(T.size()); ++k)
        if (T[k + 1] > lo && T[k] < hi) cells.push_back(k);
    return cells;
}

double peak_scale(const InitialDensity& d) {
    double s = 0;
    for (auto& k : d.kernels) s = std::max(s, kernel_peak(k.eps));
    return s;
}

// whether Q along the characteristic can be nonzero at time s
bool active(const ComponentDensity& comps, const Vec3& x, double a) {
    bool inside = false, shell = false;
    for (auto& c : comps) {
        double reach = c.support.position_reach();
        double d = norm(x - c.support.r_center);
        inside = inside || d <= reach;
        shell = shell || std::abs(d - a) <= reach;
    }
    return inside && shell;
}

// maximal runs of active screening cells on [t0, t], padded by one cell
std::vector<std::pair<double, double>> active_spans(const detail::ComponentsAt& comps, const ResidualProbe& p,
                                                    double t0, double a, int m) {
    std::vector<char> on(m + 1);
    auto at = [&](int g) { return t0 + (p.t - t0) * g / m; };
    for (int g = 0; g <= m; ++g) {
        double s = at(g);
        on[g] = active(comps(s), p.r - (p.t - s) * p.v, a);
    }
    std::vector<std::pair<double, double>> spans;
    int g = 0;
    while (g <= m) {
        if (!on[g]) {
            ++g;
            continue;
        }
        int first = g;
        while (g <= m && on[g]) ++g;
        double lo = at(std::max(first - 1, 0)), hi = at(std::min(g, m));
        if (!spans.empty() && spans.back().second >= lo)
            spans.back().second = hi;
        else
            spans.emplace_back(lo, hi);
    }
    return spans;
}

}  // namespace

namespace detail {

Integral characteristic_quadrature(const ComponentsAt& comps, const FactorAt& zeta, const ResidualProbe& p, double t0,
                                   double a, const RestitutionModel& model, const MildConfig& cfg) {
    auto spans = active_spans(comps, p, t0, a, cfg.screen_points);
    auto integrate = [&](const QuadratureConfig& q) {
        Integral out;
        for (auto [lo, hi] : spans) {
            double err = 0;
            double val = GK::integrate(
                [&](double s) {
                    auto parts = q_be_parts(comps(s), p.r - (p.t - s) * p.v, p.v, a, model, q,
                                            zeta ? zeta(s) : PointFactor{});
                    return parts.gain.value - parts.loss.value;
                },
                lo, hi, static_cast<unsigned>(cfg.max_depth), cfg.rel_tol, &err);
            out.value += val;
            out.error += err;
        }
        return out;
    };
    QuadratureConfig fine = cfg.quad;
    fine.estimate_error = false;
    Integral out = integrate(fine);
    if (cfg.quad.estimate_error) out.error += std::abs(out.value - integrate(fine.reduced()).value);
    return out;
}

Integral flux_loss(const FieldEvaluator& fe, const ResidualProbe& p, double t0, const MildConfig& cfg,
                   const EntryWeight& weight) {
    const auto& T = fe.partition();
    const double a2 = fe.initial().a * fe.initial().a;
    Integral out;
    for (int k : cells_in(fe, t0, p.t)) {
        const double lim = std::min(T[k + 1], p.t) - T[k];
        for (int j = 0; j < static_cast<int>(fe.initial().size()); ++j) {
            int q = fe.partner(k, j);
            if (q < 0) continue;
            auto acc = mc_mean(cfg.flux_samples, stream_seed(cfg.seed, 1000 * k + j), [&](Rng& rng) {
                auto ps = fe.sample_pair(k, j, q, rng);
                if (!(ps.contact < lim)) return 0.0;
                Vec3 xc = p.r - (p.t - T[k] - ps.contact) * p.v;
                Vec3 zc = ps.x.r + ps.contact * ps.x.v;
                Vec3 d0 = displacement(fe.initial().domain, xc, zc);
                Vec3 w = ps.x_post - p.v;
                double A = norm2(w), B = dot(d0, w), C = norm2(d0) - a2;
                if (C <= 0 || B >= 0 || A == 0) return 0.0;
                double disc = B * B - A * C;
                if (disc < 0) return 0.0;
                double se = ps.contact + (-B - std::sqrt(disc)) / A;
                double te = T[k] + se;
                if (se >= lim || te <= t0) return 0.0;
                return weight(te, {zc + (se - ps.contact) * ps.x_post, ps.x_post});
            });
            out.value += acc.mean();
            out.error += acc.std_error();
        }
    }
    return out;
}

}  // namespace detail

namespace {

// f_eps at time s split into components; losses against scattered components are left to flux_loss
ComponentDensity mild_components(const FieldEvaluator& fe, double s) {
    int k = fe.interval_of(s);
    ComponentDensity out;
    for (int i = 0; i < static_cast<int>(fe.initial().size()); ++i) {
        const CollisionWindow* w = fe.window(k, i);
        if (!w || s < w->end)
            out.push_back({[fe, i, s](const Vec3& r, const Vec3& v) { return fe.free_term(i, r, v, s); },
                           fe.free_support(i, s), true});
        SupportBall g;
        if (w && s > w->start && fe.gain_support(i, s, g))
            out.push_back({[fe, i, s](const Vec3& r, const Vec3& v) { return fe.gain_term(i, r, v, s); }, g, false});
    }
    return out;
}

}  // namespace

Integral weak_residual(const FieldEvaluator& fe, const TestFunction& phi) {
    const auto& cfg = fe.config();
    if (phi.terms().empty()) return {};
    if (phi.t_max() > cfg.horizon) throw InvalidArgument("test function must vanish beyond the horizon");
    const auto& T = fe.partition();
    const int n = static_cast<int>(fe.initial().size());
    auto cells = cells_in(fe, phi.t_min(), phi.t_max());
    // same stream and draw order as the pairings, so the two routes agree draw by draw
    auto acc = mc_mean(cfg.pair_samples, stream_seed(cfg.seed, 0x9a1c), [&](Rng& rng) {
        double total = 0;
        for (int k : cells) {
            for (int i = 0; i < n; ++i) {
                int j = fe.partner(k, i);
                if (j < 0) {
                    fe.sample_law(k, i, rng);
                    continue;
                }
                auto ps = fe.sample_pair(k, i, j, rng);
                if (!std::isfinite(ps.contact)) continue;
                auto ghost = [&](double s) { return phi.value(ps.x.r + (s - T[k]) * ps.x.v, ps.x.v, s); };
                total += ghost(fe.window(k, i)->end) - ghost(T[k] + ps.contact);
            }
        }
        return total;
    });
    return {acc.mean(), acc.std_error()};
}

DirectResidual direct_residual(const FieldEvaluator& fe, const TestFunction& phi, const DirectConfig& cfg) {
    const double t_lo = std::max(0.0, phi.t_min()), t_hi = std::min(fe.config().horizon, phi.t_max());
    DirectResidual out;
    if (phi.terms().empty() || t_hi <= t_lo) return out;
    const int n = static_cast<int>(fe.initial().size());
    const double a = fe.initial().a;
    // proposal: sphere uniform, then with equal odds its free path or its F1 pushforward
    auto proposal = [&](const Vec3& r, const Vec3& v, double t) {
        double q = 0;
        for (int i = 0; i < n; ++i) {
            double b = fe.free_term(i, r, v, t);
            double f1 = b != 0 ? b * fe.survival(i, r, v, t) : 0.0;
            int k = fe.interval_of(t);
            const CollisionWindow* w = fe.window(k, i);
            if (w && t > w->start) f1 += fe.gain_term(i, r, v, t);
            q += 0.5 * (b + f1) / n;
        }
        return q;
    };
    MeanAccumulator tr, col, res;
    Rng rng(cfg.seed);
    const auto& T = fe.partition();
    for (long m = 0; m < cfg.points; ++m) {
        double t = rng.uniform(t_lo, t_hi);
        int k = fe.interval_of(t);
        int i = std::min(static_cast<int>(rng.uniform() * n), n - 1);
        int j = fe.partner(k, i);
        PhasePoint x;
        bool free_path = rng.uniform() < 0.5 || j < 0;
        if (free_path) {
            x = fe.sample_law(k, i, rng);
            x.r = x.r + (t - T[k]) * x.v;
        } else {
            auto ps = fe.sample_pair(k, i, j, rng);
            double tau = t - T[k];
            if (ps.contact < tau)
                x = {ps.x.r + ps.contact * ps.x.v + (tau - ps.contact) * ps.x_post, ps.x_post};
            else
                x = {ps.x.r + tau * ps.x.v, ps.x.v};
        }
        double q = proposal(x.r, x.v, t);
        double ph = phi.value(x.r, x.v, t), tp = phi.transport(x.r, x.v, t);
        double a_tr = 0, a_col = 0;
        if (q > 0 && (ph != 0 || tp != 0)) {
            double w = (t_hi - t_lo) / q;
            a_tr = w * fe.f_eps(x.r, x.v, t) * tp;
            if (ph != 0) {
                auto parts = q_be_parts(fe.components(Field::f_eps, t), x.r, x.v, a, fe.model(), cfg.quad);
                a_col = w * (parts.gain.value - parts.loss.value) * ph;
            }
        }
        tr.add(a_tr);
        col.add(a_col);
        res.add(-a_tr - a_col);
    }
    out.transport = {tr.mean(), tr.std_error()};
    out.collision = {col.mean(), col.std_error()};
    out.residual = {res.mean(), res.std_error()};
    return out;
}

MildResidual mild_residual(const FieldEvaluator& fe, const std::vector<ResidualProbe>& probes, const MildConfig& cfg) {
    MildResidual out;
    out.scale = peak_scale(fe.initial());
    for (auto& p : probes) {
        if (p.t < 0 || p.t > fe.config().horizon) throw InvalidArgument("probe time outside [0, horizon]");
        double lhs = fe.f_eps(p.r, p.v, p.t) - eval_f0(fe.initial(), p.r - p.t * p.v, p.v);
        Integral quad = detail::characteristic_quadrature(
            [&](double s) { return mild_components(fe, s); }, {}, p, 0.0, fe.initial().a, fe.model(), cfg);
        Integral flux = detail::flux_loss(fe, p, 0.0, cfg, [&](double te, const PhasePoint&) {
            return fe.f_eps(p.r - (p.t - te) * p.v, p.v, te);
        });
        double value = (lhs - quad.value + flux.value) / out.scale;
        double error = (quad.error + 2 * flux.error) / out.scale;
        out.values.push_back(value);
        out.errors.push_back(error);
        out.sup = std::max(out.sup, std::abs(value));
        out.error = std::max(out.error, error);
    }
    return out;
}

std::vector<ResidualProbe> centre_probes(const InitialDensity& d, const std::vector<double>& times, int per_sphere) {
    std::vector<ResidualProbe> out;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    auto spiral = [&](int m, int count) {
        double z = 1.0 - (2.0 * m + 1.0) / count;
        double rho = std::sqrt(1.0 - z * z);
        return Vec3{rho * std::cos(golden * m), rho * std::sin(golden * m), z};
    };
    for (auto& k : d.kernels)
        for (double t : times)
            for (int m = 0; m < per_sphere; ++m) {
                Vec3 dr, dv;
                if (m > 0) {
                    dr = 0.3 * k.eps * spiral(m, per_sphere);
                    dv = 0.3 * k.eps * spiral(per_sphere - m, per_sphere);
                }
                Vec3 v = k.center.v + dv;
                out.push_back({k.center.r + dr + t * v, v, t});
            }
    return out;
}

bool decays(const std::vector<double>& xs, double ratio) {
    for (std::size_t k = 0; k + 1 < xs.size(); ++k)
        if (!(std::abs(xs[k + 1]) < ratio * std::abs(xs[k]))) return false;
    return true;
}

ScanResult epsilon_scan(const ScanSetup& setup, const std::vector<double>& epsilons) {
    ScanResult out;
    std::vector<std::vector<double>> pairing(setup.phis.size());
    std::vector<double> mild;
    bool have_mild = true;
    for (double eps : epsilons) {
        FieldEvaluator fe = setup.make(eps);
        ResidualReport rep;
        rep.epsilon = eps;
        for (std::size_t f = 0; f < setup.phis.size(); ++f) {
            Integral w = weak_residual(fe, setup.phis[f]);
            rep.pairings.push_back(w);
            pairing[f].push_back(w.value);
            rep.quad_err = std::max(rep.quad_err, w.error);
        }
        auto probes = setup.probes ? setup.probes(fe) : std::vector<ResidualProbe>{};
        if (probes.empty()) {
            have_mild = false;
        } else {
            auto m = mild_residual(fe, probes, setup.mild);
            rep.mild_sup = m.sup;
            rep.mild_error = m.error;
            rep.quad_err = std::max(rep.quad_err, m.error);
            mild.push_back(m.sup);
        }
        out.reports.push_back(rep);
    }
    for (auto& p : pairing) out.pairing_decays.push_back(decays(p, setup.ratio));
    out.mild_decays = have_mild && decays(mild, 1.0);
    return out;
}

}  // namespace enskog
