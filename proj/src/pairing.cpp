#include <algorithm>
#include <cmath>

#include "enskog/errors.hpp"
#include "enskog/fields.hpp"
#include "enskog/quadrature.hpp"
#include "enskog/rng.hpp"

namespace enskog {

namespace {

// integral of phi.transport along the free path starting at r at time t0 (exact: piecewise polynomial)
double transport_along(const TestFunction& phi, const Vec3& r, const Vec3& v, double t0, double t1) {
    const Vec3 origin = r - t0 * v;
    t0 = std::max(t0, phi.t_min());
    t1 = std::min(t1, phi.t_max());
    if (t1 <= t0) return 0.0;
    std::vector<double> cuts{t0, t1};
    phi.knots_along(origin + t0 * v, v, t0, t1, cuts);
    std::sort(cuts.begin(), cuts.end());
    static const GaussRule g = gauss_legendre(16);
    double sum = 0;
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
        double lo = cuts[c], hi = cuts[c + 1];
        if (hi <= lo) continue;
        double half = 0.5 * (hi - lo), mid = 0.5 * (lo + hi);
        for (std::size_t n = 0; n < g.nodes.size(); ++n) {
            double s = mid + half * g.nodes[n];
            sum += half * g.weights[n] * phi.transport(origin + s * v, v, s);
        }
    }
    return sum;
}

Integral pairing(const FieldEvaluator& fe, Field which, const TestFunction& phi, bool transport) {
    const auto& cfg = fe.config();
    if (phi.terms().empty()) return {};
    if (phi.t_max() > cfg.horizon) throw InvalidArgument("test function must vanish beyond the horizon");
    auto along = [&](const Vec3& r, const Vec3& v, double t0, double t1) {
        return transport ? transport_along(phi, r, v, t0, t1) : phi.integrate_path(r, v, t0, t1);
    };
    const auto& T = fe.partition();
    const int n = static_cast<int>(fe.initial().size());
    std::vector<int> cells;
    for (int k = 0; k + 1 < static_cast<int>(T.size()); ++k)
        if (T[k + 1] > phi.t_min() && T[k] < phi.t_max()) cells.push_back(k);
    auto acc = mc_mean(cfg.pair_samples, stream_seed(cfg.seed, 0x9a1c), [&](Rng& rng) {
        double total = 0;
        for (int k : cells) {
            const double t0 = T[k], t1 = T[k + 1];
            for (int i = 0; i < n; ++i) {
                int j = fe.partner(k, i);
                if (j < 0) {
                    PhasePoint x = fe.sample_law(k, i, rng);
                    total += along(x.r, x.v, t0, t1);
                    continue;
                }
                auto ps = fe.sample_pair(k, i, j, rng);
                if (!std::isfinite(ps.contact)) {
                    total += along(ps.x.r, ps.x.v, t0, t1);
                    continue;
                }
                double tc = t0 + ps.contact;
                Vec3 rc = ps.x.r + ps.contact * ps.x.v;
                total += along(rc, ps.x_post, tc, t1);
                double pre_end = which == Field::F1 ? tc : fe.window(k, i)->end;
                total += along(ps.x.r, ps.x.v, t0, pre_end);
            }
        }
        return total;
    });
    return {acc.mean(), acc.std_error()};
}

}  // namespace

Integral weak_pairing(const FieldEvaluator& fe, Field which, const TestFunction& phi) {
    return pairing(fe, which, phi, false);
}

Integral weak_pairing_transport(const FieldEvaluator& fe, Field which, const TestFunction& phi) {
    return pairing(fe, which, phi, true);
}

}  // namespace enskog
