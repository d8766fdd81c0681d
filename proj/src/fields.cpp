#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

#include "enskog/errors.hpp"
#include "enskog/fields.hpp"
#include "enskog/quadrature.hpp"
#include "enskog/rng.hpp"

namespace enskog {

void InitialDensity::validate() const {
    if (!(a > 0)) throw InvalidArgument("diameter must be positive");
    if (kernels.empty()) throw InvalidArgument("initial density needs at least one kernel");
    for (auto& k : kernels)
        if (!(k.eps > 0)) throw InvalidArgument("kernel width must be positive");
    if (auto* torus = std::get_if<Torus>(&domain))
        for (int k = 0; k < 3; ++k)
            if (!(torus->lengths[k] > 2 * a)) throw InvalidArgument("box length must exceed 2a");
    for (std::size_t i = 0; i < kernels.size(); ++i)
        for (std::size_t j = i + 1; j < kernels.size(); ++j) {
            double d = norm(displacement(domain, kernels[i].center.r, kernels[j].center.r));
            if (d <= a + kernels[i].eps + kernels[j].eps) throw ValidationError("support separation violated");
        }
}

SystemState InitialDensity::centres(const RestitutionModel& model) const {
    SystemState s;
    for (auto& k : kernels) {
        s.positions.push_back(k.center.r);
        s.velocities.push_back(k.center.v);
    }
    s.a = a;
    s.domain = domain;
    s.model = model;
    return s;
}

double eval_f0(const InitialDensity& d, const Vec3& r, const Vec3& v) {
    double sum = 0;
    for (auto& k : d.kernels) sum += kernel_eval(k, k.center.r + displacement(d.domain, k.center.r, r), v);
    return sum;
}

namespace {

constexpr double kPi = std::numbers::pi;

// Law of one sphere at the start of an interval: a kernel, a streamed law, or the scattered
// marginal of a colliding pair.
struct Law;
using LawPtr = std::shared_ptr<const Law>;

struct Law {
    enum class Kind { Kernel, Stream, Gain } kind = Kind::Kernel;
    Kernel kernel;
    LawPtr own, partner;
    double dt = 0;
    double lo = 0, hi = 0;  // contact window of own and partner, measured from their common time
    SupportBall support;
    std::uint64_t id = 0;
};

SupportBall streamed(SupportBall b, double dt) {
    b.r_center += dt * b.v_center;
    b.shear += dt;
    return b;
}

struct Reach {
    Vec3 centre;
    double radius;
};

Reach reach(const SupportBall& b, double tau) {
    return {b.r_center + tau * b.v_center, b.r_radius + std::abs(b.shear + tau) * b.v_radius};
}

double ball_volume(double r) { return 4.0 / 3.0 * kPi * r * r * r; }

}  // namespace

struct FieldEvaluator::Impl {
    InitialDensity initial;
    RestitutionModel model;
    FieldConfig cfg;
    EventLog events;
    std::vector<double> partition;
    std::vector<std::vector<LawPtr>> laws;  // [k][i] at T_k, k = 0..K
    std::vector<std::vector<int>> partners;
    std::vector<std::vector<int>> window_of;
    std::vector<CollisionWindow> windows;
    std::vector<std::vector<std::vector<PhasePoint>>> partner_draws;  // [k][i], law of the partner at T_k
    std::uint64_t next_id = 1;

    double a() const { return initial.a; }
    const Domain& domain() const { return initial.domain; }
    Vec3 disp(const Vec3& from, const Vec3& to) const { return displacement(initial.domain, from, to); }

    long samples_at(int level) const {
        if (level > cfg.max_depth) throw BudgetExceeded("nested gain density exceeds max_depth");
        long n = cfg.gain_samples;
        for (int l = 0; l < level; ++l) n /= 32;
        return std::max(64L, n);
    }

    // deterministic per query, independent across queries
    std::uint64_t point_seed(std::uint64_t id, const Vec3& r, const Vec3& v) const {
        std::uint64_t h = stream_seed(cfg.seed, id);
        for (double x : {r.x, r.y, r.z, v.x, v.y, v.z}) h = stream_seed(h, std::bit_cast<std::uint64_t>(x));
        return h;
    }

    bool inside(const SupportBall& b, const Vec3& r, const Vec3& v) const {
        if (norm2(v - b.v_center) > b.v_radius * b.v_radius) return false;
        return norm2(disp(b.position_centre(v), r)) <= b.r_radius * b.r_radius;
    }

    double density(const Law& law, const Vec3& r, const Vec3& v, int level) const {
        switch (law.kind) {
            case Law::Kind::Kernel:
                return kernel_eval(law.kernel, law.kernel.center.r + disp(law.kernel.center.r, r), v);
            case Law::Kind::Stream:
                return density(*law.own, r - law.dt * v, v, level);
            case Law::Kind::Gain:
                if (!inside(law.support, r, v)) return 0.0;
                return gain_density(law, r, v, level);
        }
        return 0.0;
    }

    // Scattered density of own after contact with partner. Variables: momentum transfer k = v1'' - v
    // (uniform over own's velocity ball), the partner's transverse velocity (uniform over a disc), and
    // the contact time (Gauss over the interval where both position factors can be nonzero).
    double gain_density(const Law& law, const Vec3& r, const Vec3& v, int level, double* std_error = nullptr) const {
        const double tau = law.dt;
        const double s_lo = std::max(0.0, law.lo), s_hi = std::min(law.hi, tau);
        if (s_hi <= s_lo) return 0.0;
        const long n = samples_at(level);
        const SupportBall& bo = law.own->support;
        const SupportBall& bp = law.partner->support;
        const double a = this->a();
        const Vec3 back = r - tau * v;
        static const GaussRule gl = gauss_legendre(10);
        Rng rng(point_seed(law.id, r, v));
        double sum = 0, sum_sq = 0;
        for (long s = 0; s < n; ++s) {
            Vec3 k = bo.v_center - v + rng.in_ball(bo.v_radius);
            double ud = rng.uniform(), uphi = rng.uniform();
            double kappa = norm(k);
            if (kappa == 0) continue;
            Vec3 sigma = k / kappa;
            auto ns = normal_speeds(kappa, model);
            // v2' = v + w + (u - kappa) sigma, w orthogonal to sigma, inside the partner's velocity ball
            Vec3 base = v + (ns.u - kappa) * sigma;
            Vec3 off = bp.v_center - base;
            double along = dot(off, sigma);
            double rho2 = bp.v_radius * bp.v_radius - along * along;
            if (rho2 <= 0) continue;
            Vec3 e1, e2;
            orthonormal_frame(sigma, e1, e2);
            double rad = std::sqrt(rho2 * ud), ang = 2 * kPi * uphi;
            Vec3 w = (off - along * sigma) + rad * std::cos(ang) * e1 + rad * std::sin(ang) * e2;
            Vec3 v1p = v + k, v2p = base + w;
            // positions at the common start: own = back - s k, partner = back + a sigma - s (v2' - v)
            double lo = s_lo, hi = s_hi;
            if (!clip_line(back, -1.0 * k, bo.position_centre(v1p), bo.r_radius, lo, hi)) continue;
            Vec3 p2 = back + a * sigma;
            Vec3 d2 = v - v2p;
            if (!clip_line(p2, d2, bp.position_centre(v2p), bp.r_radius, lo, hi)) continue;
            double half = 0.5 * (hi - lo), mid = 0.5 * (lo + hi), line = 0;
            for (std::size_t q = 0; q < gl.nodes.size(); ++q) {
                double sc = mid + half * gl.nodes[q];
                double f1 = density(*law.own, back - sc * k, v1p, level + 1);
                if (f1 == 0) continue;
                line += gl.weights[q] * f1 * density(*law.partner, p2 + sc * d2, v2p, level + 1);
            }
            if (line == 0) continue;
            double chi = model.is_elastic() ? 1.0 : 1.0 / collision_volume_factor(ns.g, model);
            double term = a * a * ns.u * chi / (kappa * kappa * ns.dkappa_du) * kPi * rho2 * half * line;
            sum += term;
            sum_sq += term * term;
        }
        const double vol = ball_volume(bo.v_radius), mean = sum / static_cast<double>(n);
        if (std_error) {
            double var = std::max(0.0, sum_sq / static_cast<double>(n) - mean * mean);
            *std_error = vol * std::sqrt(var / static_cast<double>(n));
        }
        return vol * mean;
    }

    // shrink [lo, hi] to the s where |p + s d - c| <= R; false when empty
    bool clip_line(const Vec3& p, const Vec3& d, const Vec3& c, double R, double& lo, double& hi) const {
        Vec3 x = disp(c, p);
        double A = norm2(d), B = dot(x, d), C = norm2(x) - R * R;
        if (A == 0) return C <= 0;
        double disc = B * B - A * C;
        if (disc <= 0) return false;
        double sq = std::sqrt(disc);
        lo = std::max(lo, (-B - sq) / A);
        hi = std::min(hi, (-B + sq) / A);
        return hi > lo;
    }

    PhasePoint sample(const Law& law, Rng& rng) const {
        switch (law.kind) {
            case Law::Kind::Kernel:
                return sample_kernel(law.kernel, rng);
            case Law::Kind::Stream: {
                PhasePoint p = sample(*law.own, rng);
                p.r += law.dt * p.v;
                return p;
            }
            case Law::Kind::Gain: {
                auto ps = draw_pair(*law.own, *law.partner, rng);
                if (!std::isfinite(ps.contact)) return {ps.x.r + law.dt * ps.x.v, ps.x.v};
                return {ps.x.r + ps.contact * ps.x.v + (law.dt - ps.contact) * ps.x_post, ps.x_post};
            }
        }
        return {};
    }

    FieldEvaluator::PairSample draw_pair(const Law& own, const Law& partner, Rng& rng) const {
        FieldEvaluator::PairSample ps;
        ps.x = sample(own, rng);
        ps.y = sample(partner, rng);
        ps.contact = INFINITY;
        ps.x_post = ps.x.v;
        ps.y_post = ps.y.v;
        auto tc = time_to_collision(ps.x, ps.y, a(), domain());
        if (!tc) return ps;
        ps.contact = *tc;
        Vec3 sigma = unit(disp(ps.y.r + *tc * ps.y.v, ps.x.r + *tc * ps.x.v));
        auto post = collide_inelastic(ps.x.v, ps.y.v, sigma, model);
        ps.x_post = post.first;
        ps.y_post = post.second;
        return ps;
    }

    LawPtr make(Law law) {
        law.id = next_id++;
        return std::make_shared<const Law>(std::move(law));
    }

    void build();
    void find_window(int k, int i, int j, double span);
    void check_isolation(int k, double span);
};

namespace {

// first tau in [t0, t1] with g(tau) <= 0, by scan and bisection; NaN if none
template <class G>
double first_root(G g, double t0, double t1, int steps) {
    if (g(t0) <= 0) return t0;
    double h = (t1 - t0) / steps, prev = t0;
    for (int n = 1; n <= steps; ++n) {
        double t = n == steps ? t1 : t0 + n * h;
        if (g(t) <= 0) {
            double lo = prev, hi = t;
            for (int it = 0; it < 100 && hi - lo > 1e-14 * (1 + std::abs(hi)); ++it) {
                double mid = 0.5 * (lo + hi);
                (g(mid) <= 0 ? hi : lo) = mid;
            }
            return hi;
        }
        prev = t;
    }
    return NAN;
}

constexpr int kScanSteps = 4000;

}  // namespace

void FieldEvaluator::Impl::find_window(int k, int i, int j, double span) {
    const SupportBall& bi = laws[k][i]->support;
    const SupportBall& bj = laws[k][j]->support;
    auto gap = [&](double tau, double sign) {
        Reach ri = reach(bi, tau), rj = reach(bj, tau);
        return norm(disp(ri.centre, rj.centre)) - (a() + sign * (ri.radius + rj.radius));
    };
    if (gap(0.0, 1.0) <= 0) throw ValidationError("colliding supports are in contact at the start of an interval");
    double lo = first_root([&](double t) { return gap(t, 1.0); }, 0.0, span, kScanSteps);
    double hi = first_root([&](double t) { return gap(t, -1.0); }, 0.0, span, kScanSteps);
    if (std::isnan(lo) || std::isnan(hi))
        throw ValidationError("collision window does not close inside its interval at this epsilon");
    CollisionWindow w{k, std::min(i, j), std::max(i, j), partition[k] + lo, partition[k] + hi};
    window_of[k][i] = window_of[k][j] = static_cast<int>(windows.size());
    windows.push_back(w);
}

void FieldEvaluator::Impl::check_isolation(int k, double span) {
    // pieces of each sphere's support over the interval: (ball, time the ball refers to, from, to)
    struct Piece {
        int sphere;
        SupportBall ball;
        double ref, from, to;
        bool post;
    };
    std::vector<Piece> pieces;
    const int n = static_cast<int>(initial.size());
    for (int i = 0; i < n; ++i) {
        int w = window_of[k][i];
        if (w < 0) {
            pieces.push_back({i, laws[k][i]->support, 0.0, 0.0, span, false});
            continue;
        }
        double lo = windows[w].start - partition[k], hi = windows[w].end - partition[k];
        pieces.push_back({i, laws[k][i]->support, 0.0, 0.0, hi, false});
        pieces.push_back({i, laws[k + 1][i]->support, span, lo, span, true});
    }
    for (std::size_t p = 0; p < pieces.size(); ++p)
        for (std::size_t q = p + 1; q < pieces.size(); ++q) {
            const Piece &A = pieces[p], &B = pieces[q];
            if (A.sphere == B.sphere || partners[k][A.sphere] == B.sphere) continue;
            double t0 = std::max(A.from, B.from), t1 = std::min(A.to, B.to);
            if (t1 < t0) continue;
            double h = (t1 - t0) / kScanSteps;
            for (int s = 0; s <= kScanSteps; ++s) {
                double t = t0 + s * h;
                Reach ra = reach(A.ball, t - A.ref), rb = reach(B.ball, t - B.ref);
                if (norm(disp(ra.centre, rb.centre)) <= a() + ra.radius + rb.radius)
                    throw ValidationError("partition does not isolate collisions at this epsilon");
            }
        }
}

void FieldEvaluator::Impl::build() {
    initial.validate();
    if (!(cfg.horizon > 0)) throw InvalidArgument("horizon must be positive");
    if (cfg.gain_samples < 1 || cfg.survival_samples < 1 || cfg.support_samples < 2 || cfg.pair_samples < 1)
        throw InvalidArgument("sample budgets must be positive");
    events = event_log(initial.centres(model), cfg.horizon, cfg.dynamics);
    partition = cfg.partition.empty() ? partition_times(events, cfg.horizon) : cfg.partition;
    if (partition.size() < 2 || partition.front() != 0.0)
        throw InvalidArgument("partition must start at 0 and contain an end point");
    for (std::size_t k = 1; k < partition.size(); ++k)
        if (!(partition[k] > partition[k - 1])) throw InvalidArgument("partition must be increasing");

    const int n = static_cast<int>(initial.size());
    const int K = static_cast<int>(partition.size()) - 1;
    laws.assign(K + 1, std::vector<LawPtr>(n));
    partners.assign(K, std::vector<int>(n, -1));
    window_of.assign(K, std::vector<int>(n, -1));
    partner_draws.assign(K, std::vector<std::vector<PhasePoint>>(n));
    for (int i = 0; i < n; ++i) {
        Law law;
        law.kind = Law::Kind::Kernel;
        law.kernel = initial.kernels[i];
        law.support = {law.kernel.center.r, law.kernel.eps, law.kernel.center.v, law.kernel.eps, 0.0};
        laws[0][i] = make(law);
    }
    for (const auto& e : events) {
        if (e.time > partition.back()) break;
        auto cell = std::upper_bound(partition.begin(), partition.end(), e.time) - partition.begin() - 1;
        if (e.time == partition[cell]) throw ValidationError("collision at a partition time");
        if (partners[cell][e.i] >= 0 || partners[cell][e.j] >= 0)
            throw ValidationError("partition allows two collisions of one sphere in an interval");
        partners[cell][e.i] = e.j;
        partners[cell][e.j] = e.i;
    }
    for (int k = 0; k < K; ++k) {
        const double span = partition[k + 1] - partition[k];
        for (int i = 0; i < n; ++i) {
            int j = partners[k][i];
            if (j < 0) {
                Law law;
                law.kind = Law::Kind::Stream;
                law.own = laws[k][i];
                law.dt = span;
                law.support = streamed(law.own->support, span);
                laws[k + 1][i] = make(law);
                continue;
            }
            if (j < i) continue;
            find_window(k, i, j, span);
            const auto& w = windows[window_of[k][i]];
            double lo = w.start - partition[k], hi = w.end - partition[k];
            // support of the scattered laws from sampled contacts
            Rng rng(stream_seed(cfg.seed ^ 0x9e3779b97f4a7c15ULL, static_cast<std::uint64_t>(k * n + i)));
            std::vector<PairSample> draws(cfg.support_samples);
            double s_ref = 0;
            long hits = 0;
            for (auto& d : draws) {
                d = draw_pair(*laws[k][i], *laws[k][j], rng);
                if (std::isfinite(d.contact)) {
                    s_ref += d.contact;
                    ++hits;
                }
            }
            if (hits == 0) throw ValidationError("no sampled contact inside the collision window");
            s_ref /= hits;
            for (int side = 0; side < 2; ++side) {
                Vec3 pc, vc;
                std::vector<std::pair<Vec3, Vec3>> pts;
                for (auto& d : draws) {
                    if (!std::isfinite(d.contact)) continue;
                    const PhasePoint& x = side == 0 ? d.x : d.y;
                    Vec3 vp = side == 0 ? d.x_post : d.y_post;
                    Vec3 p = x.r + d.contact * x.v + (s_ref - d.contact) * vp;
                    pts.push_back({p, vp});
                    pc += p;
                    vc += vp;
                }
                pc = pc / static_cast<double>(pts.size());
                vc = vc / static_cast<double>(pts.size());
                double rr = 0, rv = 0;
                for (auto& [p, vp] : pts) {
                    rr = std::max(rr, norm(disp(pc, p)));
                    rv = std::max(rv, norm(vp - vc));
                }
                Law law;
                law.kind = Law::Kind::Gain;
                law.own = laws[k][side == 0 ? i : j];
                law.partner = laws[k][side == 0 ? j : i];
                law.dt = span;
                law.lo = lo;
                law.hi = hi;
                double inflate = cfg.support_inflation;
                law.support = {pc + (span - s_ref) * vc, inflate * rr + 1e-12, vc, inflate * rv + 1e-12,
                               span - s_ref};
                laws[k + 1][side == 0 ? i : j] = make(law);
            }
            for (int side = 0; side < 2; ++side) {
                int own = side == 0 ? i : j, other = side == 0 ? j : i;
                Rng draw_rng(stream_seed(cfg.seed ^ 0x51a7e5ULL, static_cast<std::uint64_t>(k * n + own)));
                auto& ys = partner_draws[k][own];
                ys.resize(cfg.survival_samples);
                for (auto& y : ys) y = sample(*laws[k][other], draw_rng);
            }
        }
        check_isolation(k, span);
    }
}

FieldEvaluator::FieldEvaluator(InitialDensity initial, RestitutionModel model, FieldConfig cfg) {
    auto impl = std::make_shared<Impl>();
    impl->initial = std::move(initial);
    impl->model = std::move(model);
    impl->cfg = std::move(cfg);
    impl->build();
    impl_ = impl;
}

const InitialDensity& FieldEvaluator::initial() const { return impl_->initial; }
const RestitutionModel& FieldEvaluator::model() const { return impl_->model; }
const FieldConfig& FieldEvaluator::config() const { return impl_->cfg; }
const std::vector<double>& FieldEvaluator::partition() const { return impl_->partition; }
const EventLog& FieldEvaluator::centre_events() const { return impl_->events; }
const std::vector<CollisionWindow>& FieldEvaluator::windows() const { return impl_->windows; }

int FieldEvaluator::interval_of(double t) const {
    if (t < 0) throw InvalidArgument("time must be nonnegative");
    const auto& p = impl_->partition;
    int k = static_cast<int>(std::lower_bound(p.begin(), p.end(), t) - p.begin()) - 1;
    return std::clamp(k, 0, static_cast<int>(p.size()) - 2);
}

int FieldEvaluator::partner(int interval, int i) const { return impl_->partners.at(interval).at(i); }

const CollisionWindow* FieldEvaluator::window(int interval, int i) const {
    int w = impl_->window_of.at(interval).at(i);
    return w < 0 ? nullptr : &impl_->windows[w];
}

double FieldEvaluator::free_term(int i, const Vec3& r, const Vec3& v, double t) const {
    int k = interval_of(t);
    double tau = t - impl_->partition[k];
    return impl_->density(*impl_->laws[k][i], r - tau * v, v, 0);
}

double FieldEvaluator::gain_term(int i, const Vec3& r, const Vec3& v, double t) const {
    return gain_estimate(i, r, v, t).value;
}

Integral FieldEvaluator::gain_estimate(int i, const Vec3& r, const Vec3& v, double t) const {
    int k = interval_of(t);
    if (impl_->partners[k][i] < 0) return {};
    Law law = *impl_->laws[k + 1][i];
    double tau = t - impl_->partition[k];
    law.support = streamed(law.support, tau - law.dt);
    law.dt = tau;
    if (!impl_->inside(law.support, r, v)) return {};
    Integral out;
    out.value = impl_->gain_density(law, r, v, 0, &out.error);
    return out;
}

double FieldEvaluator::survival(int i, const Vec3& r, const Vec3& v, double t) const {
    int k = interval_of(t);
    if (impl_->partners[k][i] < 0) return 1.0;
    double tau = t - impl_->partition[k];
    const Vec3 back = r - tau * v;
    const double a2 = impl_->a() * impl_->a();
    const auto& ys = impl_->partner_draws[k][i];
    long hit = 0;
    for (const auto& y : ys) {
        Vec3 d0 = impl_->disp(back, y.r);
        Vec3 w = y.v - v;
        double ww = norm2(w);
        double s = ww > 0 ? std::clamp(-dot(d0, w) / ww, 0.0, tau) : 0.0;
        if (norm2(d0 + s * w) <= a2) ++hit;
    }
    return 1.0 - static_cast<double>(hit) / static_cast<double>(ys.size());
}

double FieldEvaluator::f_eps(const Vec3& r, const Vec3& v, double t) const {
    int k = interval_of(t);
    double sum = 0;
    for (int i = 0; i < static_cast<int>(impl_->initial.size()); ++i) {
        const CollisionWindow* w = window(k, i);
        if (!w || t < w->end) sum += free_term(i, r, v, t);
        if (w && t > w->start) sum += gain_term(i, r, v, t);
    }
    return sum;
}

double FieldEvaluator::F1(const Vec3& r, const Vec3& v, double t) const {
    int k = interval_of(t);
    double sum = 0;
    for (int i = 0; i < static_cast<int>(impl_->initial.size()); ++i) {
        const CollisionWindow* w = window(k, i);
        double b = free_term(i, r, v, t);
        if (!w) {
            sum += b;
            continue;
        }
        if (b != 0) sum += b * survival(i, r, v, t);
        if (t > w->start) sum += gain_term(i, r, v, t);
    }
    return sum;
}

double FieldEvaluator::F2(const PhasePoint& x1, const PhasePoint& x2, double t) const {
    const Impl& m = *impl_;
    if (norm(m.disp(x1.r, x2.r)) < m.a()) return 0.0;
    int k = interval_of(t);
    double tau = t - m.partition[k];
    const int n = static_cast<int>(m.initial.size());
    auto marginal = [&](int i, const PhasePoint& x) {
        const CollisionWindow* w = window(k, i);
        double b = free_term(i, x.r, x.v, t);
        if (!w) return b;
        double s = b != 0 ? b * survival(i, x.r, x.v, t) : 0.0;
        return s + (t > w->start ? gain_term(i, x.r, x.v, t) : 0.0);
    };
    std::vector<double> m1(n), m2(n);
    for (int i = 0; i < n; ++i) {
        m1[i] = marginal(i, x1);
        m2[i] = marginal(i, x2);
    }
    double sum = 0;
    for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q) {
            if (p == q) continue;
            if (m.partners[k][p] != q) {
                sum += m1[p] * m2[q];
                continue;
            }
            SystemState s;
            s.positions = {x1.r, x2.r};
            s.velocities = {x1.v, x2.v};
            s.a = m.a();
            s.domain = m.domain();
            s.model = m.model;
            try {
                SystemState back = evolve(s, -tau, m.cfg.dynamics);
                double f = m.density(*m.laws[k][p], back.positions[0], back.velocities[0], 0);
                if (f != 0) f *= m.density(*m.laws[k][q], back.positions[1], back.velocities[1], 0);
                sum += f * std::exp(back.log_jacobian);
            } catch (const ExcludedTrajectory&) {
                // measure-zero configurations
            }
        }
    return sum;
}

ComponentDensity FieldEvaluator::components(Field which, double t) const {
    int k = interval_of(t);
    ComponentDensity out;
    auto self = *this;
    for (int i = 0; i < static_cast<int>(impl_->initial.size()); ++i) {
        const CollisionWindow* w = window(k, i);
        if (!w) {
            out.push_back({[self, i, t](const Vec3& r, const Vec3& v) { return self.free_term(i, r, v, t); },
                           free_support(i, t)});
            continue;
        }
        if (which == Field::f_eps) {
            if (t < w->end)
                out.push_back({[self, i, t](const Vec3& r, const Vec3& v) { return self.free_term(i, r, v, t); },
                               free_support(i, t)});
        } else {
            out.push_back({[self, i, t](const Vec3& r, const Vec3& v) {
                               double b = self.free_term(i, r, v, t);
                               return b != 0 ? b * self.survival(i, r, v, t) : 0.0;
                           },
                           free_support(i, t)});
        }
        SupportBall g;
        if (t > w->start && gain_support(i, t, g))
            out.push_back({[self, i, t](const Vec3& r, const Vec3& v) { return self.gain_term(i, r, v, t); }, g});
    }
    return out;
}

SupportBall FieldEvaluator::free_support(int i, double t) const {
    int k = interval_of(t);
    return streamed(impl_->laws[k][i]->support, t - impl_->partition[k]);
}

bool FieldEvaluator::gain_support(int i, double t, SupportBall& out) const {
    int k = interval_of(t);
    if (impl_->partners[k][i] < 0) return false;
    out = streamed(impl_->laws[k + 1][i]->support, t - impl_->partition[k + 1]);
    return true;
}

PhasePoint FieldEvaluator::sample_law(int k, int i, Rng& rng) const { return impl_->sample(*impl_->laws.at(k).at(i), rng); }

FieldEvaluator::PairSample FieldEvaluator::sample_pair(int k, int i, int j, Rng& rng) const {
    return impl_->draw_pair(*impl_->laws.at(k).at(i), *impl_->laws.at(k).at(j), rng);
}

double eval_f_eps(const FieldEvaluator& fe, const Vec3& r, const Vec3& v, double t) { return fe.f_eps(r, v, t); }
double eval_F1(const FieldEvaluator& fe, const Vec3& r, const Vec3& v, double t) { return fe.F1(r, v, t); }
double eval_F2(const FieldEvaluator& fe, const PhasePoint& x1, const PhasePoint& x2, double t) {
    return fe.F2(x1, x2, t);
}

}  // namespace enskog
