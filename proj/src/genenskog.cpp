#include "enskog/genenskog.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>

#include "characteristic.hpp"
#include "enskog/errors.hpp"
#include "enskog/quadrature.hpp"
#include "enskog/rng.hpp"

namespace enskog {

double t_star(const Vec3& r, const Vec3& v, double a) {
    const double r2 = norm2(r), c = r2 - a * a;
    if (c < 0) throw InvalidArgument("t_star needs |r| >= a");
    const double v2 = norm2(v), vr = dot(v, r);
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (v2 == 0 || vr < 0) return inf;
    double disc = vr * vr - v2 * c;  // v2 (a^2 - r^2 + (v,r)^2 / v^2)
    if (disc < 0) return inf;
    if (c == 0) return 0.0;
    // (v,r)/v^2 - sqrt(disc)/v^2 without the cancellation
    return c / (vr + std::sqrt(disc));
}

namespace {

// restricted growth strings: label of the block of each element
std::vector<std::vector<int>> set_partitions(int m) {
    std::vector<std::vector<int>> out;
    std::vector<int> labels(m, 0);
    auto rec = [&](auto& self, int e, int blocks) -> void {
        if (e == m) {
            out.push_back(labels);
            return;
        }
        for (int b = 0; b <= blocks; ++b) {
            labels[e] = b;
            self(self, e + 1, std::max(blocks, b + 1));
        }
    };
    if (m > 0) rec(rec, 1, 1);
    return out;
}

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

double ball_volume(double r) { return 4.0 / 3.0 * std::numbers::pi * r * r * r; }

std::atomic<std::uint64_t> next_solution_id{1};

// S_{-t} on the block idx; false when the block overlaps
bool run_back(const std::vector<int>& idx, const std::vector<PhasePoint>& x, double t, const ClusterDynamics& dyn,
              std::vector<PhasePoint>& back, double& factor) {
    if (idx.size() == 1) {
        const PhasePoint& p = x[idx[0]];
        back[idx[0]] = {p.r - t * p.v, p.v};
        return true;
    }
    SystemState st;
    st.a = dyn.a;
    st.model = dyn.model;
    for (std::size_t p = 0; p < idx.size(); ++p) {
        for (std::size_t q = 0; q < p; ++q)
            if (norm2(x[idx[p]].r - x[idx[q]].r) < dyn.a * dyn.a) return false;
        st.positions.push_back(x[idx[p]].r);
        st.velocities.push_back(x[idx[p]].v);
    }
    st = evolve(st, -t, dyn.options);
    for (std::size_t p = 0; p < idx.size(); ++p) back[idx[p]] = st.phase(p);
    factor *= std::exp(st.log_jacobian);
    return true;
}

// Backward path of one sphere over [0, t]: segment m starts at backward time tau[m] at pos[m] and
// moves with physical velocity vel[m] (position pos[m] - (s - tau[m]) vel[m]).
struct BackPath {
    std::vector<double> tau;
    std::vector<Vec3> pos, vel;

    PhasePoint at(double s) const {
        std::size_t m = std::upper_bound(tau.begin(), tau.end(), s) - tau.begin() - 1;
        return {pos[m] - (s - tau[m]) * vel[m], vel[m]};
    }

    // first backward contact of x's free path with this path before t; NaN if none or overlapping
    double first_contact(const PhasePoint& x, double t, double a) const {
        for (std::size_t m = 0; m < tau.size(); ++m) {
            double end = m + 1 < tau.size() ? tau[m + 1] : t;
            Vec3 d = x.r - tau[m] * x.v - pos[m];
            if (norm2(d) < a * a) return std::nan("");
            double s = t_star(d, x.v - vel[m], a);
            if (tau[m] + s < end) return tau[m] + s;
        }
        return std::nan("");
    }
};

BackPath free_path(const PhasePoint& x) { return {{0.0}, {x.r}, {x.v}}; }

// first backward contact of two piecewise paths before t; NaN if none or overlapping
double first_contact(const BackPath& p, const BackPath& q, double t, double a) {
    std::vector<double> cuts = p.tau;
    cuts.insert(cuts.end(), q.tau.begin(), q.tau.end());
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    for (std::size_t m = 0; m < cuts.size(); ++m) {
        double end = m + 1 < cuts.size() ? cuts[m + 1] : t;
        PhasePoint x = p.at(cuts[m]), y = q.at(cuts[m]);
        Vec3 d = x.r - y.r;
        if (norm2(d) < a * a) return std::nan("");
        double s = t_star(d, x.v - y.v, a);
        if (cuts[m] + s < end) return cuts[m] + s;
    }
    return std::nan("");
}

// paths of every sphere of the cluster under its own backward flow; empty when it overlaps
std::vector<BackPath> cluster_paths(const std::vector<PhasePoint>& x, double t, const ClusterDynamics& dyn) {
    for (std::size_t p = 0; p < x.size(); ++p)
        for (std::size_t q = 0; q < p; ++q)
            if (norm2(x[p].r - x[q].r) < dyn.a * dyn.a) return {};
    SystemState st;
    st.a = dyn.a;
    st.model = dyn.model;
    for (auto& p : x) {
        st.positions.push_back(p.r);
        st.velocities.push_back(p.v);
    }
    std::vector<BackPath> out;
    for (auto& p : x) out.push_back(free_path(p));
    EventLog log;
    try {
        evolve(st, -t, dyn.options, &log);
    } catch (const ExcludedTrajectory&) {
        return {};
    }
    for (const auto& e : log) {
        double s = -e.time;
        for (int side = 0; side < 2; ++side) {
            BackPath& path = out[side == 0 ? e.i : e.j];
            PhasePoint here = path.at(s);
            path.tau.push_back(s);
            path.pos.push_back(here.r);
            path.vel.push_back(side == 0 ? e.vi_post : e.vj_post);
        }
    }
    return out;
}

std::size_t pick(Rng& rng, std::size_t n) {
    return std::min(static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)), n - 1);
}

// Proposal for one more sphere given the ones already placed: half uniform on the support balls,
// half through a contact on the backward path of a placed sphere. Contacts use the momentum transfer
// k = (own pre-collision velocity) - (own velocity), the partner's transverse velocity w and the
// backward contact time, so dx = a^2 u / (|k|^2 d|k|/du) dk dw ds.
class Proposal {
public:
    Proposal(const std::vector<SupportBall>& balls, const std::vector<Kernel>& kernels,
             const std::vector<PhasePoint>& placed, double t, const ClusterDynamics& dyn)
        : balls_(balls), kernels_(kernels), t_(t), dyn_(dyn) {
        // pre-collision velocities come from the kernels or, after earlier collisions, the support balls
        for (auto& k : kernels) sources_.push_back({k.center.v, k.eps, &k});
        for (auto& b : balls) {
            bool seen = false;
            for (auto& o : sources_) seen = seen || (norm2(o.v - b.v_center) <= 1e-24 && o.radius == b.v_radius);
            if (!seen) sources_.push_back({b.v_center, b.v_radius, nullptr});
        }
        // balls that are a streamed kernel are drawn from the kernel profile
        for (auto& b : balls) {
            const Kernel* shape = nullptr;
            for (auto& k : kernels)
                if (norm2(b.r_center - (k.center.r + t * k.center.v)) <= 1e-24 && norm2(b.v_center - k.center.v) <= 1e-24 &&
                    b.r_radius == k.eps && b.v_radius == k.eps && b.shear == t)
                    shape = &k;
            shapes_.push_back(shape);
        }
        for (auto& p : placed) paths_.push_back(free_path(p));
        if (placed.size() > 1)
            for (auto& path : cluster_paths(placed, t, dyn))
                if (path.tau.size() > 1) paths_.push_back(path);
    }

    // false when the draw fails
    bool sample(Rng& rng, PhasePoint& x) const {
        if (rng.uniform() < 0.5) {
            std::size_t i = pick(rng, balls_.size());
            if (shapes_[i]) {
                PhasePoint z = sample_kernel(*shapes_[i], rng);
                x = {z.r + t_ * z.v, z.v};
                return true;
            }
            const auto& b = balls_[i];
            Vec3 v = b.v_center + rng.in_ball(b.v_radius);
            x = {b.position_centre(v) + rng.in_ball(b.r_radius), v};
            return true;
        }
        const BackPath& path = paths_[pick(rng, paths_.size())];
        double s;
        PhasePoint at;
        if (!draw_contact(rng, path, s, at)) return false;
        x = {at.r + s * at.v, at.v};
        // keep only draws whose first backward contact is the sampled one
        double back = path.first_contact(x, t_, dyn_.a);
        return std::abs(back - s) <= 1e-9 * (1 + t_);
    }

    // A sphere leaving a contact with a placed path and a companion from a kernel, run forward together
    // from the contact to t. Covers partners that collide again after the contact.
    bool sample_chain(Rng& rng, PhasePoint& fresh, PhasePoint& companion) const {
        const BackPath& path = paths_[pick(rng, paths_.size())];
        double s;
        PhasePoint at;
        if (!draw_contact(rng, path, s, at)) return false;
        PhasePoint z = sample_kernel(kernels_[pick(rng, kernels_.size())], rng);
        SystemState st;
        st.a = dyn_.a;
        st.model = dyn_.model;
        st.positions = {at.r, z.r + (t_ - s) * z.v};
        st.velocities = {at.v, z.v};
        if (norm2(st.positions[0] - st.positions[1]) < dyn_.a * dyn_.a) return false;
        st = evolve(st, s, dyn_.options);
        fresh = st.phase(0);
        companion = st.phase(1);
        auto paths = cluster_paths({fresh, companion}, t_, dyn_);
        if (paths.empty()) return false;
        double back = first_contact(paths[0], path, t_, dyn_.a);
        return std::abs(back - s) <= 1e-9 * (1 + t_);
    }

    double chain_density(const PhasePoint& fresh, const PhasePoint& companion) const {
        auto paths = cluster_paths({fresh, companion}, t_, dyn_);
        if (paths.empty()) return 0.0;
        double sum = 0;
        for (auto& path : paths_) {
            double s = first_contact(paths[0], path, t_, dyn_.a);
            if (std::isnan(s)) continue;
            std::vector<PhasePoint> back(2);
            double factor = 1;
            if (!run_back({0, 1}, {fresh, companion}, s, dyn_, back, factor)) continue;
            double comp = 0;
            Vec3 z = back[1].r - (t_ - s) * back[1].v;
            for (auto& k : kernels_) comp += kernel_eval(k, z, back[1].v);
            sum += factor * comp / static_cast<double>(kernels_.size()) *
                   raw_density(path, s, {back[0].r + s * back[0].v, back[0].v});
        }
        return sum / static_cast<double>(paths_.size());
    }

    double density(const PhasePoint& x) const {
        double balls = 0;
        for (std::size_t i = 0; i < balls_.size(); ++i) {
            if (shapes_[i])
                balls += kernel_eval(*shapes_[i], x.r - t_ * x.v, x.v);
            else if (balls_[i].contains(x.r, x.v))
                balls += 1.0 / (ball_volume(balls_[i].r_radius) * ball_volume(balls_[i].v_radius));
        }
        double contacts = 0;
        for (auto& path : paths_) contacts += contact_density(path, x);
        return 0.5 * balls / static_cast<double>(balls_.size()) + 0.5 * contacts / static_cast<double>(paths_.size());
    }

private:
    const std::vector<SupportBall>& balls_;
    const std::vector<Kernel>& kernels_;
    std::vector<const Kernel*> shapes_;  // per ball, the kernel it streams or null
    struct Source {
        Vec3 v;
        double radius;
        const Kernel* kernel;  // null for support balls
    };
    std::vector<Source> sources_;
    double t_;
    ClusterDynamics dyn_;
    std::vector<BackPath> paths_;

    // post-contact state of a new sphere touching the path at backward time s
    bool draw_contact(Rng& rng, const BackPath& path, double& s, PhasePoint& at) const {
        const Source& so = sources_[pick(rng, sources_.size())];
        Vec3 own_pre = so.v + rng.in_ball(so.radius);
        if (!so.kernel || rng.uniform() < 0.5) {
            s = rng.uniform(0.0, t_);
        } else {
            auto spans = landing_times(path, own_pre, *so.kernel);
            double len = 0;
            for (auto [lo, hi] : spans) len += hi - lo;
            if (len <= 0) return false;
            double u = rng.uniform(0.0, len);
            s = spans.back().second;
            for (auto [lo, hi] : spans) {
                if (u <= hi - lo) {
                    s = lo + u;
                    break;
                }
                u -= hi - lo;
            }
        }
        PhasePoint own = path.at(s);
        Vec3 k = own_pre - own.v;
        double kappa = norm(k);
        if (kappa == 0) return false;
        Vec3 sigma = k / kappa;
        auto ns = normal_speeds(kappa, dyn_.model);
        const Source& sp = sources_[pick(rng, sources_.size())];
        Vec3 base = own.v + (ns.u - kappa) * sigma;
        Vec3 off = sp.v - base;
        double along = dot(off, sigma), rho2 = sp.radius * sp.radius - along * along;
        if (rho2 <= 0) return false;
        Vec3 e1, e2;
        orthonormal_frame(sigma, e1, e2);
        double rad = std::sqrt(rho2 * rng.uniform()), ang = 2 * std::numbers::pi * rng.uniform();
        Vec3 partner_pre = base + (off - along * sigma) + rad * std::cos(ang) * e1 + rad * std::sin(ang) * e2;
        at = {own.r + dyn_.a * sigma, k + partner_pre};  // momentum balance
        return true;
    }

    // contact times at which the own sphere, streamed freely back from the contact with velocity own_pre,
    // starts inside kernel k's position ball
    std::vector<std::pair<double, double>> landing_times(const BackPath& path, const Vec3& own_pre,
                                                         const Kernel& k) const {
        std::vector<std::pair<double, double>> out;
        for (std::size_t m = 0; m < path.tau.size(); ++m) {
            double lo = path.tau[m], hi = m + 1 < path.tau.size() ? path.tau[m + 1] : t_;
            Vec3 p0 = path.pos[m] + path.tau[m] * path.vel[m] - t_ * own_pre - k.center.r;
            Vec3 d = own_pre - path.vel[m];
            double A = norm2(d), B = dot(p0, d), C = norm2(p0) - k.eps * k.eps;
            if (A == 0) {
                if (C < 0) out.emplace_back(lo, hi);
                continue;
            }
            double disc = B * B - A * C;
            if (disc <= 0) continue;
            double sq = std::sqrt(disc);
            lo = std::max(lo, (-B - sq) / A);
            hi = std::min(hi, (-B + sq) / A);
            if (hi > lo) out.emplace_back(lo, hi);
        }
        return out;
    }

    double contact_density(const BackPath& path, const PhasePoint& x) const {
        double s = path.first_contact(x, t_, dyn_.a);
        return std::isnan(s) ? 0.0 : raw_density(path, s, x);
    }

    // density of draw_contact's state at the contact, streamed freely to t, for contact time s
    double raw_density(const BackPath& path, double s, const PhasePoint& x) const {
        const double a = dyn_.a;
        PhasePoint own = path.at(s);
        Vec3 sigma = unit(x.r - s * x.v - own.r);
        double u = dot(x.v - own.v, sigma);
        if (u <= 0) return 0.0;
        auto pre = inverse_collision(own.v, x.v, sigma, dyn_.model);
        Vec3 k = pre.first - own.v;
        double kappa = norm(k);
        auto ns = normal_speeds(kappa, dyn_.model);
        const double ns_count = static_cast<double>(sources_.size());
        double pk = 0, pw = 0;
        Vec3 base = own.v + (ns.u - kappa) * sigma;
        for (auto& so : sources_) {
            const double r2 = so.radius * so.radius;
            if (norm2(pre.first - so.v) < r2) {
                double ps = 1 / t_;
                if (so.kernel) {
                    double len = 0, hit = 0;
                    for (auto [lo, hi] : landing_times(path, pre.first, *so.kernel)) {
                        len += hi - lo;
                        if (s >= lo && s <= hi) hit = 1;
                    }
                    ps = 0.5 / t_ + (len > 0 ? 0.5 * hit / len : 0.0);
                }
                pk += ps / (ns_count * ball_volume(so.radius));
            }
            double along = dot(so.v - base, sigma), rho2 = r2 - along * along;
            if (rho2 > 0 && norm2(pre.second - so.v) < r2) pw += 1.0 / (ns_count * std::numbers::pi * rho2);
        }
        return pk * pw * kappa * kappa * ns.dkappa_du / (a * a * u);
    }
};

}  // namespace

double cumulant_apply(int n, double t, int s, const ClusterFunction& g, const std::vector<PhasePoint>& x,
                      const ClusterDynamics& dyn) {
    if (n < 0 || n > 2) throw InvalidArgument("unsupported cumulant order");
    if (s < 1 || x.size() != static_cast<std::size_t>(s + n))
        throw InvalidArgument("cluster size does not match the phase points");
    double total = 0;
    std::vector<PhasePoint> back(x.size());
    for (const auto& labels : set_partitions(n + 1)) {
        const int blocks = 1 + *std::max_element(labels.begin(), labels.end());
        double factor = 1;
        bool zero = false;
        for (int b = 0; b < blocks && !zero; ++b) {
            std::vector<int> idx;
            for (int e = 0; e <= n; ++e) {
                if (labels[e] != b) continue;
                if (e == 0)
                    for (int i = 0; i < s; ++i) idx.push_back(i);
                else
                    idx.push_back(s + e - 1);
            }
            zero = !run_back(idx, x, t, dyn, back, factor);
        }
        if (zero) continue;
        double weight = ((blocks - 1) % 2 ? -1.0 : 1.0) * factorial(blocks - 1);
        total += weight * factor * g(back);
    }
    return total;
}

void GEConfig::validate() const {
    initial.validate();
    if (is_torus(initial.domain)) throw InvalidArgument("generalized Enskog solutions need free space");
    if (initial.size() < 1 || initial.size() > 3) throw InvalidArgument("generalized Enskog solutions need 1 <= N <= 3");
    for (auto& k : initial.kernels)
        if (!(2 * k.eps < initial.a)) throw InvalidArgument("kernel support diameter must be below a");
    if (series_samples < 1 || survival_samples < 1) throw InvalidArgument("sample budgets must be positive");
    if (!(zeta_floor > 0)) throw InvalidArgument("zeta floor must be positive");
}

// Two spheres drawn from an ordered pair of distinct kernels and run forward together to t; the
// density is the pair pushforward of the kernel product, summed over the pairs.
class PairPushforward {
public:
    PairPushforward(const std::vector<Kernel>& kernels, double t, const ClusterDynamics& dyn)
        : kernels_(kernels), t_(t), dyn_(dyn) {}

    bool sample(Rng& rng, PhasePoint& x, PhasePoint& y) const {
        const std::size_t n = kernels_.size();
        std::size_t i = pick(rng, n), j = pick(rng, n - 1);
        if (j >= i) ++j;
        PhasePoint p = sample_kernel(kernels_[i], rng), q = sample_kernel(kernels_[j], rng);
        if (norm2(p.r - q.r) < dyn_.a * dyn_.a) return false;
        SystemState st;
        st.a = dyn_.a;
        st.model = dyn_.model;
        st.positions = {p.r, q.r};
        st.velocities = {p.v, q.v};
        st = evolve(st, t_, dyn_.options);
        x = st.phase(0);
        y = st.phase(1);
        return true;
    }

    double density(const PhasePoint& x, const PhasePoint& y) const {
        std::vector<PhasePoint> back(2);
        double factor = 1;
        if (!run_back({0, 1}, {x, y}, t_, dyn_, back, factor)) return 0.0;
        const double n = static_cast<double>(kernels_.size());
        double sum = 0;
        for (std::size_t i = 0; i < kernels_.size(); ++i)
            for (std::size_t j = 0; j < kernels_.size(); ++j)
                if (i != j) sum += kernel_eval(kernels_[i], back[0].r, back[0].v) * kernel_eval(kernels_[j], back[1].r, back[1].v);
        return factor * sum / (n * (n - 1));
    }

private:
    const std::vector<Kernel>& kernels_;
    double t_;
    ClusterDynamics dyn_;
};

struct GESolution::Impl {
    GEConfig cfg;
    std::uint64_t id = next_solution_id++;  // key of the per-thread survival cache
    ClusterDynamics dyn;
    std::vector<std::vector<PhasePoint>> draws;  // per kernel, behind the B- integral
    std::vector<FieldEvaluator> clusters;  // per subset of two or more kernels that resolves; for N = 2 the pair

    int size() const { return static_cast<int>(cfg.initial.size()); }
    double a() const { return cfg.initial.a; }

    const FieldEvaluator& pair() const {
        if (size() != 2) throw InvalidArgument("the two-particle solution needs N = 2");
        return clusters.back();
    }

    std::vector<SupportBall> proposal_balls(double t) const {
        std::vector<SupportBall> out;
        auto add = [&](const SupportBall& b) {
            auto same = [](const SupportBall& x, const SupportBall& y) {
                auto close = [](double p, double q) { return std::abs(p - q) <= 1e-12 * (1 + std::abs(p)); };
                auto close3 = [&](const Vec3& p, const Vec3& q) {
                    return close(p.x, q.x) && close(p.y, q.y) && close(p.z, q.z);
                };
                return close3(x.r_center, y.r_center) && close3(x.v_center, y.v_center) &&
                       close(x.r_radius, y.r_radius) && close(x.v_radius, y.v_radius) && close(x.shear, y.shear);
            };
            for (auto& o : out)
                if (same(o, b)) return;
            out.push_back(b);
        };
        for (auto& k : cfg.initial.kernels) add({k.center.r + t * k.center.v, k.eps, k.center.v, k.eps, t});
        for (auto& fe : clusters)
            for (int i = 0; i < static_cast<int>(fe.initial().size()); ++i) {
                add(fe.free_support(i, t));
                SupportBall g;
                if (fe.gain_support(i, t, g)) add(g);
            }
        return out;
    }

    double survival_integral(const Vec3& r, const Vec3& v, double t) const {
        struct Cache {
            std::uint64_t owner = 0;
            Vec3 r, v;
            double t = 0, value = 0;
        };
        thread_local Cache cache;
        auto same = [](const Vec3& p, const Vec3& q) { return p.x == q.x && p.y == q.y && p.z == q.z; };
        if (cache.owner == id && cache.t == t && same(cache.r, r) && same(cache.v, v)) return cache.value;
        const double a2 = a() * a();
        double total = 0;
        for (const auto& ys : draws) {
            long miss = 0;
            for (const auto& y : ys) {
                Vec3 rel = y.r + t * y.v - r;
                if (norm2(rel) < a2) continue;
                if (t_star(rel, y.v - v, a()) > t) ++miss;
            }
            total += static_cast<double>(miss) / static_cast<double>(ys.size());
        }
        cache = {id, r, v, t, total};
        return total;
    }

    double zeta(const Vec3& r, const Vec3& v, double t) const {
        double s = survival_integral(r, v, t);
        if (s < cfg.zeta_floor) throw SurvivalUnderflow("B- survival integral below the floor; zeta undefined");
        return 1.0 / s;
    }

    Integral gain(const Vec3& r, const Vec3& v, double t) const {
        const FieldEvaluator& fe = pair();
        int k = fe.interval_of(t);
        Integral out;
        for (int i = 0; i < size(); ++i) {
            const CollisionWindow* w = fe.window(k, i);
            if (!w || !(t > w->start)) continue;
            Integral g = fe.gain_estimate(i, r, v, t);
            out.value += g.value;
            out.error += g.error;
        }
        return out;
    }

    Integral f1(const Vec3& r, const Vec3& v, double t) const {
        pair();
        Integral out = gain(r, v, t);
        double b = eval_f0(cfg.initial, r - t * v, v);
        if (b == 0) return out;
        double var = 0, total = 0;
        const double a2 = a() * a();
        for (const auto& ys : draws) {
            long miss = 0;
            for (const auto& y : ys) {
                Vec3 rel = y.r + t * y.v - r;
                if (norm2(rel) >= a2 && t_star(rel, y.v - v, a()) > t) ++miss;
            }
            double m = static_cast<double>(ys.size()), p = miss / m;
            total += p;
            var += p * (1 - p) / m;
        }
        out.value += b * total;
        out.error += b * std::sqrt(var);
        return out;
    }

    ComponentDensity components(double t) const {
        const FieldEvaluator& fe = pair();
        ComponentDensity out;
        for (const auto& k : cfg.initial.kernels) {
            SupportBall ball{k.center.r + t * k.center.v, k.eps, k.center.v, k.eps, t};
            out.push_back({[this, k, t](const Vec3& r, const Vec3& v) {
                               double b = kernel_eval(k, r - t * v, v);
                               return b != 0 ? b * survival_integral(r, v, t) : 0.0;
                           },
                           ball, true});
        }
        int cell = fe.interval_of(t);
        for (int i = 0; i < size(); ++i) {
            const CollisionWindow* w = fe.window(cell, i);
            SupportBall g;
            if (!w || !(t > w->start) || !fe.gain_support(i, t, g)) continue;
            out.push_back({[fe, i, t](const Vec3& r, const Vec3& v) { return fe.gain_term(i, r, v, t); }, g, false});
        }
        return out;
    }

    // zeta F1 split the same way; zeta cancels the B- integral exactly (same draws), leaving f0 streamed
    ComponentDensity weighted_components(double t) const {
        ComponentDensity out = components(t);
        for (std::size_t c = 0; c < out.size(); ++c) {
            if (c < cfg.initial.kernels.size()) {
                const Kernel k = cfg.initial.kernels[c];
                out[c].eval = [k, t](const Vec3& r, const Vec3& v) { return kernel_eval(k, r - t * v, v); };
            } else {
                auto gain = out[c].eval;
                out[c].eval = [this, gain, t](const Vec3& r, const Vec3& v) {
                    double g = gain(r, v);
                    return g != 0 ? g * zeta(r, v, t) : 0.0;
                };
            }
        }
        return out;
    }

    // zeta F1 at a point
    double weighted_f1(const Vec3& r, const Vec3& v, double t) const {
        double s = 0;
        for (auto& c : weighted_components(t))
            if (c.support.contains(r, v)) s += c.eval(r, v);
        return s;
    }
};

GESolution::GESolution(GEConfig cfg) {
    cfg.validate();
    auto impl = std::make_shared<Impl>();
    impl->cfg = std::move(cfg);
    const GEConfig& c = impl->cfg;
    impl->dyn = {c.initial.a, c.model, c.fields.dynamics};
    const int n = impl->size();
    for (int k = 0; k < n; ++k) {
        Rng rng(stream_seed(c.seed, static_cast<std::uint64_t>(k)));
        std::vector<PhasePoint> ys(c.survival_samples);
        for (auto& y : ys) y = sample_kernel(c.initial.kernels[k], rng);
        impl->draws.push_back(std::move(ys));
    }
    for (int mask = 1; mask < (1 << n); ++mask) {
        if (std::popcount(static_cast<unsigned>(mask)) < 2) continue;
        InitialDensity sub = c.initial;
        sub.kernels.clear();
        for (int k = 0; k < n; ++k)
            if (mask & (1 << k)) sub.kernels.push_back(c.initial.kernels[k]);
        try {
            impl->clusters.emplace_back(std::move(sub), c.model, c.fields);
        } catch (const ValidationError&) {
            // for N = 3 the evaluators only shape the proposal, which keeps its kernel balls and contacts
            if (n == 2) throw;
        }
    }
    impl_ = impl;
}

const GEConfig& GESolution::config() const { return impl_->cfg; }

SeriesEstimate GESolution::series(const Vec3& r, const Vec3& v, double t) const {
    const Impl& m = *impl_;
    if (!(t > 0)) throw InvalidArgument("series solution needs t > 0");
    const int N = m.size();
    const double free = eval_f0(m.cfg.initial, r - t * v, v);
    SeriesEstimate out;
    if (N == 1) {
        out.series = out.direct = {free, 0.0};
        return out;
    }
    const auto balls = m.proposal_balls(t);
    const auto& kernels = m.cfg.initial.kernels;
    const double a2 = m.a() * m.a();
    ClusterFunction g = [&](const std::vector<PhasePoint>& y) {
        for (std::size_t i = 0; i < y.size(); ++i)
            for (std::size_t j = 0; j < i; ++j)
                if (norm2(y[i].r - y[j].r) < a2) return 0.0;
        double p = 1;
        for (auto& z : y) {
            p *= eval_f0(m.cfg.initial, z.r, z.v);
            if (p == 0) return 0.0;
        }
        return p;
    };
    struct Acc {
        MeanAccumulator series, direct, difference;
    };
    const PhasePoint x1{r, v};
    const Proposal first(balls, kernels, {x1}, t, m.dyn);
    const PairPushforward pair(kernels, t, m.dyn);
    constexpr double kSequentialShare = 0.5, kPairShare = 0.25;
    const long total = m.cfg.series_samples;
    auto parts = run_streams<Acc>(kDefaultStreams, stream_seed(m.cfg.seed, 0x5e41e5), [&](int s, Rng& rng) {
        Acc acc;
        long count = total / kDefaultStreams + (s < total % kDefaultStreams ? 1 : 0);
        for (long c = 0; c < count; ++c) {
            double series = free, direct = 0;
            PhasePoint x2, x3;
            try {
                bool drew = first.sample(rng, x2);
                if (drew) {
                    double q2 = first.density(x2);
                    series += cumulant_apply(1, t, 1, g, {x1, x2}, m.dyn) / q2;
                    if (N == 2) {
                        direct = cumulant_apply(0, t, 2, g, {x1, x2}, m.dyn) / q2;
                    }
                }
                if (N == 3) {
                    // joint draw for the three-sphere terms: sequential (symmetrized over the two orders),
                    // pair pushforward of two kernels, or a contact with x1 followed by a second collision
                    PhasePoint y2 = x2, y3;
                    double branch = rng.uniform();
                    bool ok;
                    if (branch < kSequentialShare) {
                        ok = drew && Proposal(balls, kernels, {x1, x2}, t, m.dyn).sample(rng, y3);
                    } else if (branch < kSequentialShare + kPairShare) {
                        ok = pair.sample(rng, y2, y3);
                    } else {
                        ok = first.sample_chain(rng, y2, y3);
                        if (rng.uniform() < 0.5) std::swap(y2, y3);
                    }
                    if (ok) {
                        double seq = 0.5 * (first.density(y2) * Proposal(balls, kernels, {x1, y2}, t, m.dyn).density(y3) +
                                            first.density(y3) * Proposal(balls, kernels, {x1, y3}, t, m.dyn).density(y2));
                        double chain = 0.5 * (first.chain_density(y2, y3) + first.chain_density(y3, y2));
                        double q = kSequentialShare * seq + kPairShare * pair.density(y2, y3) +
                                   (1 - kSequentialShare - kPairShare) * chain;
                        series += 0.5 * cumulant_apply(2, t, 1, g, {x1, y2, y3}, m.dyn) / q;
                        direct = 0.5 * cumulant_apply(0, t, 3, g, {x1, y2, y3}, m.dyn) / q;
                    }
                }
            } catch (const ExcludedTrajectory&) {
                // measure-zero configurations
                series = free;
                direct = 0;
            }
            acc.series.add(series);
            acc.direct.add(direct);
            acc.difference.add(series - direct);
        }
        return acc;
    });
    Acc sum;
    for (auto& p : parts) {
        sum.series.merge(p.series);
        sum.direct.merge(p.direct);
        sum.difference.merge(p.difference);
    }
    out.series = {sum.series.mean(), sum.series.std_error()};
    out.direct = {sum.direct.mean(), sum.direct.std_error()};
    out.difference = {sum.difference.mean(), sum.difference.std_error()};
    return out;
}

double GESolution::survival_integral(const Vec3& r, const Vec3& v, double t) const {
    impl_->pair();
    return impl_->survival_integral(r, v, t);
}

double GESolution::zeta(const Vec3& r, const Vec3& v, double t) const {
    impl_->pair();
    return impl_->zeta(r, v, t);
}

double GESolution::f1(const Vec3& r, const Vec3& v, double t) const { return impl_->f1(r, v, t).value; }
Integral GESolution::f1_estimate(const Vec3& r, const Vec3& v, double t) const { return impl_->f1(r, v, t); }
ComponentDensity GESolution::components(double t) const { return impl_->components(t); }

MildResidual GESolution::mild_check(const std::vector<ResidualProbe>& probes, double t0, const MildConfig& cfg) const {
    const Impl& m = *impl_;
    const FieldEvaluator& fe = m.pair();
    if (!(t0 > 0)) throw InvalidArgument("check start t0 must be positive");
    MildResidual out;
    for (auto& k : m.cfg.initial.kernels) out.scale = std::max(out.scale, kernel_peak(k.eps));
    for (auto& p : probes) {
        if (p.t < t0 || p.t > fe.config().horizon) throw InvalidArgument("probe time outside [t0, horizon]");
        Integral end = m.f1(p.r, p.v, p.t);
        Integral start = m.f1(p.r - (p.t - t0) * p.v, p.v, t0);
        Integral quad = detail::characteristic_quadrature([&](double s) { return m.weighted_components(s); }, {}, p,
                                                          t0, m.a(), m.cfg.model, cfg);
        Integral flux = detail::flux_loss(fe, p, t0, cfg, [&](double te, const PhasePoint& z) {
            double f = m.weighted_f1(p.r - (p.t - te) * p.v, p.v, te);
            return f != 0 ? f * m.zeta(z.r, z.v, te) : 0.0;
        });
        double value = (end.value - start.value - quad.value + flux.value) / out.scale;
        double error = (end.error + start.error + quad.error + flux.error) / out.scale;
        out.values.push_back(value);
        out.errors.push_back(error);
        out.sup = std::max(out.sup, std::abs(value));
        out.error = std::max(out.error, error);
    }
    return out;
}

Integral ge_series_f1(const GEConfig& cfg, const Vec3& r, const Vec3& v, double t) {
    return GESolution(cfg).series(r, v, t).series;
}

double f1_two_particle(const GEConfig& cfg, const Vec3& r, const Vec3& v, double t) {
    return GESolution(cfg).f1(r, v, t);
}

double zeta(const GEConfig& cfg, const Vec3& r, const Vec3& v, double t) { return GESolution(cfg).zeta(r, v, t); }

MildResidual ge_mild_check(const GEConfig& cfg, const std::vector<ResidualProbe>& probes, double t0,
                           const MildConfig& mild) {
    return GESolution(cfg).mild_check(probes, t0, mild);
}

}  // namespace enskog
