#include "enskog/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>
#include <string>

#include "enskog/errors.hpp"

namespace enskog {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// r = r2 - r1, v = v2 - v1 (free space)
std::optional<double> contact_time(const Vec3& r, const Vec3& v, double a) {
    double rr = norm2(r);
    double floor = a - 1e-12;
    if (rr < floor * floor) throw InvalidState("spheres overlap: distance " + std::to_string(std::sqrt(rr)));
    double b = dot(r, v);
    if (b >= 0) return std::nullopt;
    double c = rr - a * a;
    if (c <= 0) return 0.0;
    double disc = b * b - norm2(v) * c;
    if (disc < 0) return std::nullopt;
    return c / (-b + std::sqrt(disc));
}

std::optional<double> torus_contact_time(const Vec3& r, const Vec3& v, double a, const Vec3& len) {
    std::optional<double> best;
    for (int i = -1; i <= 1; ++i)
        for (int j = -1; j <= 1; ++j)
            for (int k = -1; k <= 1; ++k) {
                Vec3 img = r + Vec3{i * len.x, j * len.y, k * len.z};
                auto t = contact_time(img, v, a);
                if (t && (!best || *t < *best)) best = t;
            }
    return best;
}

// time over which the 27-image prediction stays complete
double image_horizon(const Vec3& v, const Vec3& len) {
    double h = kInf;
    for (int k = 0; k < 3; ++k)
        if (v[k] != 0) h = std::min(h, len[k] / std::abs(v[k]));
    return h;
}

struct Entry {
    double time;
    int i, j;
    long ci, cj;
    bool recheck;
    bool operator>(const Entry& o) const { return time > o.time; }
};

class EventEngine {
public:
    EventEngine(SystemState& s, const DynamicsOptions& opt, bool inverse_rule, double origin, double direction,
                 EventLog* log)
        : s_(s), opt_(opt), inverse_rule_(inverse_rule), origin_(origin), direction_(direction), log_(log),
          counter_(s.size(), 0) {
        for (auto& v : s_.velocities) speed_scale_ = std::max(speed_scale_, norm(v));
        for (int i = 0; i < static_cast<int>(s_.size()); ++i)
            for (int j = i + 1; j < static_cast<int>(s_.size()); ++j) predict(i, j);
    }

    void run(double duration) {
        long collisions = 0;
        while (!queue_.empty()) {
            Entry e = queue_.top();
            if (!valid(e)) {
                queue_.pop();
                continue;
            }
            if (e.time > duration) break;
            queue_.pop();
            advance(e.time);
            if (e.recheck) {
                predict(e.i, e.j);
                continue;
            }
            check_simultaneous(e);
            collide(e);
            if (++collisions > opt_.collision_cap) throw CollisionCapExceeded("collision cap exceeded");
            for (int k = 0; k < static_cast<int>(s_.size()); ++k) {
                if (k != e.i && k != e.j) {
                    predict(std::min(k, e.i), std::max(k, e.i));
                    predict(std::min(k, e.j), std::max(k, e.j));
                }
            }
            predict(e.i, e.j);
        }
        advance(duration);
    }

private:
    bool valid(const Entry& e) const { return counter_[e.i] == e.ci && counter_[e.j] == e.cj; }

    void advance(double t) {
        double dt = t - now_;
        if (dt != 0)
            for (std::size_t k = 0; k < s_.size(); ++k)
                s_.positions[k] = wrap(s_.domain, s_.positions[k] + dt * s_.velocities[k]);
        now_ = t;
    }

    void predict(int i, int j) {
        Vec3 r = displacement(s_.domain, s_.positions[i], s_.positions[j]);
        Vec3 v = s_.velocities[j] - s_.velocities[i];
        std::optional<double> t;
        double horizon = kInf;
        if (auto* torus = std::get_if<Torus>(&s_.domain)) {
            t = torus_contact_time(r, v, s_.a, torus->lengths);
            horizon = image_horizon(v, torus->lengths);
        } else {
            t = contact_time(r, v, s_.a);
        }
        if (t && *t <= horizon)
            queue_.push({now_ + *t, i, j, counter_[i], counter_[j], false});
        else if (std::isfinite(horizon))
            queue_.push({now_ + horizon, i, j, counter_[i], counter_[j], true});
    }

    void check_simultaneous(const Entry& e) {
        std::vector<Entry> held;
        while (!queue_.empty() && queue_.top().time <= e.time + opt_.tol_time) {
            Entry o = queue_.top();
            queue_.pop();
            if (!valid(o)) continue;
            held.push_back(o);
            bool shares = o.i == e.i || o.i == e.j || o.j == e.i || o.j == e.j;
            if (!o.recheck && shares) {
                throw SimultaneousCollision("simultaneous collisions of pairs (" + std::to_string(e.i) + "," +
                                            std::to_string(e.j) + ") and (" + std::to_string(o.i) + "," +
                                            std::to_string(o.j) + ")");
            }
        }
        for (auto& o : held) queue_.push(o);
    }

    void collide(const Entry& e) {
        Vec3& vi = s_.velocities[e.i];
        Vec3& vj = s_.velocities[e.j];
        Vec3 sigma = unit(displacement(s_.domain, s_.positions[e.j], s_.positions[e.i]));
        double u = dot(vj - vi, sigma);
        if (u <= opt_.tol_grazing * std::max(speed_scale_, 1e-300))
            throw GrazingCollision("grazing collision of pair (" + std::to_string(e.i) + "," + std::to_string(e.j) + ")");
        CollisionEvent ev;
        ev.time = origin_ + direction_ * e.time;
        ev.i = e.i;
        ev.j = e.j;
        ev.sigma = sigma;
        ev.vi_pre = direction_ * vi;
        ev.vj_pre = direction_ * vj;
        const RestitutionModel& m = s_.model;
        if (m.is_elastic()) {
            std::tie(vi, vj) = collide_elastic(vi, vj, sigma);
        } else if (!inverse_rule_) {
            std::tie(vi, vj) = collide_inelastic(vi, vj, sigma, m);
            s_.log_jacobian += std::log(collision_volume_factor(u, m));
        } else {
            // reversed frame: the real post-collision velocities are -vi, -vj
            auto pre = inverse_collision(-vi, -vj, sigma, m);
            s_.log_jacobian -= std::log(collision_volume_factor(m.invert(u), m));
            vi = -pre.first;
            vj = -pre.second;
        }
        ev.vi_post = direction_ * vi;
        ev.vj_post = direction_ * vj;
        ++counter_[e.i];
        ++counter_[e.j];
        if (log_) log_->push_back(ev);
    }

    SystemState& s_;
    const DynamicsOptions& opt_;
    bool inverse_rule_;
    double origin_, direction_;
    EventLog* log_;
    std::vector<long> counter_;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> queue_;
    double now_ = 0;
    double speed_scale_ = 0;
};

}  // namespace

bool is_torus(const Domain& d) { return std::holds_alternative<Torus>(d); }

Vec3 displacement(const Domain& d, const Vec3& from, const Vec3& to) {
    Vec3 r = to - from;
    if (auto* torus = std::get_if<Torus>(&d))
        for (int k = 0; k < 3; ++k) {
            double len = torus->lengths[k];
            r[k] -= len * std::nearbyint(r[k] / len);
        }
    return r;
}

Vec3 wrap(const Domain& d, const Vec3& r) {
    Vec3 out = r;
    if (auto* torus = std::get_if<Torus>(&d))
        for (int k = 0; k < 3; ++k) {
            double len = torus->lengths[k];
            out[k] -= len * std::floor(out[k] / len);
            if (out[k] >= len) out[k] -= len;
        }
    return out;
}

void SystemState::validate() const {
    if (positions.size() != velocities.size()) throw InvalidArgument("positions and velocities differ in length");
    if (!(a > 0) || !std::isfinite(a)) throw InvalidArgument("diameter must be positive");
    if (auto* torus = std::get_if<Torus>(&domain))
        for (int k = 0; k < 3; ++k)
            if (!(torus->lengths[k] > 2 * a)) throw InvalidArgument("box length must exceed 2a");
    for (std::size_t i = 0; i < size(); ++i)
        if (!finite(positions[i]) || !finite(velocities[i])) throw InvalidState("non-finite phase point");
    for (std::size_t i = 0; i < size(); ++i)
        for (std::size_t j = i + 1; j < size(); ++j)
            if (norm(displacement(domain, positions[i], positions[j])) < a - 1e-12)
                throw InvalidState("spheres " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
}

std::optional<double> time_to_collision(const PhasePoint& p1, const PhasePoint& p2, double a, const Domain& domain) {
    Vec3 r = displacement(domain, p1.r, p2.r);
    Vec3 v = p2.v - p1.v;
    if (auto* torus = std::get_if<Torus>(&domain)) return torus_contact_time(r, v, a, torus->lengths);
    return contact_time(r, v, a);
}

SystemState evolve(const SystemState& state, double t, const DynamicsOptions& opt, EventLog* log) {
    state.validate();
    SystemState s = state;
    if (t >= 0) {
        EventEngine(s, opt, false, state.time, 1.0, log).run(t);
    } else {
        for (auto& v : s.velocities) v = -v;
        EventEngine(s, opt, !s.model.is_elastic(), state.time, -1.0, log).run(-t);
        for (auto& v : s.velocities) v = -v;
    }
    s.time = state.time + t;
    return s;
}

EventLog event_log(const SystemState& state, double horizon, const DynamicsOptions& opt) {
    EventLog log;
    evolve(state, horizon, opt, &log);
    return log;
}

std::vector<double> partition_times(const EventLog& log, double horizon) {
    std::vector<double> out{0.0};
    std::set<int> busy;
    double last = 0.0;
    for (const auto& e : log) {
        if (e.time > horizon) break;
        if (busy.count(e.i) || busy.count(e.j)) {
            out.push_back(0.5 * (last + e.time));
            busy.clear();
        }
        busy.insert(e.i);
        busy.insert(e.j);
        last = e.time;
    }
    if (horizon > out.back()) out.push_back(horizon);
    return out;
}

FlowJacobian flow_jacobian_fd(const SystemState& state, double t, double h, const DynamicsOptions& opt) {
    const std::size_t n = state.size();
    EventLog base_log;
    SystemState base = evolve(state, t, opt, &base_log);
    double window = 1e3 * h;
    for (const auto& e : base_log)
        if (std::abs(e.time - state.time) < window || std::abs(e.time - base.time) < window)
            throw EventOrderChanged("event inside the safety window of the endpoints");

    auto same_sequence = [&](const EventLog& other) {
        if (other.size() != base_log.size()) return false;
        for (std::size_t k = 0; k < other.size(); ++k)
            if (other[k].i != base_log[k].i || other[k].j != base_log[k].j) return false;
        return true;
    };
    auto coordinate = [](SystemState& s, std::size_t k) -> double& {
        std::size_t sphere = k / 6, c = k % 6;
        return c < 3 ? s.positions[sphere][static_cast<int>(c)] : s.velocities[sphere][static_cast<int>(c - 3)];
    };

    FlowJacobian out;
    out.matrix.resize(6 * n, 6 * n);
    for (std::size_t k = 0; k < 6 * n; ++k) {
        SystemState plus = state, minus = state;
        coordinate(plus, k) += h;
        coordinate(minus, k) -= h;
        EventLog lp, lm;
        SystemState fp = evolve(plus, t, opt, &lp);
        SystemState fm = evolve(minus, t, opt, &lm);
        if (!same_sequence(lp) || !same_sequence(lm)) throw EventOrderChanged("perturbation changed the event sequence");
        for (std::size_t i = 0; i < n; ++i) {
            Vec3 dr = displacement(state.domain, fm.positions[i], fp.positions[i]);
            Vec3 dv = fp.velocities[i] - fm.velocities[i];
            for (int c = 0; c < 3; ++c) {
                out.matrix(6 * i + c, k) = dr[c] / (2 * h);
                out.matrix(6 * i + 3 + c, k) = dv[c] / (2 * h);
            }
        }
    }
    out.determinant = out.matrix.partialPivLu().determinant();
    Eigen::MatrixXd block(3 * n, 3 * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            block.block<3, 3>(3 * i, 3 * j) = out.matrix.block<3, 3>(6 * i, 6 * j);
    out.position_block_determinant = block.partialPivLu().determinant();
    return out;
}

double kinetic_energy(const SystemState& s) {
    double e = 0;
    for (auto& v : s.velocities) e += 0.5 * norm2(v);
    return e;
}

Vec3 total_momentum(const SystemState& s) {
    Vec3 p;
    for (auto& v : s.velocities) p += v;
    return p;
}

}  // namespace enskog
