#include "revpulse/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace revpulse {

void IntegratorConfig::validate() const {
    if (!(rel_tol > 0) || !(abs_tol > 0) || !(max_step > 0) || !(max_time > 0))
        throw Error(ErrorCode::precondition, "integrator tolerances and limits must be positive");
    if (rel_tol > 1e-3 || abs_tol > 1e-3)
        throw Error(ErrorCode::precondition, "integrator tolerances must be <= 1e-3");
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
// Dense-output coefficients (Hairer & Wanner).
constexpr double d1 = -12715105075.0 / 11282082432.0;
constexpr double d3 = 87487479700.0 / 32700410799.0;
constexpr double d4 = -10690763975.0 / 1880347072.0;
constexpr double d5 = 701980252875.0 / 199316789632.0;
constexpr double d6 = -1453857185.0 / 822651844.0;
constexpr double d7 = 69997945.0 / 29380423.0;

struct StepResult {
    Point y1;       // solution at t0 + h
    Point k7;       // derivative at y1 (FSAL)
    double err;     // scaled error estimate
    DenseStep dense;
};

StepResult dopri5_step(const Rhs& f, double t0, Point y0, Point k1, double h,
                       const IntegratorConfig& cfg) {
    const Point k2 = f(y0 + h * a21 * k1);
    const Point k3 = f(y0 + h * (a31 * k1 + a32 * k2));
    const Point k4 = f(y0 + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Point k5 = f(y0 + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Point k6 = f(y0 + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Point y1 = y0 + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Point k7 = f(y1);
    const Point errv =
        h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    auto sc = [&](double a, double b) {
        return cfg.abs_tol + cfg.rel_tol * std::max(std::abs(a), std::abs(b));
    };
    const double ex = errv.x / sc(y0.x, y1.x);
    const double ey = errv.y / sc(y0.y, y1.y);
    const double err = std::sqrt((ex * ex + ey * ey) / 2.0);

    StepResult r;
    r.y1 = y1;
    r.k7 = k7;
    r.err = err;
    const Point ydiff = y1 - y0;
    const Point bspl = h * k1 - ydiff;
    r.dense.t0 = t0;
    r.dense.h = h;
    r.dense.r1 = y0;
    r.dense.r2 = ydiff;
    r.dense.r3 = bspl;
    r.dense.r4 = ydiff - h * k7 - bspl;
    r.dense.r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
    return r;
}

double initial_step(const Rhs& f, Point y0, const IntegratorConfig& cfg) {
    const double fn = norm(f(y0));
    const double h = 0.01 * (1.0 + norm(y0)) / (1.0 + fn);
    return std::min({h, cfg.max_step, 0.1});
}

}  // namespace

Point DenseStep::eval(double t) const {
    const double s = (t - t0) / h;
    const double s1 = 1.0 - s;
    return r1 + s * (r2 + s1 * (r3 + s * (r4 + s1 * r5)));
}

double Trajectory::t_begin() const { return steps_.front().t0; }
double Trajectory::t_end() const { return steps_.back().t0 + steps_.back().h; }
Point Trajectory::front() const { return steps_.front().r1; }
Point Trajectory::back() const { return steps_.back().eval(t_end()); }

Point Trajectory::eval(double t) const {
    if (steps_.empty()) throw Error(ErrorCode::precondition, "empty trajectory");
    const double lo = std::min(t_begin(), t_end());
    const double hi = std::max(t_begin(), t_end());
    const double slack = 1e-9 * (1.0 + hi - lo);
    if (t < lo - slack || t > hi + slack)
        throw Error(ErrorCode::out_of_domain, "time outside trajectory range");
    // Steps are ordered in time (monotone t0 with a common sign of h).
    const bool fwd = steps_.front().h > 0;
    auto it = std::lower_bound(steps_.begin(), steps_.end(), t,
                               [fwd](const DenseStep& s, double tt) {
                                   return fwd ? s.t0 + s.h < tt : s.t0 + s.h > tt;
                               });
    if (it == steps_.end()) --it;
    return it->eval(t);
}

std::vector<std::pair<double, Point>> Trajectory::samples() const {
    std::vector<std::pair<double, Point>> out;
    if (steps_.empty()) return out;
    out.reserve(steps_.size() + 1);
    for (const auto& s : steps_) out.emplace_back(s.t0, s.r1);
    out.emplace_back(t_end(), back());
    return out;
}

namespace {

/// Forward integration driver. Calls `on_step` after each accepted step
/// (in internal non-negative time); stops when it returns false or at t_final.
void drive(const Rhs& f, Point p0, double t_final, const IntegratorConfig& cfg,
           const std::function<bool(const DenseStep&, Point)>& on_step) {
    if (!finite(p0)) throw Error(ErrorCode::precondition, "non-finite initial point");
    if (t_final > cfg.max_time)
        throw Error(ErrorCode::precondition, "requested duration exceeds max_time");
    double t = 0.0;
    Point y = p0;
    Point k1 = f(y);
    double h = std::min(initial_step(f, p0, cfg), t_final);
    if (t_final == 0.0) return;
    const bool project = static_cast<bool>(cfg.invariant);
    const double c0 = project ? cfg.invariant(p0) : 0.0;
    while (t < t_final) {
        if (project && cfg.freeze_at_equilibria && norm(k1) < 1e-4) {
            // Asymptotic approach to an equilibrium on the level set (e.g. a
            // saddle on a separatrix boundary): hold the point for the
            // remaining time instead of drifting past the equilibrium.
            DenseStep s;
            s.t0 = t;
            s.h = t_final - t;
            s.r1 = y;
            on_step(s, y);
            return;
        }
        h = std::min({h, cfg.max_step, t_final - t});
        if (h < 1e-14 * std::max(1.0, std::abs(t)))
            throw Error(ErrorCode::integration_failure,
                        "step size underflow at t = " + std::to_string(t) + " y=(" +
                            std::to_string(y.x) + "," + std::to_string(y.y) + ")");
        const StepResult r = dopri5_step(f, t, y, k1, h, cfg);
        if (!finite(r.y1) || !std::isfinite(r.err)) {
            h *= 0.25;
            continue;
        }
        if (r.err <= 1.0) {
            t += h;
            y = r.y1;
            if (project) {
                for (int it = 0; it < 2; ++it) {
                    const Point g = cfg.invariant_gradient(y);
                    const double n2 = g.x * g.x + g.y * g.y;
                    if (!(n2 > 0)) break;
                    const Point corr = ((cfg.invariant(y) - c0) / n2) * g;
                    // Where the gradient nearly vanishes away from the orbit
                    // (e.g. a level with a double zero along an axis) the full
                    // Newton correction can jump to another branch of the
                    // level set; only accept corrections small next to the
                    // step itself.
                    if (norm(corr) > 0.1 * h * norm(k1) + 10.0 * cfg.abs_tol) break;
                    y = y - corr;
                }
                k1 = f(y);
            } else {
                k1 = r.k7;
            }
            if (!on_step(r.dense, y)) return;
            h *= std::min(5.0, std::max(0.2, 0.9 * std::pow(std::max(r.err, 1e-10), -0.2)));
        } else {
            h *= std::max(0.2, 0.9 * std::pow(r.err, -0.2));
        }
    }
}

}  // namespace

Trajectory integrate(const Rhs& f, Point p0, double duration, const IntegratorConfig& cfg) {
    cfg.validate();
    const double sign = duration < 0 ? -1.0 : 1.0;
    const Rhs g = sign > 0 ? f : Rhs([&f](Point p) { return -1.0 * f(p); });
    Trajectory traj;
    drive(g, p0, std::abs(duration), cfg, [&](const DenseStep& s, Point) {
        DenseStep signed_step = s;
        signed_step.t0 = sign * s.t0;
        signed_step.h = sign * s.h;
        traj.append(signed_step);
        return true;
    });
    if (traj.empty()) {
        DenseStep s;  // zero-duration request: constant interpolant
        s.t0 = 0;
        s.h = sign * 1e-300;
        s.r1 = p0;
        traj.append(s);
    }
    return traj;
}

Trajectory integrate(const VectorFieldSpec& spec, Point p0, double duration,
                     const IntegratorConfig& cfg) {
    return integrate([spec](Point p) { return eval_field(spec, p); }, p0, duration, cfg);
}

Point flow_map(const VectorFieldSpec& spec, double t, Point p0, const IntegratorConfig& cfg) {
    if (t == 0.0) return p0;
    return integrate(spec, p0, t, cfg).back();
}

namespace {

bool crossing_matches(double g0, double g1, EventDirection dir) {
    if (g0 < 0 && g1 >= 0) return dir != EventDirection::falling;
    if (g0 > 0 && g1 <= 0) return dir != EventDirection::rising;
    return false;
}

}  // namespace

EventResult integrate_to_event(const Rhs& f, Point p0, const EventFunction& ev,
                               const IntegratorConfig& cfg, int skip) {
    cfg.validate();
    if (!ev.g) throw Error(ErrorCode::precondition, "event function not set");
    double g_prev = ev.g(p0);
    bool armed = g_prev != 0.0;  // a zero at t = 0 is never an event
    int remaining = skip;
    std::optional<EventResult> hit;

    drive(f, p0, cfg.max_time, cfg, [&](const DenseStep& s, Point y1) {
        const double g1 = ev.g(y1);
        if (!armed) {
            if (g1 != 0.0) {
                armed = true;
                g_prev = g1;
            }
            return true;
        }
        if (crossing_matches(g_prev, g1, ev.direction)) {
            // Bisect the dense interpolant down to the crossing time.
            double ta = s.t0, tb = s.t0 + s.h;
            double ga = ev.g(s.eval(ta));
            if (ga == 0.0) ga = g_prev;
            for (int i = 0; i < 200 && tb - ta > 1e-15 * std::max(1.0, tb); ++i) {
                const double tm = 0.5 * (ta + tb);
                const double gm = ev.g(s.eval(tm));
                if (gm == 0.0 || (gm > 0) == (ga > 0)) {
                    ta = tm;
                    if (gm != 0.0) ga = gm;
                } else {
                    tb = tm;
                }
            }
            const double tc = tb;
            const Point pc = s.eval(tc);
            if (std::abs(ev.g(pc)) > 1e-10)
                throw Error(ErrorCode::event_not_found,
                            "event refinement stalled (|g| > 1e-10)");
            if (remaining-- == 0) {
                hit = EventResult{tc, pc};
                return false;
            }
        }
        g_prev = g1;
        return true;
    });

    if (!hit)
        throw Error(ErrorCode::event_not_found,
                    "no event crossing before t = " + std::to_string(cfg.max_time));
    return *hit;
}

EventResult integrate_to_event(const VectorFieldSpec& spec, Point p0, const EventFunction& ev,
                               const IntegratorConfig& cfg, int skip) {
    return integrate_to_event([spec](Point p) { return eval_field(spec, p); }, p0, ev, cfg,
                              skip);
}

double orbit_period(const VectorFieldSpec& spec, Point p0, const IntegratorConfig& cfg) {
    const Point v0 = eval_field(spec, p0);
    if (norm(v0) < 1e-12)
        throw Error(ErrorCode::precondition, "orbit_period called at an equilibrium");
    // Perpendicular section through p0; the orbit crosses it rising at p0.
    EventFunction ev;
    ev.g = [p0, v0](Point p) { return dot(p - p0, v0); };
    ev.direction = EventDirection::rising;
    for (int skip = 0; skip < 4; ++skip) {
        const EventResult r = integrate_to_event(spec, p0, ev, cfg, skip);
        if (dist(r.p, p0) <= 1e-8) return r.t;
    }
    throw Error(ErrorCode::not_closed,
                "trajectory returns to the section but not to the starting point");
}

LevelCurve trace_level_set(const FirstIntegral& fi, double level, Point seed,
                           const IntegratorConfig& cfg, const BoundingBox& box,
                           double max_chord) {
    cfg.validate();
    const double ds = max_chord > 0 ? max_chord : 0.01;

    auto project = [&](Point p) {
        for (int i = 0; i < 5; ++i) {
            const Point g = fi.gradient(p);
            const double g2 = dot(g, g);
            if (g2 < 1e-24) break;
            const double err = fi.value(p) - level;
            if (std::abs(err) < 1e-14 * (1.0 + std::abs(level))) break;
            p = p - (err / g2) * g;
        }
        return p;
    };

    Point p = project(seed);
    if (std::abs(fi.value(p) - level) > 1e-8 * (1.0 + std::abs(level)))
        throw Error(ErrorCode::precondition, "seed cannot be projected onto the level set");
    if (norm(fi.gradient(p)) < 1e-8) {
        // Critical point of H: the component is the point itself.
        return LevelCurve{{p}, true};
    }

    auto tangent = [&](Point q) -> std::optional<Point> {
        const Point g = fi.gradient(q);
        const double n = norm(g);
        if (n < 1e-10) return std::nullopt;
        return Point{g.y / n, -g.x / n};
    };

    LevelCurve curve;
    curve.points.push_back(p);
    const Point start = p;
    const size_t max_pts = 400000;
    while (curve.points.size() < max_pts) {
        // RK4 step along the unit tangent, then project back onto the level.
        const auto t1 = tangent(p);
        if (!t1) break;
        const auto t2 = tangent(p + (ds / 2) * *t1);
        if (!t2) break;
        const auto t3 = tangent(p + (ds / 2) * *t2);
        if (!t3) break;
        const auto t4 = tangent(p + ds * *t3);
        if (!t4) break;
        Point q = p + (ds / 6.0) * (*t1 + 2.0 * *t2 + 2.0 * *t3 + *t4);
        q = project(q);
        if (!finite(q)) break;
        if (!box.contains(q)) {
            curve.points.push_back(q);
            curve.closed = false;
            return curve;
        }
        curve.points.push_back(q);
        if (curve.points.size() > 10 && dist(q, start) < ds) {
            curve.points.push_back(start);
            curve.closed = true;
            return curve;
        }
        p = q;
    }
    curve.closed = false;
    return curve;
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw Error(ErrorCode::io, "cannot open " + path + " for writing");
    std::fputs("t,x,y\n", f);
    for (const auto& [t, p] : traj.samples())
        std::fprintf(f, "%.17g,%.17g,%.17g\n", t, p.x, p.y);
    std::fclose(f);
}

}  // namespace revpulse
