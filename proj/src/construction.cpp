#include "revpulse/construction.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <vector>

namespace revpulse {

namespace {

Rhs reversed(const VectorFieldSpec& spec) {
    return [spec](Point p) {
        Point v = eval_field(spec, p);
        return Point{-v.x, -v.y};
    };
}

/// Role assignment for one instance: which frozen field supplies the strip and
/// which supplies the annulus, plus the closed-form data of the outer cycle.
struct Engine {
    Family family{};
    double l1 = 0, l2 = 0;
    double lS = 0, lA = 0;  // strip / annulus parameter values
    bool strip_first = true;
    VectorFieldSpec specS, specA;
    FirstIntegral HS, HA;
    double L_out = 0;   // annulus integral value on the outer cycle
    Point center;       // symmetric center enclosed by the outer cycle
    double x_star = 0;  // leftmost axis point of the outer cycle
    double a_lo = 0, a_hi = 0;  // admissible tip interval for alpha
    bool tip_rising = true;
    IntegratorConfig cfg;

    Engine(Family f, double sl, double al)
        : family(f), specS(f, sl), specA(f, al), HS(f, sl), HA(f, al) {}
};

Engine make_engine(Family family, double l1, double l2, const IntegratorConfig& cfg) {
    cfg.validate();
    if (l1 == l2) throw Error(ErrorCode::precondition, "equal pulse levels give no switching");
    if (family == Family::Saddle) {
        if (!(l1 > 0) || !(l1 > l2))
            throw Error(ErrorCode::precondition,
                        "saddle construction needs lambda1 > 0 and lambda1 > lambda2");
        if (l2 > 0) {
            Engine e(family, l1, l2);  // strip from lambda1, annulus from lambda2
            e.l1 = l1, e.l2 = l2, e.lS = l1, e.lA = l2;
            e.strip_first = true;
            e.L_out = 0;
            e.center = {-l2, 0};
            e.x_star = -1.5 * l2;
            if (e.x_star > -l1) {
                e.a_lo = -l2, e.a_hi = 0;  // cycle inside the lambda1 well
            } else {
                e.a_lo = e.x_star, e.a_hi = 0;
            }
            e.tip_rising = true;
            e.cfg = cfg;
            return e;
        }
        Engine e(family, l2, l1);  // strip from lambda2, annulus from lambda1
        e.l1 = l1, e.l2 = l2, e.lS = l2, e.lA = l1;
        e.strip_first = false;
        e.L_out = 0;
        e.center = {-l1, 0};
        e.x_star = -1.5 * l1;
        e.a_lo = -l1, e.a_hi = 0;
        e.tip_rising = false;  // ydot = x + lambda2 < 0 on the negative axis
        e.cfg = cfg;
        return e;
    }
    if (family == Family::Cusp) {
        if (!(l1 < 0) || !(l2 > l1))
            throw Error(ErrorCode::precondition,
                        "cusp construction needs lambda1 < 0 and lambda2 > lambda1");
        double s = std::sqrt(-l1);
        Engine e(family, l2, l1);  // strip from lambda2, annulus from lambda1
        e.l1 = l1, e.l2 = l2, e.lS = l2, e.lA = l1;
        e.strip_first = false;
        e.L_out = e.HA.separatrix_level();
        e.center = {-s, 0};
        e.x_star = -2 * s;
        e.a_lo = e.x_star;
        e.a_hi = l2 < 0 ? std::min(-2 * std::sqrt(-l2), -s) : -s;
        e.tip_rising = true;  // |alpha| > sqrt(-lambda2) on the admissible interval
        e.cfg = cfg;
        return e;
    }
    throw Error(ErrorCode::precondition,
                "certified construction exists only for the saddle and cusp families");
}

/// Closed-form crossing of the strip level orbit through (a,0) with the outer
/// cycle of the annulus integral; returns (x_int, y_int), y_int > 0.
std::pair<double, double> engine_corners(const Engine& e, double a) {
    double cs = e.HS.value({a, 0});
    double x = 0;
    if (e.family == Family::Saddle) {
        double arg = (cs - e.L_out) / (e.lA - e.lS);
        if (!(arg > 0))
            throw Error(ErrorCode::geometric_failure,
                        "strip orbit does not reach the outer boundary");
        x = -std::sqrt(arg);
        if (!(x > e.x_star && x < 0))
            throw Error(ErrorCode::geometric_failure,
                        "strip/outer intersection misses the heteroclinic parabola");
        double y2 = (2.0 / 3.0) * x + e.lA;
        if (!(y2 > 0))
            throw Error(ErrorCode::geometric_failure, "negative radicand at the outer crossing");
        return {x, std::sqrt(y2)};
    }
    x = (cs - e.L_out) / (e.lA - e.lS);
    double s = std::sqrt(-e.lA);
    if (!(x > e.x_star && x < s))
        throw Error(ErrorCode::geometric_failure,
                    "strip/outer intersection misses the homoclinic loop");
    double y2 = 2 * (e.L_out + x * x * x / 3 + e.lA * x);
    if (!(y2 > 0))
        throw Error(ErrorCode::geometric_failure, "negative radicand at the outer crossing");
    return {x, std::sqrt(y2)};
}

Point engine_entry(const Engine& e, double x_int, double y_int) {
    return {x_int, e.tip_rising ? -y_int : y_int};
}

/// Transit time of the strip flow between the mirror-symmetric outer crossings.
double engine_transit(const Engine& e, double x_int, double y_int) {
    Point entry = engine_entry(e, x_int, y_int);
    EventFunction ev{[&e](Point p) { return e.HA.value(p) - e.L_out; }, EventDirection::rising};
    EventResult res = integrate_to_event(e.specS, entry, ev, e.cfg);
    if (dist(res.p, mirror(entry)) > 1e-6)
        throw Error(ErrorCode::construction,
                    "strip transit does not arrive at the mirror image of its entry point");
    return res.t;
}

/// Times (backward from the tip of the level orbit) at which the orbit crosses
/// the given annulus level; positive.
double backward_crossing_time(const Engine& e, double tip_x, double level) {
    EventFunction ev{[&e, level](Point p) { return e.HA.value(p) - level; },
                     EventDirection::rising};
    return integrate_to_event(reversed(e.specS), Point{tip_x, 0}, ev, e.cfg).t;
}

Point backward_crossing_point(const Engine& e, double tip_x, double level) {
    EventFunction ev{[&e, level](Point p) { return e.HA.value(p) - level; },
                     EventDirection::rising};
    return integrate_to_event(reversed(e.specS), Point{tip_x, 0}, ev, e.cfg).p;
}

struct BetaResult {
    double beta = 0;
    double sigma_hat = 0;
    double level = 0;
    double t_out = 0;  // half transit of the beta orbit across the annulus
    Point q_hat;
};

double engine_psi(const Engine& e, double tau, Point p) {
    return flow_map(e.specS, tau, p, e.cfg).y + p.y;
}

/// Bisection of psi along the beta-orbit arc between its outer crossings.
BetaResult inner_from_beta(const Engine& e, double beta, double tau_s) {
    double t_out = backward_crossing_time(e, beta, e.L_out);
    if (!(t_out > tau_s / 2))
        throw Error(ErrorCode::construction, "beta orbit crosses the annulus too quickly");
    Point q0 = backward_crossing_point(e, beta, e.L_out);
    // psi at q(s) flows tau_s past s; keep s + tau_s inside the arc (strip
    // orbits may blow up in finite time beyond it). The mirror zero sits at
    // s = t_out - tau_s/2 and psi is odd around it by reversibility, so the
    // symmetric bracket below still straddles it.
    double s_lo = 0, s_hi = 2 * t_out - tau_s;
    auto psi_at = [&](double s) { return engine_psi(e, tau_s, flow_map(e.specS, s, q0, e.cfg)); };
    double f_lo = psi_at(s_lo);
    double f_hi = psi_at(s_hi);
    if (f_lo == 0) s_hi = s_lo;
    else if (f_hi == 0) s_lo = s_hi;
    else if (f_lo * f_hi > 0)
        throw Error(ErrorCode::construction, "psi does not change sign along the beta arc");
    double s_mid = 0.5 * (s_lo + s_hi);
    for (int i = 0; i < 200; ++i) {
        s_mid = 0.5 * (s_lo + s_hi);
        double f_mid = psi_at(s_mid);
        if (std::abs(f_mid) <= 1e-10 || s_hi - s_lo < 1e-15 * (1 + std::abs(s_hi))) break;
        if ((f_mid > 0) == (f_lo > 0)) s_lo = s_mid, f_lo = f_mid;
        else s_hi = s_mid;
    }
    BetaResult r;
    r.beta = beta;
    r.sigma_hat = s_mid;
    r.t_out = t_out;
    r.q_hat = flow_map(e.specS, s_mid, q0, e.cfg);
    r.level = e.HA.value(r.q_hat);
    if (std::abs(engine_psi(e, tau_s, r.q_hat)) > 1e-8)
        throw Error(ErrorCode::construction, "psi bisection did not converge");
    if (dist(flow_map(e.specS, tau_s, r.q_hat, e.cfg), mirror(r.q_hat)) > 1e-6)
        throw Error(ErrorCode::construction,
                    "inner-boundary point is not mapped to its mirror image");
    return r;
}

double outer_diameter(const Polyline& pts) {
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& p : pts) {
        xmin = std::min(xmin, p.x), xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y), ymax = std::max(ymax, p.y);
    }
    return std::hypot(xmax - xmin, ymax - ymin);
}

Polyline saddle_cycle_points(double lambda2, int n) {
    double s = std::sqrt(lambda2);
    Polyline pts;
    for (int i = 0; i <= n; ++i) {
        double y = -s * i / n;
        pts.push_back({1.5 * (y * y - lambda2), y});
    }
    for (int i = 1; i <= n; ++i) pts.push_back({0, -s + 2 * s * i / n});
    for (int i = 1; i <= n; ++i) {
        double y = s * (n - i) / static_cast<double>(n);
        pts.push_back({1.5 * (y * y - lambda2), y});
    }
    return pts;
}

Polyline cusp_loop_points(double lambda1, int n) {
    double s = std::sqrt(-lambda1);
    double c = FirstIntegral(Family::Cusp, lambda1).separatrix_level();
    auto ybr = [&](double x) {
        double y2 = 2 * (c + x * x * x / 3 + lambda1 * x);
        return std::sqrt(std::max(0.0, y2));
    };
    Polyline pts;
    for (int i = 0; i <= n; ++i) {
        double t = 0.5 * (1 - std::cos(M_PI * i / n));
        double x = -2 * s + 3 * s * t;
        pts.push_back({x, -ybr(x)});
    }
    for (int i = n - 1; i >= 0; --i) {
        double t = 0.5 * (1 - std::cos(M_PI * i / n));
        double x = -2 * s + 3 * s * t;
        pts.push_back({x, ybr(x)});
    }
    return pts;
}

Polyline engine_outer_points(const Engine& e, int n) {
    if (e.family == Family::Saddle) return saddle_cycle_points(e.lA, n);
    return cusp_loop_points(e.lA, n);
}

JordanCurve engine_outer(const Engine& e) {
    if (e.family == Family::Saddle) return outer_boundary_saddle(e.lA);
    return outer_boundary_cusp(e.lA);
}

/// Boundary arc of the strip on one level: trajectory through (tip_x, 0)
/// sampled over flow time [u0, u1], chord-refined via dense output.
Polyline level_arc(const Engine& e, double tip_x, double u0, double u1, double chord) {
    Trajectory back = integrate(e.specS, {tip_x, 0}, u0, e.cfg);   // u0 < 0
    Trajectory fwd = integrate(e.specS, {tip_x, 0}, u1, e.cfg);
    auto eval = [&](double t) { return t < 0 ? back.eval(t) : fwd.eval(t); };
    Polyline out;
    out.push_back(eval(u0));
    // iterative refinement stack over an initial uniform partition
    const int n0 = 64;
    std::vector<std::pair<double, double>> stack;
    for (int i = n0 - 1; i >= 0; --i)
        stack.push_back({u0 + (u1 - u0) * i / n0, u0 + (u1 - u0) * (i + 1) / n0});
    while (!stack.empty()) {
        auto [ta, tb] = stack.back();
        stack.pop_back();
        Point pa = eval(ta), pb = eval(tb);
        if (dist(pa, pb) > chord && tb - ta > 1e-10 * (u1 - u0)) {
            double tm = 0.5 * (ta + tb);
            stack.push_back({tm, tb});
            stack.push_back({ta, tm});
        } else {
            out.push_back(pb);
        }
    }
    return out;
}

/// Common |u| extent making both boundary arcs leave the containing ball:
/// the latest ball-exit time over both levels and both flow directions.
double arc_extent(const Engine& e, double a, double b, double u_need, Point cen, double r_need,
                  double u_cap) {
    EventFunction exit_ball{[cen, r_need](Point p) { return dist(p, cen) - r_need; },
                            EventDirection::rising};
    double t_exit = 0;
    try {
        for (double tip : {a, b}) {
            t_exit = std::max(t_exit,
                              integrate_to_event(e.specS, {tip, 0}, exit_ball, e.cfg).t);
            t_exit = std::max(
                t_exit, integrate_to_event(reversed(e.specS), {tip, 0}, exit_ball, e.cfg).t);
        }
    } catch (const Error&) {
        throw Error(ErrorCode::construction,
                    "strip boundary arcs never leave the containing ball");
    }
    double U = std::max(t_exit * 1.02, u_need * 1.05);
    if (U > u_cap)
        throw Error(ErrorCode::construction,
                    "strip boundary arcs wrap around before leaving the containing ball");
    return U;
}

/// Longitudinal normalizer knots for one level, in flow-time units.
/// Canonical values are {-2,-1,-1/2,1,2,4}; the -1/2 knot pins the image of
/// the source entry corner, the 4 knot doubles the slope past the exit window.
std::vector<double> level_knots(double t_in, double t_out, double tau_s) {
    double u1a = -t_out, u1b = -t_in, u2a = t_in, u2b = t_out;
    double w = t_out - t_in;
    double eps = 0.01 * w;
    double k1 = u1a + eps, k2 = u1b - eps, k4 = u2a + eps, k5 = u2b - eps;
    // Pin the image of the entry corner when it lands between the windows
    // (the inner-boundary level); on the outer level the corner image hits the
    // exit corner itself, so any interior knot keeps the map monotone.
    double v0 = u1a + tau_s;
    if (!(v0 - k2 > 1e-12 && k4 - v0 > 1e-12)) v0 = 0.5 * (k2 + k4);
    double k6 = k5 + (k5 - k4);
    return {k1, k2, v0, k4, k5, k6};
}

double angle_of(Point p, Point c) {
    double a = std::atan2(p.y - c.y, p.x - c.x) / (2 * M_PI);
    return a - std::floor(a);
}

/// Raw-angle range of a short arc, unwrapped around its first point.
std::pair<double, double> arc_angle_range(const Polyline& arc, Point c) {
    double a0 = angle_of(arc.front(), c);
    double lo = a0, hi = a0;
    for (const auto& p : arc) {
        double a = angle_of(p, c);
        if (a - a0 > 0.5) a -= 1;
        if (a0 - a > 0.5) a += 1;
        lo = std::min(lo, a), hi = std::max(hi, a);
    }
    return {lo, hi};
}

}  // namespace

JordanCurve outer_boundary_saddle(double lambda2) {
    if (!(lambda2 > 0))
        throw Error(ErrorCode::precondition, "saddle heteroclinic cycle needs lambda > 0");
    return JordanCurve(saddle_cycle_points(lambda2, 500));
}

JordanCurve outer_boundary_cusp(double lambda1) {
    if (!(lambda1 < 0))
        throw Error(ErrorCode::precondition, "cusp homoclinic loop needs lambda < 0");
    return JordanCurve(cusp_loop_points(lambda1, 700));
}

std::pair<double, double> strip_boundary_intersections(double lambda1, double lambda2,
                                                       double alpha) {
    Engine e = make_engine(Family::Saddle, lambda1, lambda2, IntegratorConfig{});
    if (!e.strip_first)
        throw Error(ErrorCode::precondition,
                    "closed-form intersections assume lambda1 > lambda2 > 0");
    return engine_corners(e, alpha);
}

double compute_tau1(double lambda1, double lambda2, double alpha, const IntegratorConfig& cfg) {
    Engine e = make_engine(Family::Saddle, lambda1, lambda2, cfg);
    auto [xi, yi] = engine_corners(e, alpha);
    return engine_transit(e, xi, yi);
}

double psi_bar(const VectorFieldSpec& strip_spec, double tau, Point p,
               const IntegratorConfig& cfg) {
    return flow_map(strip_spec, tau, p, cfg).y + p.y;
}

InnerBoundary find_inner_boundary(double lambda1, double lambda2, double beta, double tau1,
                                  const IntegratorConfig& cfg) {
    Engine e = make_engine(Family::Saddle, lambda1, lambda2, cfg);
    BetaResult r = inner_from_beta(e, beta, tau1);
    InnerBoundary ib;
    ib.sigma_hat = r.sigma_hat;
    ib.level = r.level;
    ib.q_hat = r.q_hat;
    JordanCurve outer = engine_outer(e);
    double chord = 1e-3 * outer_diameter(outer.pts);
    BoundingBox box{-10 * (1 + lambda1), 10 * (1 + lambda1), -10 * (1 + lambda1),
                    10 * (1 + lambda1)};
    LevelCurve lc = trace_level_set(e.HA, r.level, r.q_hat, cfg, box, chord);
    if (!lc.closed)
        throw Error(ErrorCode::construction, "inner boundary level curve did not close");
    ib.curve = JordanCurve(lc.points);
    return ib;
}

double choose_tau2(std::shared_ptr<const AnnulusChart> chart, const VectorFieldSpec& annulus_spec,
                   double inner_period, int m, const IntegratorConfig& cfg) {
    if (!(inner_period > 0)) throw Error(ErrorCode::precondition, "inner period must be positive");
    Window src{0, 0.5};
    int best = 0;
    for (double tau = inner_period; tau <= cfg.max_time; tau *= 1.5) {
        LiftedMap f = lift_flow_through_annulus(chart, annulus_spec, tau, cfg);
        try {
            TwistCertificate cert = check_annular_twist(f, src, 32);
            best = std::max(best, cert.m);
            if (cert.m >= m && cert.margin > 0) return tau;
        } catch (const Error& err) {
            if (err.code() != ErrorCode::twist_failure) throw;
        }
    }
    std::ostringstream os;
    os << "no pulse duration on the search grid reaches winding " << m
       << " (best achieved: " << best << ")";
    throw Error(ErrorCode::construction, os.str());
}

PulseForcing Construction::forcing() const {
    if (strip_first) return {lambda1, lambda2, tau_strip, tau_annulus};
    return {lambda1, lambda2, tau_annulus, tau_strip};
}

Provenance Construction::provenance() const {
    Provenance p;
    p.alpha = alpha, p.beta = beta;
    p.x_star = x_star, p.x_int = x_int, p.y_int = y_int;
    p.sigma_hat = sigma_hat, p.inner_level = inner_level;
    PulseForcing f = forcing();
    p.tau1 = f.tau1, p.tau2 = f.tau2;
    return p;
}

namespace {

Construction build_impl(Family family, double l1, double l2, int m, const IntegratorConfig& cfg) {
    if (m < 2) throw Error(ErrorCode::precondition, "requested winding must be at least 2");
    Engine e = make_engine(family, l1, l2, cfg);

    Construction out;
    out.family = family;
    out.lambda1 = l1, out.lambda2 = l2;
    out.strip_first = e.strip_first;
    out.x_star = e.x_star;

    // --- alpha: default midpoint, small perturbations on transversality failure
    double a0 = 0.5 * (e.a_lo + e.a_hi);
    double alpha = 0, x_int = 0, y_int = 0, tau_s = 0;
    std::string last_err = "no admissible alpha";
    bool ok = false;
    for (double f : {1.0, 1.01, 0.99, 1.02, 0.98}) {
        double a = a0 * f;
        if (!(a > e.a_lo && a < e.a_hi)) continue;
        try {
            auto [xi, yi] = engine_corners(e, a);
            Point entry = engine_entry(e, xi, yi);
            double tv = std::abs(dot(e.HA.gradient(entry), eval_field(e.specS, entry)));
            if (tv < 1e-6) {
                last_err = "strip orbit is tangent to the outer boundary";
                continue;
            }
            tau_s = engine_transit(e, xi, yi);
            alpha = a, x_int = xi, y_int = yi;
            ok = true;
            break;
        } catch (const Error& err) {
            last_err = err.what();
        }
    }
    if (!ok) throw Error(ErrorCode::construction, last_err);
    out.alpha = alpha, out.x_int = x_int, out.y_int = y_int, out.tau_strip = tau_s;

    // --- beta march: the q-orbit must cross the annulus more slowly than
    // half the strip transit, so candidates on both sides of alpha are tried
    // (toward the origin first, where transit times grow)
    double ca = e.HS.value({alpha, 0});
    std::vector<double> beta_candidates;
    for (int k = 1; k <= 9; ++k) {
        double bp = alpha + k * (e.a_hi - alpha) / 10.0;
        double bm = alpha - k * (alpha - e.a_lo) / 10.0;
        if (bp > e.a_lo && bp < e.a_hi && bp != alpha) beta_candidates.push_back(bp);
        if (bm > e.a_lo && bm < e.a_hi && bm != alpha) beta_candidates.push_back(bm);
    }
    // pick the candidate whose inner boundary sits deepest between the outer
    // level and the strip tips (thin annuli make the lift ill-conditioned)
    BetaResult br;
    double best_score = 0;
    std::string beta_err = "no admissible beta";
    for (double b : beta_candidates) {
        try {
            BetaResult r = inner_from_beta(e, b, tau_s);
            double tip_max = std::max(e.HA.value({alpha, 0}), e.HA.value({b, 0}));
            double score = std::min(e.L_out - r.level, r.level - tip_max);
            if (!(score > 0)) {
                beta_err = "inner boundary does not separate the strip tips from the annulus";
                continue;
            }
            // the entry corner must return inside the exit window on the beta
            // level too, which bounds the excess transit by the full transit
            if (!(r.t_out - tau_s / 2 < 0.9 * tau_s)) {
                beta_err = "beta orbit crosses the annulus too slowly";
                continue;
            }
            if (score > best_score) best_score = score, br = r;
        } catch (const Error& err) {
            beta_err = err.what();
        }
    }
    if (!(best_score > 0)) throw Error(ErrorCode::construction, beta_err);
    out.beta = br.beta, out.sigma_hat = br.sigma_hat, out.inner_level = br.level;
    double cb = e.HS.value({br.beta, 0});

    // --- boundary curves
    JordanCurve outer = engine_outer(e);
    double diam = outer_diameter(outer.pts);
    double chord = 2e-3 * diam;
    BoundingBox box{-20 * (1 + std::abs(e.lA)), 20 * (1 + std::abs(e.lA)),
                    -20 * (1 + std::abs(e.lA)), 20 * (1 + std::abs(e.lA))};
    LevelCurve lc = trace_level_set(e.HA, br.level, br.q_hat, e.cfg, box, 0.125 * chord);
    if (!lc.closed)
        throw Error(ErrorCode::construction, "inner boundary level curve did not close");
    JordanCurve inner(lc.points);

    // containing-ball estimate (mirrors the linkage check's construction)
    Point cen{0, 0};
    size_t nout = outer.pts.size() - 1;
    for (size_t i = 0; i < nout; ++i) cen = cen + outer.pts[i];
    cen = (1.0 / static_cast<double>(nout)) * cen;
    double r_max = 0;
    for (const auto& p : outer.pts) r_max = std::max(r_max, dist(p, cen));

    // --- per-level crossing times; check closed forms against the integration
    double tin_a = backward_crossing_time(e, alpha, br.level);
    double tout_a = backward_crossing_time(e, alpha, e.L_out);
    double tin_b = backward_crossing_time(e, br.beta, br.level);
    double tout_b = backward_crossing_time(e, br.beta, e.L_out);
    if (std::abs(tout_a - tau_s / 2) > 1e-6)
        throw Error(ErrorCode::construction,
                    "closed-form outer crossing disagrees with the event integration");
    if (std::abs(tin_b - tau_s / 2) > 1e-6)
        throw Error(ErrorCode::construction,
                    "inner-boundary crossing is not at half the strip transit time");

    // --- strip boundary arcs, long enough to leave the ball
    double u_cap = e.cfg.max_time;
    if (family == Family::Saddle && e.strip_first) {
        double pa = orbit_period(e.specS, {x_int, -y_int}, e.cfg);
        double pb = orbit_period(e.specS, br.q_hat, e.cfg);
        u_cap = 0.46 * std::min(pa, pb);
    }
    double U = arc_extent(e, alpha, br.beta, std::max(tout_a, tout_b), cen, 1.13 * r_max, u_cap);
    Polyline arc_a = level_arc(e, alpha, -U, U, chord);
    Polyline arc_b = level_arc(e, br.beta, -U, U, chord);

    // --- phase A: raw flow-time charts, linkage
    double guard = 0.02 * std::abs(alpha - br.beta);
    double tip_lo = std::min(alpha, br.beta) - guard;
    double tip_hi = std::max(alpha, br.beta) + guard;
    if (family == Family::Saddle && e.strip_first) tip_lo = std::max(tip_lo, -e.lS + 1e-9);
    tip_hi = std::min(tip_hi, -1e-9);

    StripNormalizer ident{{0, 1}, {0, 1}, {0, 1}};
    auto chart_s0 = std::make_shared<FlowStripChart>(e.specS, cb, ca, tip_lo, tip_hi,
                                                     e.tip_rising, ident, e.cfg);
    TopStrip S0{arc_b, arc_a, -U - 1, U + 1, chart_s0};
    S0.validate();

    CircleNormalizer circ0{{0, 1}, {0, 2}};
    auto chart_a0 = std::make_shared<IntegralAnnulusChart>(e.HA, br.level, e.L_out, e.center,
                                                           circ0, 1.3 * r_max);
    TopAnnulus A0{inner, outer, e.center, chart_a0};
    A0.validate();

    out.link = verify_linkage(A0, S0);

    // --- final charts: crossing rectangles pinned to the canonical windows
    auto [lo1, hi1] = arc_angle_range(out.link.R1.on_lower, e.center);
    auto [lo2, hi2] = arc_angle_range(out.link.R1.on_upper, e.center);
    double a1 = 0, a2 = 0;
    if (hi1 <= lo2) {
        // window strictly between the two side arcs, slightly deflated
        a1 = hi1, a2 = lo2;
        double wa = a2 - a1;
        a1 += 0.01 * wa, a2 -= 0.01 * wa;
    } else if (hi2 <= lo1) {
        a1 = hi2, a2 = lo1;
        double wa = a2 - a1;
        a1 += 0.01 * wa, a2 -= 0.01 * wa;
    } else {
        // oblique crossing: the side arcs overlap in angle, so take the full
        // angular extent of the rectangle instead
        a1 = std::min(lo1, lo2), a2 = std::max(hi1, hi2);
        double wa = a2 - a1;
        a1 -= 0.01 * wa, a2 += 0.01 * wa;
    }
    double w1 = 1 - a2;
    while (w1 <= a2) w1 += 1;
    double w2 = w1 + (a2 - a1);
    if (!(w2 < a1 + 1))
        throw Error(ErrorCode::construction, "crossing and mirror windows overlap");
    CircleNormalizer circ{{a1, a2, w1, w2, a1 + 1}, {0, 0.5, 1, 1.5, 2}};
    auto chart_a = std::make_shared<IntegralAnnulusChart>(e.HA, br.level, e.L_out, e.center, circ,
                                                          1.3 * r_max);
    out.A = TopAnnulus{inner, outer, e.center, chart_a};

    StripNormalizer ns{level_knots(tin_b, tout_b, tau_s), level_knots(tin_a, tout_a, tau_s),
                       {-2, -1, -0.5, 1, 2, 4}};
    auto chart_sf = std::make_shared<FlowStripChart>(e.specS, cb, ca, tip_lo, tip_hi,
                                                     e.tip_rising, ns, e.cfg);
    double xmin = std::min(ns.canon(-U, -1), ns.canon(-U, 1));
    double xmax = std::max(ns.canon(U, -1), ns.canon(U, 1));
    out.S = TopStrip{arc_b, arc_a, xmin, xmax, chart_sf};

    // trimmed strip for invariance sampling (flow images stay liftable); the
    // chord is much finer than the drawing chord because the off-curve sagitta
    // is amplified by the thin transverse scale of the lift
    // entry-side windows only: their half-map images stay inside the crossing
    // region (strip orbits may blow up in finite time past the exit)
    double wb = tout_b - tin_b, wav = tout_a - tin_a;
    double chord_fine = 0.02 * chord;
    Polyline trim_b =
        level_arc(e, br.beta, -(tout_b + 0.1 * wb), -(tin_b - 0.1 * wb), chord_fine);
    Polyline trim_a =
        level_arc(e, alpha, -(tout_a + 0.1 * wav), -(tin_a - 0.1 * wav), chord_fine);
    out.S_check = TopStrip{trim_b, trim_a, -1e9, 1e9, chart_sf};

    // fine annulus boundaries for the invariance check (validation skipped:
    // they refine the already-validated curves). Interpolating between curve
    // points leaves the level by ~ chord^2 * |H''| / 8, and the lift amplifies
    // that by 2 / (level width); keep the induced residual well under 1e-6.
    double ann_width = e.L_out - br.level;
    double chord_ann = std::clamp(std::sqrt(2e-7 * ann_width), 1e-6 * diam, 1e-4 * diam);
    LevelCurve lc_fine = trace_level_set(e.HA, br.level, br.q_hat, e.cfg, box, chord_ann);
    if (!lc_fine.closed)
        throw Error(ErrorCode::construction, "inner boundary level curve did not close");
    JordanCurve inner_fine, outer_fine;
    inner_fine.pts = lc_fine.points;
    outer_fine.pts = engine_outer_points(
        e, std::max(20000, static_cast<int>(std::ceil(3 * diam / chord_ann))));
    TopAnnulus A_check{inner_fine, outer_fine, e.center, chart_a};

    // --- certification
    PlaneMap f_strip = [&e, tau_s](Point p) { return flow_map(e.specS, tau_s, p, e.cfg); };
    double res_s = check_boundary_invariance(f_strip, out.S_check, 24);
    if (res_s > 1e-6)
        throw Error(ErrorCode::certification, "strip boundary is not flow-invariant");

    LiftedMap lift_strip = lift_through_strip(chart_sf, f_strip);
    Window src_s{-2, -1}, tgt_s{1, 2};
    out.strip_twist = check_strip_twist(lift_strip, src_s, tgt_s, 32);
    if (!out.strip_twist.passed)
        throw Error(ErrorCode::twist_failure, "strip twist inequalities fail");

    // all annulus-side integrations conserve H_A by projection: orbits near
    // the separatrix level are transversally unstable over the long pulses
    IntegratorConfig acfg = e.cfg;
    acfg.invariant = [fi = e.HA](Point p) { return fi.value(p); };
    acfg.invariant_gradient = [fi = e.HA](Point p) { return fi.gradient(p); };

    double p_in = orbit_period(e.specA, br.q_hat, acfg);
    out.tau_annulus = choose_tau2(chart_a, e.specA, p_in, m, acfg);

    PlaneMap f_ann = [&e, &out, acfg](Point p) {
        return flow_map(e.specA, out.tau_annulus, p, acfg);
    };
    double res_a = check_boundary_invariance(f_ann, A_check, 24);
    if (res_a > 1e-6)
        throw Error(ErrorCode::certification, "annulus boundary is not flow-invariant");

    LiftedMap lift_ann = lift_flow_through_annulus(chart_a, e.specA, out.tau_annulus, acfg);
    Window src_a{0, 0.5};
    out.annular_twist = check_annular_twist(lift_ann, src_a, 32);
    out.annular_twist.boundary_residual = std::max(res_s, res_a);
    if (out.annular_twist.m < m || !(out.annular_twist.margin > 0))
        throw Error(ErrorCode::twist_failure, "annular twist lost the requested winding");

    out.K = crossing_sets(lift_ann, src_a, out.annular_twist, 48);

    StretchResult sr = stretch_check(lift_strip, src_s, tgt_s, {}, 8);
    if (!sr.passed)
        throw Error(ErrorCode::certification, "strip stretching fails: " + sr.reason);
    for (size_t i = 0; i < out.K.ells.size(); ++i) {
        int ell = out.K.ells[i];
        Window tgt{2.0 * ell + 1, 2.0 * ell + 1.5};
        StretchResult ar = stretch_check(lift_ann, src_a, tgt, out.K.cells[i], 8);
        if (!ar.passed)
            throw Error(ErrorCode::certification, "annular stretching fails: " + ar.reason);
    }

    std::string comp = e.strip_first ? "strip-first" : "annulus-first";
    out.certificate = assemble_chaos_certificate(out.strip_twist, out.annular_twist, out.system(),
                                                 comp, out.K.nonempty(), 48);
    return out;
}

}  // namespace

Construction build_saddle(double lambda1, double lambda2, int m, const IntegratorConfig& cfg) {
    return build_impl(Family::Saddle, lambda1, lambda2, m, cfg);
}

Construction build_cusp(double lambda1, double lambda2, int m, const IntegratorConfig& cfg) {
    return build_impl(Family::Cusp, lambda1, lambda2, m, cfg);
}

}  // namespace revpulse
