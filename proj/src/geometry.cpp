#include "revpulse/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace revpulse {

// --- polyline utilities -----------------------------------------------------

double polyline_length(const Polyline& c) {
    double len = 0;
    for (size_t i = 1; i < c.size(); ++i) len += dist(c[i - 1], c[i]);
    return len;
}

Point polyline_eval(const Polyline& c, double s) {
    if (c.empty()) throw Error(ErrorCode::geometric_failure, "empty polyline");
    if (s <= 0) return c.front();
    const double smax = static_cast<double>(c.size() - 1);
    if (s >= smax) return c.back();
    const size_t i = static_cast<size_t>(s);
    const double f = s - static_cast<double>(i);
    return c[i] + f * (c[i + 1] - c[i]);
}

Polyline mirror(const Polyline& c) {
    Polyline out;
    out.reserve(c.size());
    for (Point p : c) out.push_back(mirror(p));
    return out;
}

namespace {

// Proper segment intersection; collinear overlaps are ignored (measure zero
// for the transversal crossings this module deals with).
std::optional<std::pair<double, double>> segment_hit(Point a, Point b, Point c, Point d) {
    const Point r = b - a, s = d - c;
    const double denom = cross(r, s);
    const double scale = norm(r) * norm(s);
    if (std::abs(denom) <= 1e-14 * (scale + 1e-300)) return std::nullopt;
    const Point ca = c - a;
    const double t = cross(ca, s) / denom;
    const double u = cross(ca, r) / denom;
    if (t < -1e-12 || t > 1 + 1e-12 || u < -1e-12 || u > 1 + 1e-12) return std::nullopt;
    return std::make_pair(std::clamp(t, 0.0, 1.0), std::clamp(u, 0.0, 1.0));
}

}  // namespace

std::vector<CurveHit> intersect_polylines(const Polyline& a, const Polyline& b) {
    std::vector<CurveHit> hits;
    for (size_t i = 0; i + 1 < a.size(); ++i) {
        for (size_t j = 0; j + 1 < b.size(); ++j) {
            if (auto h = segment_hit(a[i], a[i + 1], b[j], b[j + 1])) {
                CurveHit hit;
                hit.s = static_cast<double>(i) + h->first;
                hit.t = static_cast<double>(j) + h->second;
                hit.p = polyline_eval(a, hit.s);
                // Skip duplicates at shared segment endpoints.
                bool dup = false;
                for (const auto& prev : hits)
                    if (dist(prev.p, hit.p) < 1e-10) dup = true;
                if (!dup) hits.push_back(hit);
            }
        }
    }
    return hits;
}

Polyline sub_polyline(const Polyline& c, double s0, double s1, bool wrap) {
    const double smax = static_cast<double>(c.size() - 1);
    Polyline out;
    if (!wrap) {
        if (s1 < s0) std::swap(s0, s1);
        out.push_back(polyline_eval(c, s0));
        for (size_t i = static_cast<size_t>(std::floor(s0)) + 1;
             i < c.size() && static_cast<double>(i) < s1; ++i)
            out.push_back(c[i]);
        out.push_back(polyline_eval(c, s1));
    } else {
        // forward from s0 to s1 going through the seam if necessary
        double span = s1 - s0;
        if (span <= 0) span += smax;
        out.push_back(polyline_eval(c, s0));
        double s = std::floor(s0) + 1;
        for (double covered = s - s0; covered < span; s += 1.0, covered += 1.0) {
            double si = s;
            if (si >= smax) si -= smax;
            out.push_back(polyline_eval(c, si));
        }
        out.push_back(polyline_eval(c, s1));
    }
    // drop degenerate duplicates
    Polyline clean;
    for (const auto& p : out)
        if (clean.empty() || dist(clean.back(), p) > 1e-13) clean.push_back(p);
    if (clean.size() < 2) clean.push_back(out.back());
    return clean;
}

bool point_in_polygon(Point p, const Polyline& poly) {
    bool inside = false;
    const size_t n = poly.size();
    for (size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point a = poly[i], b = poly[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double xint = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if (p.x < xint) inside = !inside;
        }
    }
    return inside;
}

double polygon_signed_area(const Polyline& poly) {
    double acc = 0;
    for (size_t i = 0; i + 1 < poly.size(); ++i) acc += cross(poly[i], poly[i + 1]);
    return acc / 2;
}

bool is_simple(const Polyline& c, bool closed) {
    const size_t n = c.size();
    if (n < 2) return true;
    const size_t segs = n - 1;
    for (size_t i = 0; i < segs; ++i) {
        for (size_t j = i + 2; j < segs; ++j) {
            if (closed && i == 0 && j == segs - 1) continue;  // seam adjacency
            if (segment_hit(c[i], c[i + 1], c[j], c[j + 1])) return false;
        }
    }
    return true;
}

namespace {

double dist_to_segment(Point p, Point a, Point b) {
    const Point ab = b - a;
    const double len2 = dot(ab, ab);
    if (len2 < 1e-300) return dist(p, a);
    const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
    return dist(p, a + t * ab);
}

double dist_to_polyline(Point p, const Polyline& c) {
    double best = dist(p, c.front());
    for (size_t i = 0; i + 1 < c.size(); ++i)
        best = std::min(best, dist_to_segment(p, c[i], c[i + 1]));
    return best;
}

double directed_hausdorff(const Polyline& a, const Polyline& b) {
    double worst = 0;
    for (const auto& p : a) worst = std::max(worst, dist_to_polyline(p, b));
    return worst;
}

}  // namespace

double hausdorff_distance(const Polyline& a, const Polyline& b) {
    return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a));
}

Polyline assemble_loop(std::vector<Polyline> arcs, double tol) {
    if (arcs.empty()) throw Error(ErrorCode::geometric_failure, "no arcs to assemble");
    Polyline loop = arcs.front();
    arcs.erase(arcs.begin());
    while (!arcs.empty()) {
        const Point end = loop.back();
        size_t best = arcs.size();
        bool reversed = false;
        double best_gap = tol;
        for (size_t i = 0; i < arcs.size(); ++i) {
            const double g0 = dist(end, arcs[i].front());
            const double g1 = dist(end, arcs[i].back());
            if (g0 <= best_gap) { best = i; reversed = false; best_gap = g0; }
            if (g1 < best_gap) { best = i; reversed = true; best_gap = g1; }
        }
        if (best == arcs.size())
            throw Error(ErrorCode::geometric_failure,
                        "cannot assemble boundary loop: endpoint gap exceeds tolerance");
        Polyline piece = arcs[best];
        if (reversed) std::reverse(piece.begin(), piece.end());
        loop.insert(loop.end(), piece.begin() + 1, piece.end());
        arcs.erase(arcs.begin() + best);
    }
    if (dist(loop.front(), loop.back()) > tol)
        throw Error(ErrorCode::geometric_failure, "assembled boundary does not close");
    loop.back() = loop.front();
    return loop;
}

JordanCurve::JordanCurve(Polyline p) : pts(std::move(p)) {
    if (pts.size() < 4)
        throw Error(ErrorCode::precondition, "Jordan curve needs at least 3 distinct points");
    const double diam = polyline_length(pts);
    if (dist(pts.front(), pts.back()) > 1e-9 * (1 + diam))
        throw Error(ErrorCode::not_closed, "Jordan curve is not closed");
    pts.back() = pts.front();
    if (!is_simple(pts, true))
        throw Error(ErrorCode::precondition, "Jordan curve is self-intersecting");
}

// --- charts -------------------------------------------------------------------

RadialAnnulusChart::RadialAnnulusChart(Point c, double ri, double ro)
    : center(c), r_inner(ri), r_outer(ro) {
    if (!(0 < ri && ri < ro))
        throw Error(ErrorCode::precondition, "need 0 < r_inner < r_outer");
}

Point RadialAnnulusChart::from_plane(Point p) const {
    const Point d = p - center;
    const double r = norm(d);
    double theta = std::atan2(d.y, d.x) / std::numbers::pi;  // period 2
    if (theta < 0) theta += 2;
    const double rho = -1 + 2 * (r - r_inner) / (r_outer - r_inner);
    return {theta, rho};
}

Point RadialAnnulusChart::to_plane(Point c) const {
    const double ang = c.x * std::numbers::pi;
    const double r = r_inner + (c.y + 1) / 2 * (r_outer - r_inner);
    return {center.x + r * std::cos(ang), center.y + r * std::sin(ang)};
}

namespace {

double piecewise_linear(const std::vector<double>& xs, const std::vector<double>& ys,
                        double x) {
    const size_t n = xs.size();
    size_t i = 0;
    if (x <= xs.front()) {
        i = 0;
    } else if (x >= xs[n - 2]) {
        i = n - 2;
    } else {
        i = static_cast<size_t>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin()) - 1;
    }
    const double slope = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
    return ys[i] + slope * (x - xs[i]);
}

}  // namespace

double StripNormalizer::canon(double u, double y) const {
    const double t = std::clamp((y + 1) / 2, 0.0, 1.0);
    std::vector<double> knots(u_lo.size());
    for (size_t i = 0; i < knots.size(); ++i) knots[i] = (1 - t) * u_lo[i] + t * u_hi[i];
    return piecewise_linear(knots, x, u);
}

double StripNormalizer::inverse(double xc, double y) const {
    const double t = std::clamp((y + 1) / 2, 0.0, 1.0);
    std::vector<double> knots(u_lo.size());
    for (size_t i = 0; i < knots.size(); ++i) knots[i] = (1 - t) * u_lo[i] + t * u_hi[i];
    return piecewise_linear(x, knots, xc);
}

FlowStripChart::FlowStripChart(VectorFieldSpec spec, double level_lo, double level_hi,
                               double tip_x_min, double tip_x_max, bool tip_rising,
                               StripNormalizer norm, IntegratorConfig cfg)
    : spec_(spec),
      fi_(spec.family, spec.lambda),
      level_lo_(level_lo),
      level_hi_(level_hi),
      tip_x_min_(tip_x_min),
      tip_x_max_(tip_x_max),
      tip_rising_(tip_rising),
      norm_(std::move(norm)),
      cfg_(cfg) {
    if (level_lo == level_hi)
        throw Error(ErrorCode::precondition, "strip boundary levels must differ");
}

double FlowStripChart::transverse(Point p) const {
    return -1 + 2 * (fi_.value(p) - level_lo_) / (level_hi_ - level_lo_);
}

double FlowStripChart::level_of(double y) const {
    return level_lo_ + (std::clamp(y, -1.0, 1.0) + 1) / 2 * (level_hi_ - level_lo_);
}

Point FlowStripChart::tip_point(double y) const {
    const double level = level_of(y);
    double a = tip_x_min_, b = tip_x_max_;
    auto f = [&](double x) { return fi_.value({x, 0}) - level; };
    double fa = f(a), fb = f(b);
    if (fa == 0) return {a, 0};
    if (fb == 0) return {b, 0};
    if (fa * fb > 0)
        throw Error(ErrorCode::out_of_domain, "level has no turning point in the tip bracket");
    for (int i = 0; i < 200 && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++i) {
        const double m = (a + b) / 2, fm = f(m);
        if (fm == 0) return {m, 0};
        if ((fm > 0) == (fa > 0)) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    return {(a + b) / 2, 0};
}

double FlowStripChart::flow_time(Point p) const {
    if (std::abs(p.y) < 1e-13) {
        if (p.x >= tip_x_min_ - 1e-9 && p.x <= tip_x_max_ + 1e-9) return 0.0;
        throw Error(ErrorCode::out_of_domain, "symmetry-axis point outside the tip section");
    }
    const bool after_tip = (p.y > 0) == tip_rising_;
    EventFunction ev;
    ev.g = [](Point q) { return q.y; };
    if (after_tip) {
        // integrate backwards: the tip crossing reverses its direction
        ev.direction = tip_rising_ ? EventDirection::falling : EventDirection::rising;
        const Rhs back = [this](Point q) { return -1.0 * eval_field(spec_, q); };
        return integrate_to_event(back, p, ev, cfg_).t;
    }
    ev.direction = tip_rising_ ? EventDirection::rising : EventDirection::falling;
    return -integrate_to_event(spec_, p, ev, cfg_).t;
}

bool FlowStripChart::plausibly_inside(Point p) const {
    return std::abs(transverse(p)) <= 1.05;
}

Point FlowStripChart::from_plane(Point p) const {
    const double y = transverse(p);
    return {norm_.canon(flow_time(p), y), y};
}

Point FlowStripChart::to_plane(Point c) const {
    const Point tip = tip_point(c.y);
    const double u = norm_.inverse(c.x, c.y);
    if (u == 0.0) return tip;
    return flow_map(spec_, u, tip, cfg_);
}

double CircleNormalizer::map(double a) const {
    const double t = a - raw.front();
    const double k = std::floor(t);
    const double a_red = raw.front() + (t - k);
    return piecewise_linear(raw, canon, a_red) + 2 * k;
}

double CircleNormalizer::inverse(double c) const {
    const double t = c - canon.front();
    const double k = std::floor(t / 2);
    const double c_red = canon.front() + (t - 2 * k);
    return piecewise_linear(canon, raw, c_red) + k;
}

IntegralAnnulusChart::IntegralAnnulusChart(FirstIntegral fi, double level_in,
                                           double level_out, Point center,
                                           CircleNormalizer norm, double r_max)
    : fi_(fi),
      level_in_(level_in),
      level_out_(level_out),
      center_(center),
      norm_(std::move(norm)),
      r_max_(r_max) {
    if (level_in == level_out)
        throw Error(ErrorCode::precondition, "annulus boundary levels must differ");
}

double IntegralAnnulusChart::radial(Point p) const {
    return -1 + 2 * (fi_.value(p) - level_in_) / (level_out_ - level_in_);
}

double IntegralAnnulusChart::raw_angle(Point p) const {
    const Point d = p - center_;
    double a = std::atan2(d.y, d.x) / (2 * std::numbers::pi);
    if (a < 0) a += 1;
    return a;
}

Point IntegralAnnulusChart::from_plane(Point p) const {
    double theta = norm_.map(raw_angle(p));
    theta -= 2 * std::floor(theta / 2);
    return {theta, radial(p)};
}

Point IntegralAnnulusChart::to_plane(Point c) const {
    const double a = norm_.inverse(c.x);
    const double ang = 2 * std::numbers::pi * a;
    const Point dir{std::cos(ang), std::sin(ang)};
    const double level =
        level_in_ + (std::clamp(c.y, -1.0, 1.0) + 1) / 2 * (level_out_ - level_in_);
    auto f = [&](double r) { return fi_.value(center_ + r * dir) - level; };
    const double tol = 1e-9 * std::max(1.0, std::abs(level));
    // Refine a candidate tangential attainment: ternary-search the max of f
    // over [a_lo, a_hi]; on success return the attaining radius.
    auto refine_max = [&](double a_lo, double a_hi, double& r_out) {
        for (int i = 0; i < 200 && a_hi - a_lo > 1e-15 * std::max(1.0, a_hi); ++i) {
            const double m1 = a_lo + (a_hi - a_lo) / 3;
            const double m2 = a_hi - (a_hi - a_lo) / 3;
            if (f(m1) < f(m2))
                a_lo = m1;
            else
                a_hi = m2;
        }
        r_out = (a_lo + a_hi) / 2;
        return f(r_out) >= -tol;
    };
    // Walk outward and take the FIRST attainment of the level in radius:
    // either a transversal sign change or a tangential local max within
    // tolerance (straight separatrix pieces and rays passing near a saddle
    // corner attain the level without a sign flip). Order matters: past a
    // corner the level set continues along an unbounded escape branch which
    // must never be selected.
    const int scan = 256;
    const double dr = r_max_ / scan;
    double f_pp = 0, r_p = 0, f_p = f(0);
    for (int i = 1; i <= scan; ++i) {
        const double r = r_max_ * i / scan;
        const double fr = f(r);
        if ((fr >= 0) != (f_p >= 0)) {
            double r_lo = r_p, f_lo = f_p, r_hi = r;
            for (int j = 0; j < 200 && r_hi - r_lo > 1e-15 * std::max(1.0, r_hi); ++j) {
                const double m = (r_lo + r_hi) / 2;
                if ((f(m) >= 0) == (f_lo >= 0)) {
                    r_lo = m;
                    f_lo = f(m);
                } else {
                    r_hi = m;
                }
            }
            return center_ + ((r_lo + r_hi) / 2) * dir;
        }
        if (i >= 2 && f_p < 0 && f_p > f_pp && f_p >= fr &&
            f_p > -1e-2 * std::max(1.0, std::abs(level))) {
            double r_best;
            if (refine_max(r_p - dr, r, r_best)) return center_ + r_best * dir;
        }
        f_pp = f_p;
        r_p = r;
        f_p = fr;
    }
    // possible max at the outermost grid point
    if (f_p < 0 && f_p > f_pp) {
        double r_best;
        if (refine_max(r_p - dr, r_max_, r_best)) return center_ + r_best * dir;
    }
    throw Error(ErrorCode::geometric_failure, "no radius attains the requested level");
}

// --- regions ------------------------------------------------------------------

void TopStrip::validate() const {
    if (lower.size() < 2 || upper.size() < 2 || !chart)
        throw Error(ErrorCode::precondition, "strip needs two boundary arcs and a chart");
    if (!(x_min < x_max))
        throw Error(ErrorCode::precondition, "strip window is empty");
    if (!intersect_polylines(lower, upper).empty())
        throw Error(ErrorCode::precondition, "strip boundary arcs intersect");
}

bool TopStrip::contains(Point p, double tol) const {
    if (!chart->plausibly_inside(p)) return false;
    try {
        const Point c = chart->from_plane(p);
        return std::abs(c.y) <= 1 + tol && c.x >= x_min - tol && c.x <= x_max + tol;
    } catch (const Error&) {
        return false;
    }
}

void TopAnnulus::validate() const {
    if (!chart) throw Error(ErrorCode::precondition, "annulus needs a chart");
    if (!intersect_polylines(inner.pts, outer.pts).empty())
        throw Error(ErrorCode::precondition, "annulus boundary curves intersect");
    for (const auto& p : inner.pts)
        if (!outer.contains(p))
            throw Error(ErrorCode::precondition, "inner boundary not inside the outer one");
}

bool TopAnnulus::contains(Point p) const {
    if (!outer.contains(p) && dist_to_polyline(p, outer.pts) > 1e-9) return false;
    if (inner.contains(p) && dist_to_polyline(p, inner.pts) > 1e-9) return false;
    return true;
}

Point strip_lift(const TopStrip& s, Point p) {
    Point c;
    try {
        c = s.chart->from_plane(p);
    } catch (const Error&) {
        throw Error(ErrorCode::out_of_domain, "point outside the strip chart domain");
    }
    if (std::abs(c.y) > 1 + 1e-6 || c.x < s.x_min - 1e-6 || c.x > s.x_max + 1e-6)
        throw Error(ErrorCode::out_of_domain, "point outside the strip");
    return c;
}

Point strip_unlift(const TopStrip& s, Point c) {
    if (std::abs(c.y) > 1 + 1e-9 || c.x < s.x_min - 1e-9 || c.x > s.x_max + 1e-9)
        throw Error(ErrorCode::out_of_domain, "coordinates outside the strip window");
    return s.chart->to_plane(c);
}

Point annulus_lift(const TopAnnulus& a, Point p) {
    Point c;
    try {
        c = a.chart->from_plane(p);
    } catch (const Error&) {
        throw Error(ErrorCode::out_of_domain, "point outside the annulus chart domain");
    }
    if (std::abs(c.y) > 1 + 1e-6)
        throw Error(ErrorCode::out_of_domain, "point outside the closed annulus");
    double theta = c.x / 2;
    theta -= std::floor(theta);
    return {theta, c.y};
}

Point annulus_unlift(const TopAnnulus& a, Point c) {
    if (std::abs(c.y) > 1 + 1e-9)
        throw Error(ErrorCode::out_of_domain, "rho outside [-1,1]");
    return a.chart->to_plane({2 * c.x, c.y});
}

// --- oriented rectangles --------------------------------------------------------

Polyline OrientedRectangle::boundary() const {
    double diam = 0;
    for (const Polyline* arc : {&on_inner, &on_outer, &on_lower, &on_upper})
        diam = std::max(diam, polyline_length(*arc));
    return assemble_loop({on_inner, on_lower, on_outer, on_upper},
                         std::max(1e-9, 1e-3 * diam));
}

bool OrientedRectangle::contains(Point p) const { return point_in_polygon(p, boundary()); }

std::pair<const Polyline*, const Polyline*> OrientedRectangle::minus_sides() const {
    if (minus_on == MinusOn::annulus) return {&on_inner, &on_outer};
    return {&on_lower, &on_upper};
}

// --- linkage --------------------------------------------------------------------

namespace {

struct ArcCrossings {
    // hits of one strip boundary arc with the two annulus curves,
    // sorted along the strip arc
    struct Hit {
        double s;       // parameter on the strip arc
        double t;       // parameter on the annulus curve
        bool on_outer;  // which annulus curve
        Point p;
    };
    std::vector<Hit> hits;
};

ArcCrossings cross_arc(const Polyline& arc, const TopAnnulus& A) {
    ArcCrossings out;
    for (const auto& h : intersect_polylines(arc, A.outer.pts))
        out.hits.push_back({h.s, h.t, true, h.p});
    for (const auto& h : intersect_polylines(arc, A.inner.pts))
        out.hits.push_back({h.s, h.t, false, h.p});
    std::sort(out.hits.begin(), out.hits.end(),
              [](const auto& a, const auto& b) { return a.s < b.s; });
    return out;
}

/// Arc of a closed curve between two parameters, choosing the side whose
/// interior probes lie inside the strip.
Polyline annulus_arc_inside(const JordanCurve& curve, double t0, double t1,
                            const TopStrip& S) {
    const Polyline cand1 = sub_polyline(curve.pts, t0, t1, true);
    const Polyline cand2 = sub_polyline(curve.pts, t1, t0, true);
    auto inside_score = [&](const Polyline& c) {
        int score = 0;
        for (double f : {0.25, 0.5, 0.75}) {
            const double s = f * static_cast<double>(c.size() - 1);
            if (S.contains(polyline_eval(c, s), 1e-6)) ++score;
        }
        return score;
    };
    const int s1 = inside_score(cand1), s2 = inside_score(cand2);
    if (s1 > s2) return cand1;
    if (s2 > s1) return cand2;
    return polyline_length(cand1) <= polyline_length(cand2) ? cand1 : cand2;
}

Polyline circle_polygon(Point c, double r, int n = 256) {
    Polyline out;
    out.reserve(n + 1);
    for (int i = 0; i <= n; ++i) {
        const double a = 2 * std::numbers::pi * i / n;
        out.push_back({c.x + r * std::cos(a), c.y + r * std::sin(a)});
    }
    out.back() = out.front();
    return out;
}

}  // namespace

Linkage verify_linkage(const TopAnnulus& A, const TopStrip& S) {
    A.validate();
    S.validate();

    const ArcCrossings lo = cross_arc(S.lower, A);
    const ArcCrossings hi = cross_arc(S.upper, A);

    auto count = [](const ArcCrossings& ac, bool outer) {
        int n = 0;
        for (const auto& h : ac.hits) n += h.on_outer == outer;
        return n;
    };
    const int counts[4] = {count(lo, true), count(lo, false), count(hi, true),
                           count(hi, false)};
    for (int c : counts) {
        if (c < 2)
            throw Error(ErrorCode::no_linkage,
                        "strip does not traverse the annulus twice (crossing counts " +
                            std::to_string(counts[0]) + "/" + std::to_string(counts[1]) +
                            "/" + std::to_string(counts[2]) + "/" +
                            std::to_string(counts[3]) + ")");
        if (c > 2)
            throw Error(ErrorCode::ambiguous_linkage,
                        "more than two crossing components (crossing counts " +
                            std::to_string(counts[0]) + "/" + std::to_string(counts[1]) +
                            "/" + std::to_string(counts[2]) + "/" +
                            std::to_string(counts[3]) + ")");
    }
    // expected pattern along each strip boundary: outer, inner, inner, outer
    for (const ArcCrossings* ac : {&lo, &hi}) {
        if (ac->hits.size() != 4 || !ac->hits[0].on_outer || ac->hits[1].on_outer ||
            ac->hits[2].on_outer || !ac->hits[3].on_outer)
            throw Error(ErrorCode::no_linkage,
                        "strip boundary does not cross the annulus in the "
                        "outer-inner-inner-outer pattern");
    }

    Linkage L;

    // rectangle on the first crossing (hits 0-1 along each arc) and on the
    // second (hits 2-3)
    auto build_rect = [&](int a, int b) {
        OrientedRectangle R;
        R.on_lower = sub_polyline(S.lower, lo.hits[a].s, lo.hits[b].s);
        R.on_upper = sub_polyline(S.upper, hi.hits[a].s, hi.hits[b].s);
        const auto& louter = lo.hits[a].on_outer ? lo.hits[a] : lo.hits[b];
        const auto& linner = lo.hits[a].on_outer ? lo.hits[b] : lo.hits[a];
        const auto& uouter = hi.hits[a].on_outer ? hi.hits[a] : hi.hits[b];
        const auto& uinner = hi.hits[a].on_outer ? hi.hits[b] : hi.hits[a];
        R.on_outer = annulus_arc_inside(A.outer, louter.t, uouter.t, S);
        R.on_inner = annulus_arc_inside(A.inner, linner.t, uinner.t, S);
        R.minus_on = OrientedRectangle::MinusOn::annulus;
        return R;
    };
    OrientedRectangle Ra = build_rect(0, 1);
    OrientedRectangle Rb = build_rect(2, 3);
    // order by the strip coordinate: R1 on the smaller-x crossing
    const double xa = S.chart->from_plane(polyline_eval(Ra.on_lower, 0.5)).x;
    const double xb = S.chart->from_plane(polyline_eval(Rb.on_lower, 0.5)).x;
    L.R1 = xa <= xb ? Ra : Rb;
    L.R2 = xa <= xb ? Rb : Ra;

    // gamma1: transverse strip section between the two inner crossings, which
    // must run inside the hole in(inner)
    {
        const double x1 = S.chart->from_plane(lo.hits[1].p).x;
        const double x2 = S.chart->from_plane(lo.hits[2].p).x;
        bool ok = false;
        for (double f : {0.5, 0.4, 0.6, 0.3, 0.7}) {
            const double xs = x1 + f * (x2 - x1);
            Polyline bridge;
            bool good = true;
            for (int i = 0; i <= 32; ++i) {
                const double y = -1 + 2.0 * i / 32;
                const Point p = S.chart->to_plane({xs, y});
                bridge.push_back(p);
                if (0 < i && i < 32 && !A.inner.contains(p)) good = false;
            }
            if (good) {
                L.gamma1 = bridge;
                ok = true;
                break;
            }
        }
        if (!ok)
            throw Error(ErrorCode::no_linkage,
                        "no strip bridge lies inside the inner annulus boundary");
    }

    // gamma2: a radial arc of the annulus avoiding the strip
    {
        bool ok = false;
        for (int k = 0; k < 64 && !ok; ++k) {
            const double theta = 2.0 * k / 64;
            Polyline ray;
            bool good = true;
            for (int i = 0; i <= 16; ++i) {
                const double rho = -1 + 2.0 * i / 16;
                const Point p = A.chart->to_plane({theta, rho});
                ray.push_back(p);
                if (S.contains(p, 1e-6)) good = false;
            }
            if (good && intersect_polylines(ray, S.lower).empty() &&
                intersect_polylines(ray, S.upper).empty()) {
                L.gamma2 = ray;
                ok = true;
            }
        }
        if (!ok)
            throw Error(ErrorCode::no_linkage, "no annulus ray avoids the strip");
    }

    // ball: disk around the annulus centroid
    {
        Point centroid{0, 0};
        for (const auto& p : A.outer.pts) centroid = centroid + p;
        centroid = (1.0 / static_cast<double>(A.outer.pts.size())) * centroid;
        double r = 0;
        for (const auto& p : A.outer.pts) r = std::max(r, dist(centroid, p));
        L.ball = circle_polygon(centroid, 1.1 * r);
        for (const Polyline* arc : {&S.lower, &S.upper}) {
            const auto hits = intersect_polylines(*arc, L.ball);
            const bool ends_out = dist(arc->front(), centroid) > 1.1 * r &&
                                  dist(arc->back(), centroid) > 1.1 * r;
            if (hits.size() != 2 || !ends_out)
                throw Error(ErrorCode::no_linkage,
                            "strip does not traverse the containing ball in two bridges");
        }
    }

    return L;
}

// --- lifted maps -----------------------------------------------------------------

LiftedMap lift_through_strip(std::shared_ptr<const StripChart> chart, PlaneMap f) {
    return [chart, f = std::move(f)](Point c) {
        return chart->from_plane(f(chart->to_plane(c)));
    };
}

LiftedMap lift_flow_through_annulus(std::shared_ptr<const AnnulusChart> chart,
                                    VectorFieldSpec spec, double tau, IntegratorConfig cfg) {
    return [chart, spec, tau, cfg](Point c) {
        const Point p0 = chart->to_plane(c);
        if (tau == 0.0) return Point{c.x, chart->from_plane(p0).y};
        const Trajectory traj = integrate(spec, p0, tau, cfg);

        auto theta_of = [&](double t) { return chart->from_plane(traj.eval(t)).x; };
        auto wrap_diff = [](double d) {
            d = std::fmod(d, 2.0);
            if (d > 1) d -= 2;
            if (d <= -1) d += 2;
            return d;
        };
        double acc = 0;
        // Unwrap over the accepted steps, splitting any interval whose angular
        // jump exceeds half a window (1/4 revolution).
        std::function<void(double, double, double, int)> advance =
            [&](double t0, double th0, double t1, int depth) {
                const double th1 = theta_of(t1);
                const double d = wrap_diff(th1 - th0);
                if (std::abs(d) > 0.5 && depth < 40) {
                    const double tm = (t0 + t1) / 2;
                    advance(t0, th0, tm, depth + 1);
                    advance(tm, theta_of(tm), t1, depth + 1);
                } else {
                    acc += d;
                }
            };
        const auto samples = traj.samples();
        for (size_t i = 0; i + 1 < samples.size(); ++i)
            advance(samples[i].first, theta_of(samples[i].first), samples[i + 1].first, 0);
        const double rho_end = chart->from_plane(traj.back()).y;
        return Point{c.x + acc, rho_end};
    };
}

}  // namespace revpulse
