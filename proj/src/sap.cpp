#include "revpulse/sap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace revpulse {

namespace {

std::vector<Point> boundary_samples(const Polyline& arc, int samples) {
    std::vector<Point> out;
    const double smax = static_cast<double>(arc.size() - 1);
    for (int i = 0; i <= samples; ++i)
        out.push_back(polyline_eval(arc, smax * i / samples));
    return out;
}

double invariance_residual(const PlaneMap& f, const std::vector<Point>& pts,
                           const std::function<Point(Point)>& lift) {
    double worst = 0;
    for (Point p : pts) {
        const Point q = f(p);
        Point c;
        try {
            c = lift(q);
        } catch (const Error&) {
            throw Error(ErrorCode::invariance_violation,
                        "boundary point (" + std::to_string(p.x) + ", " +
                            std::to_string(p.y) + ") maps out of the lift domain");
        }
        worst = std::max(worst, std::abs(std::abs(c.y) - 1));
    }
    return worst;
}

}  // namespace

double check_boundary_invariance(const PlaneMap& f, const TopStrip& S, int samples) {
    if (samples < 2) throw Error(ErrorCode::precondition, "need at least 2 samples");
    auto lift = [&S](Point p) { return strip_lift(S, p); };
    double r = invariance_residual(f, boundary_samples(S.lower, samples), lift);
    r = std::max(r, invariance_residual(f, boundary_samples(S.upper, samples), lift));
    return r;
}

double check_boundary_invariance(const PlaneMap& f, const TopAnnulus& A, int samples) {
    if (samples < 2) throw Error(ErrorCode::precondition, "need at least 2 samples");
    auto lift = [&A](Point p) { return annulus_lift(A, p); };
    double r = invariance_residual(f, boundary_samples(A.inner.pts, samples), lift);
    r = std::max(r, invariance_residual(f, boundary_samples(A.outer.pts, samples), lift));
    return r;
}

namespace {

struct SideRange {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void add(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
};

/// Displacement f(x,y).x - x on the two horizontal sides of `w`.
std::pair<SideRange, SideRange> side_displacements(const LiftedMap& f, const Window& w,
                                                   int samples) {
    SideRange bot, top;
    for (int i = 0; i <= samples; ++i) {
        const double x = w.x0 + (w.x1 - w.x0) * i / samples;
        bot.add(f({x, -1}).x - x);
        top.add(f({x, 1}).x - x);
    }
    return {bot, top};
}

}  // namespace

StripTwistResult check_strip_twist(const LiftedMap& f, const Window& R1, const Window& R2,
                                   int samples) {
    if (samples < 16)
        throw Error(ErrorCode::precondition, "strip twist needs at least 16 samples");

    StripTwistResult best;
    best.samples = samples;
    best.margin = -std::numeric_limits<double>::infinity();
    // One horizontal side of the source [a0,a1] must map past the target's
    // left vertical edge (Xi <= b0 - a1, uniformly) and the other past its
    // right edge (Xi >= b1 - a0). For the canonical windows this reproduces
    // the literal thresholds: source [-2,-1] -> 2 and 4; source [1,2] -> -4
    // and -2.
    struct Candidate {
        const Window* src;
        const Window* tgt;
        int source_id;
    };
    const Candidate cands[2] = {{&R1, &R2, 1}, {&R2, &R1, 2}};
    for (const Candidate& c : cands) {
        std::pair<SideRange, SideRange> sides;
        try {
            sides = side_displacements(f, *c.src, samples);
        } catch (const Error&) {
            // samples leave the map's domain (e.g. orbits that blow up in
            // finite time past the crossing); this direction cannot certify
            continue;
        }
        auto [bot, top] = sides;
        const double L = c.tgt->x0 - c.src->x1;
        const double R = c.tgt->x1 - c.src->x0;
        // pair 1: bottom past the left edge, top past the right edge
        const double m1 = std::min(L - bot.hi, top.lo - R);
        // pair 2: roles swapped
        const double m2 = std::min(L - top.hi, bot.lo - R);
        const double margin = std::max(m1, m2);
        if (margin > best.margin) {
            best.margin = margin;
            best.pair = m1 >= m2 ? 1 : 2;
            best.source = c.source_id;
        }
    }
    best.passed = best.margin > 0;
    best.n = best.passed ? 1 : 0;
    return best;
}

TwistCertificate check_annular_twist(const LiftedMap& f, const Window& R1, int samples) {
    if (samples < 16)
        throw Error(ErrorCode::precondition, "annular twist needs at least 16 samples");

    SideRange bot, top;  // image angles Theta on rho = -1 / rho = +1
    for (int i = 0; i <= samples; ++i) {
        const double th = R1.x0 + (R1.x1 - R1.x0) * i / samples;
        bot.add(f({th, -1}).x);
        top.add(f({th, 1}).x);
    }

    TwistCertificate cert;
    cert.samples = samples;
    bool ok = false;

    // family 1: Theta(.,-1) <= 2 j_{-1} + 1/2, Theta(.,1) >= 2 j_1 + 3/2,
    // j_1 + 1 - j_{-1} > 0; extremal choice maximizes m = j_1 - j_{-1} + 1
    {
        const int jm = static_cast<int>(std::ceil((bot.hi - 0.5) / 2));
        const int jp = static_cast<int>(std::floor((top.lo - 1.5) / 2));
        if (jp + 1 - jm > 0) {
            cert.j_minus1 = jm;
            cert.j_plus1 = jp;
            cert.m = jp - jm + 1;
            cert.margin = std::min(2 * jm + 0.5 - bot.hi, top.lo - (2 * jp + 1.5));
            cert.pair = 1;
            ok = true;
        }
    }
    // family 2 (mirrored): Theta(.,-1) >= 2 j_{-1} + 3/2, Theta(.,1) <= 2 j_1 + 1/2,
    // j_{-1} + 1 - j_1 > 0
    {
        const int jm = static_cast<int>(std::floor((bot.lo - 1.5) / 2));
        const int jp = static_cast<int>(std::ceil((top.hi - 0.5) / 2));
        if (jm + 1 - jp > 0) {
            const int m2 = jm - jp + 1;
            const double margin2 =
                std::min(bot.lo - (2 * jm + 1.5), 2 * jp + 0.5 - top.hi);
            if (!ok || m2 > cert.m || (m2 == cert.m && margin2 > cert.margin)) {
                cert.j_minus1 = jm;
                cert.j_plus1 = jp;
                cert.m = m2;
                cert.margin = margin2;
                cert.pair = 2;
            }
            ok = true;
        }
    }
    if (!ok)
        throw Error(ErrorCode::twist_failure,
                    "no integer winding pair fits: Theta(.,-1) in [" +
                        std::to_string(bot.lo) + ", " + std::to_string(bot.hi) +
                        "], Theta(.,1) in [" + std::to_string(top.lo) + ", " +
                        std::to_string(top.hi) + "]");
    return cert;
}

CrossingSets crossing_sets(const LiftedMap& f, const Window& R1,
                           const TwistCertificate& cert, int grid) {
    if (cert.m < 1 || cert.margin <= 0)
        throw Error(ErrorCode::precondition, "crossing sets need a passing twist certificate");
    if (grid < 2) throw Error(ErrorCode::precondition, "grid resolution too small");

    CrossingSets out;
    out.grid = grid;
    const int l_lo = std::min(cert.j_minus1, cert.j_plus1);
    const int l_hi = std::max(cert.j_minus1, cert.j_plus1);
    for (int l = l_lo; l <= l_hi; ++l) {
        out.ells.push_back(l);
        out.cells.emplace_back();
    }

    const int nx = std::max(2, static_cast<int>(std::lround(grid * (R1.x1 - R1.x0))));
    const int ny = std::max(2, static_cast<int>(std::lround(grid * (R1.y1 - R1.y0))));
    const double dx = (R1.x1 - R1.x0) / nx, dy = (R1.y1 - R1.y0) / ny;
    // Image angles on a half-cell lattice; a cell joins K_l when any of its
    // nine samples lands in copy l, or when two of them straddle it (an outer
    // covering of the preimage, robust to steep twist profiles).
    std::vector<double> theta((2 * nx + 1) * (2 * ny + 1));
    for (int i = 0; i <= 2 * nx; ++i)
        for (int j = 0; j <= 2 * ny; ++j)
            theta[i * (2 * ny + 1) + j] =
                f({R1.x0 + i * dx / 2, R1.y0 + j * dy / 2}).x;
    for (int i = 0; i < nx; ++i) {
        for (int j = 0; j < ny; ++j) {
            Window cell{R1.x0 + i * dx, R1.x0 + (i + 1) * dx, R1.y0 + j * dy,
                        R1.y0 + (j + 1) * dy};
            double th_lo = std::numeric_limits<double>::infinity(), th_hi = -th_lo;
            for (int a = 0; a <= 2; ++a)
                for (int b = 0; b <= 2; ++b) {
                    const double th = theta[(2 * i + a) * (2 * ny + 1) + (2 * j + b)];
                    th_lo = std::min(th_lo, th), th_hi = std::max(th_hi, th);
                }
            for (size_t k = 0; k < out.ells.size(); ++k) {
                const double c0 = 2.0 * out.ells[k] + 1.0, c1 = c0 + 0.5;
                if (th_hi >= c0 && th_lo <= c1) out.cells[k].push_back(cell);
            }
        }
    }

    if (out.nonempty() < cert.m - 1)
        throw Error(ErrorCode::resolution,
                    "only " + std::to_string(out.nonempty()) + " of " +
                        std::to_string(cert.m) +
                        " crossing sets populated at this grid resolution");
    return out;
}

namespace {

bool in_union(Point c, const std::vector<Window>& K, double tol) {
    if (K.empty()) return true;
    for (const auto& w : K)
        if (w.contains(c, tol)) return true;
    return false;
}

}  // namespace

StretchResult stretch_check(const LiftedMap& f, const Window& source, const Window& target,
                            const std::vector<Window>& K, int paths) {
    if (paths < 8) throw Error(ErrorCode::precondition, "stretch check needs >= 8 paths");

    double cell_tol = 0;
    for (const auto& w : K)
        cell_tol = std::max(cell_tol, std::max(w.x1 - w.x0, w.y1 - w.y0));

    const int N = 256;
    for (int k = 0; k < paths; ++k) {
        // blended family: straight segments from (a,-1) to (b,+1), the
        // endpoints sweeping the window in opposite directions
        const double fr = (k + 0.5) / paths;
        const double a = source.x0 + fr * (source.x1 - source.x0);
        const double b = (k % 2 == 0)
                             ? source.x0 + (1 - fr) * (source.x1 - source.x0)
                             : a;
        auto gamma = [&](double t) {
            return Point{a + t * (b - a), -1 + 2 * t};
        };
        std::vector<Point> img(N + 1);
        for (int i = 0; i <= N; ++i) img[i] = f(gamma(static_cast<double>(i) / N));

        // scan for a run of samples inside the target window whose neighbors
        // lie past opposite vertical sides
        bool found = false;
        int i = 0;
        while (i <= N && !found) {
            if (!target.contains(img[i], 1e-9)) {
                ++i;
                continue;
            }
            int j = i;
            while (j + 1 <= N && target.contains(img[j + 1], 1e-9)) ++j;
            const bool enter_left = i > 0 && img[i - 1].x < target.x0;
            const bool enter_right = i > 0 && img[i - 1].x > target.x1;
            const bool exit_left = j < N && img[j + 1].x < target.x0;
            const bool exit_right = j < N && img[j + 1].x > target.x1;
            if ((enter_left && exit_right) || (enter_right && exit_left)) {
                bool in_K = true;
                for (int q = i; q <= j; ++q)
                    if (!in_union(gamma(static_cast<double>(q) / N), K, cell_tol))
                        in_K = false;
                if (in_K) found = true;
            }
            i = j + 1;
        }
        // Steep twist profiles (log-divergent periods near a separatrix
        // boundary) can jump clear over the target between samples; bisect
        // such brackets for an interior witness of the crossing.
        for (int i2 = 0; i2 < N && !found; ++i2) {
            const bool fwd = img[i2].x < target.x0 && img[i2 + 1].x > target.x1;
            const bool bwd = img[i2].x > target.x1 && img[i2 + 1].x < target.x0;
            if (!fwd && !bwd) continue;
            if (std::abs(img[i2].y) > 1 + 1e-9 || std::abs(img[i2 + 1].y) > 1 + 1e-9) continue;
            double t_lo = static_cast<double>(i2) / N, t_hi = (i2 + 1.0) / N;
            for (int it = 0; it < 60 && !found; ++it) {
                const double tm = 0.5 * (t_lo + t_hi);
                const Point cm = f(gamma(tm));
                if (target.contains(cm, 1e-9)) {
                    if (in_union(gamma(tm), K, cell_tol)) found = true;
                    break;
                }
                const bool left = cm.x < target.x0;
                if (left == fwd) t_lo = tm;
                else t_hi = tm;
            }
        }
        if (!found) {
            StretchResult r;
            r.passed = false;
            for (int i2 = 0; i2 <= 32; ++i2) r.witness.push_back(gamma(i2 / 32.0));
            r.reason = "path " + std::to_string(k) +
                       " has no subinterval stretching across the target inside K";
            return r;
        }
    }
    StretchResult r;
    r.passed = true;
    return r;
}

ChaosCertificate assemble_chaos_certificate(const StripTwistResult& strip,
                                            const TwistCertificate& annular,
                                            const SwitchedSystem& instance,
                                            const std::string& composition,
                                            int crossing_nonempty, int grid) {
    if (!strip.passed)
        throw Error(ErrorCode::precondition, "strip twist result did not pass");
    if (annular.m < 1 || annular.margin <= 0)
        throw Error(ErrorCode::precondition, "annular twist certificate did not pass");
    if (std::max(strip.n, annular.m) < 2)
        throw Error(ErrorCode::insufficient_crossing,
                    "n = " + std::to_string(strip.n) + ", m = " +
                        std::to_string(annular.m) + ": need max(n, m) >= 2");
    ChaosCertificate c;
    c.family = instance.family;
    c.lambda1 = instance.forcing.lambda1;
    c.lambda2 = instance.forcing.lambda2;
    c.tau1 = instance.forcing.tau1;
    c.tau2 = instance.forcing.tau2;
    c.n = strip.n;
    c.m = annular.m;
    c.symbol_count = strip.n * annular.m;
    c.margin_strip = strip.margin;
    c.margin_annulus = annular.margin;
    c.samples = std::max(strip.samples, annular.samples);
    c.grid_resolution = grid;
    c.composition = composition;
    c.crossing_sets_nonempty = crossing_nonempty;
    return c;
}

}  // namespace revpulse
