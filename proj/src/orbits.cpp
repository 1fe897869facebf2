#include "revpulse/orbits.hpp"

#include <cstdio>
#include <cstdlib>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>
#include <tuple>

namespace revpulse {

namespace {

/// Per-instance data for the composed Poincare map at the pre-annulus
/// section. The composition closes as strip: R1 -> R2 then annulus:
/// R2 -> copies of R1, so the symbol sets live on the R2 side; they are
/// computed from the annulus lift conjugated by the half-window translation
/// (R2's canonical window is R1's shifted by one).
struct OrbitContext {
    std::shared_ptr<const AnnulusChart> chart;
    VectorFieldSpec strip, annulus;
    double tau_strip = 0, tau_annulus = 0;
    IntegratorConfig scfg, acfg;  // tight strip / tight projected annulus
    CrossingSets K;               // cells relative to the R2 window
    LiftedMap lift;               // annulus leg, lifted, R2-window frame

    /// Return map at the pre-annulus section: annulus leg then strip leg.
    Point step(Point w) const {
        return flow_map(strip, tau_strip, flow_map(annulus, tau_annulus, w, acfg), scfg);
    }
    Point iterate(Point w, int k) const {
        for (int i = 0; i < k; ++i) w = step(w);
        return w;
    }

    /// Chart windows are deflated by 1% per side when the construction pins
    /// the normalizer, so points of the physical windows can carry canonical
    /// coordinates slightly outside [2l+1, 2l+1.5]; the horseshoe's periodic
    /// points sit near the window edges and need this slack. The composed map
    /// also has secondary radial crossings (the strip meets the annulus's
    /// angular circle twice per turn) whose orbits sit ~0.03 outside the
    /// windows; the slack must stay below that to exclude them.
    static constexpr double window_slack = 0.012;

    /// Symbol of a section point: the copy of the crossing window its lifted
    /// annulus-leg image lands in, or -1 when the image lies in a gap.
    int symbol_of(Point p) const {
        Point c;
        try {
            c = chart->from_plane(p);
        } catch (const Error&) {
            return -1;
        }
        if (std::abs(c.y) > 1 + 1e-9) return -1;
        Point g;
        try {
            g = lift({wrap2(c.x - 1), c.y});
        } catch (const Error&) {
            return -1;
        }
        for (size_t s = 0; s < K.ells.size(); ++s) {
            const double lo = 2.0 * K.ells[s] + 1, hi = lo + 0.5;
            if (g.x >= lo - window_slack && g.x <= hi + window_slack)
                return static_cast<int>(s);
        }
        return -1;
    }

    bool in_symbol_set(int s, Point p) const { return symbol_of(p) == s; }

    /// Plane point of canonical section coordinates (R2-window frame).
    Point plane(Point u) const { return chart->to_plane(u + Point{1, 0}); }

    /// Return map in canonical coordinates; theta in [-1, 1) relative to the
    /// R2 window. Working in the chart removes the severe radial compression
    /// of the thin annulus, which makes the Newton steps well scaled.
    Point canon_step(Point u) const {
        const Point c = chart->from_plane(step(plane(u)));
        return {wrap2(c.x - 1), c.y};
    }

    // The chart radius is affine in the level, which vanishes on the outer
    // boundary, while the winding grows with the logarithm of the level: the
    // symbol bands are exponentially thin in rho but evenly spaced in
    // s = log(1 - rho). The solver works in (theta, s).
    static double s_of_rho(double rho) { return std::log(std::max(1 - rho, 1e-300)); }
    static double rho_of_s(double s) { return 1 - std::exp(std::min(s, 0.6)); }

    /// Return map in (theta, s) coordinates.
    Point log_step(Point v) const {
        const Point g = canon_step({v.x, rho_of_s(v.y)});
        return {g.x, s_of_rho(std::min(g.y, 1 - 1e-300))};
    }

    static double wrap2(double d) {
        d = std::fmod(d + 1, 2);
        if (d < 0) d += 2;
        return d - 1;
    }
};

OrbitContext make_context(const Construction& con, const IntegratorConfig& cfg) {
    OrbitContext ctx;
    ctx.chart = con.A.chart;
    SwitchedSystem sys = con.system();
    ctx.strip = con.strip_first ? sys.first() : sys.second();
    ctx.annulus = con.strip_first ? sys.second() : sys.first();
    ctx.tau_strip = con.tau_strip;
    ctx.tau_annulus = con.tau_annulus;

    FirstIntegral ha(con.family, ctx.annulus.lambda);
    auto projected = [&](const IntegratorConfig& base) {
        IntegratorConfig c = base;
        c.invariant = [ha](Point p) { return ha.value(p); };
        c.invariant_gradient = [ha](Point p) { return ha.gradient(p); };
        return c;
    };
    // tight tolerances for the shooting map: the stretching that makes the
    // horseshoe exist also amplifies integration noise into the residual; no
    // equilibrium freeze, orbits legitimately swing past the saddle corners
    ctx.scfg = cfg;
    ctx.scfg.rel_tol = std::min(cfg.rel_tol, 1e-12);
    ctx.scfg.abs_tol = std::min(cfg.abs_tol, 1e-14);
    ctx.acfg = projected(ctx.scfg);
    ctx.acfg.freeze_at_equilibria = false;
    {
        LiftedMap raw = lift_flow_through_annulus(ctx.chart, ctx.annulus, ctx.tau_annulus,
                                                  ctx.acfg);
        ctx.lift = [raw](Point c) { return raw(c + Point{1, 0}) - Point{1, 0}; };
    }

    // symbol sets from the R2-source annulus leg (memoized; the grid pass is
    // the expensive part and instances are rebuilt across calls in practice)
    using Key = std::tuple<int, double, double, double, double>;
    static std::map<Key, CrossingSets> cache;
    static std::mutex mtx;
    const Key key{static_cast<int>(con.family), con.lambda1, con.lambda2, con.tau_strip,
                  con.tau_annulus};
    {
        std::lock_guard<std::mutex> lock(mtx);
        auto it = cache.find(key);
        if (it != cache.end()) {
            ctx.K = it->second;
            return ctx;
        }
    }
    LiftedMap base = lift_flow_through_annulus(ctx.chart, ctx.annulus, ctx.tau_annulus,
                                               projected(cfg));
    LiftedMap shifted = [base](Point c) { return base(c + Point{1, 0}) - Point{1, 0}; };
    Window src{0, 0.5};
    TwistCertificate cert2 = check_annular_twist(shifted, src, 32);
    if (cert2.m < con.annular_twist.m || !(cert2.margin > 0))
        throw Error(ErrorCode::certification,
                    "composed return map lost the certified winding");
    ctx.K = crossing_sets(shifted, src, cert2, con.certificate.grid_resolution > 0
                                                   ? con.certificate.grid_resolution
                                                   : 48);
    {
        std::lock_guard<std::mutex> lock(mtx);
        cache.emplace(key, ctx.K);
    }
    return ctx;
}

void validate_word(const Construction& con, const SymbolWord& word, size_t sets) {
    if (word.empty()) throw Error(ErrorCode::precondition, "empty symbol word");
    for (int s : word)
        if (s < 0 || s >= con.certificate.symbol_count || s >= static_cast<int>(sets))
            throw Error(ErrorCode::precondition, "symbol outside the certified alphabet");
}

}  // namespace

std::vector<Region> symbol_regions(const Construction& con, const IntegratorConfig& cfg) {
    auto ctx = std::make_shared<OrbitContext>(make_context(con, cfg));
    // the pre-annulus section is t = 0 unless the strip occupies the first slot
    const bool transport = con.strip_first;
    std::vector<Region> out;
    for (int s = 0; s < static_cast<int>(ctx->K.cells.size()); ++s) {
        out.push_back([ctx, s, transport](Point p) {
            try {
                if (transport) p = flow_map(ctx->strip, ctx->tau_strip, p, ctx->scfg);
            } catch (const Error&) {
                return false;
            }
            return ctx->in_symbol_set(s, p);
        });
    }
    return out;
}

PeriodicOrbitResult find_periodic_orbit(const Construction& con, const SymbolWord& word,
                                        const IntegratorConfig& cfg) {
    const OrbitContext ctx = make_context(con, cfg);
    validate_word(con, word, ctx.K.cells.size());
    const int k = static_cast<int>(word.size());

    const double s_max = std::log(2.0) - 1e-9, s_min = -34.0;
    // Lifted angle of the annulus-leg image as a function of the source state
    // in (theta, s) coordinates; strictly increasing in s at fixed theta. Its
    // value locates the point the strip leg acts on, and that mid-point angle
    // drives essentially all of the composed map's output: the severe radial
    // compression of the thin annulus makes the map's dependence on s (at
    // fixed winding) weak. The shooting unknowns are therefore (theta, x)
    // with x the winding itself: there the Jacobian is well conditioned, and
    // the itinerary constraint "segment i winds into window copy ell_i"
    // becomes a box constraint on x_i, which keeps the iteration away from
    // the resonance roots in the gaps between windows.
    auto windf = [&](double theta, double s) {
        return ctx.lift({theta, OrbitContext::rho_of_s(s)}).x;
    };
    // invert the winding in s by bracketing plus regula falsi (Illinois)
    auto invert_s = [&](double theta, double x, double hint) -> double {
        double a = 0, fa = 0, b = 0, fb = 0;  // f(a) >= 0 >= f(b)
        bool have = false;
        if (std::isfinite(hint)) {
            const double lo = std::max(s_min, hint - 0.4);
            const double hi = std::min(s_max, hint + 0.4);
            const double flo = windf(theta, lo) - x, fhi = windf(theta, hi) - x;
            if (flo <= 0 && fhi >= 0) a = hi, fa = fhi, b = lo, fb = flo, have = true;
        }
        for (int j = 1; j <= 48 && !have; ++j) {
            const double sp = s_max - 0.75 * (j - 1), sj = s_max - 0.75 * j;
            const double fp = windf(theta, sp) - x, fj = windf(theta, sj) - x;
            if (fp >= 0 && fj <= 0) a = sp, fa = fp, b = sj, fb = fj, have = true;
        }
        if (!have)
            throw Error(ErrorCode::orbit_not_found,
                        "winding target outside the range of the annulus");
        int side = 0;
        for (int it = 0; it < 90; ++it) {
            double m = b - fb * (a - b) / (fa - fb);
            if (!std::isfinite(m) || (m - a) * (m - b) >= 0) m = 0.5 * (a + b);
            const double fm = windf(theta, m) - x;
            if (std::abs(fm) < 1e-13 || std::abs(a - b) < 3e-15) return m;
            if (fm >= 0) {
                a = m, fa = fm;
                if (side == 1) fb *= 0.5;
                side = 1;
            } else {
                b = m, fb = fm;
                if (side == -1) fa *= 0.5;
                side = -1;
            }
        }
        return 0.5 * (a + b);
    };
    // one shooting segment: reconstruct s from (theta, x), apply the section
    // map, report the image angle and image winding
    auto eval = [&](Point v, double& s_hint) -> Point {
        const double s = invert_s(v.x, v.y, s_hint);
        s_hint = s;
        const Point g = ctx.canon_step({v.x, OrbitContext::rho_of_s(s)});
        if (!(std::abs(g.y) < 1 - 1e-12))
            throw Error(ErrorCode::orbit_not_found, "shooting iterate left the annulus");
        return {g.x, ctx.lift(g).x};
    };
    const double slack = OrbitContext::window_slack;
    auto box = [&](int i, Point v) {
        const double lo = 2.0 * ctx.K.ells[word[i]] + 1;
        return Point{std::clamp(OrbitContext::wrap2(v.x), -0.25, 0.75),
                     std::clamp(v.y, lo - slack, lo + 0.5 + slack)};
    };
    auto diff = [](Point a, Point b) {
        return Point{OrbitContext::wrap2(a.x - b.x), a.y - b.y};
    };

    // Seed a segment by scanning its winding window: the strip image crosses
    // the annulus radially over a short run of windings near the window's
    // lower edge, and only that run maps back inside the annulus. Pick the
    // feasible x whose image winding is closest to the next segment's run.
    auto seed_segment = [&](int i, double theta) -> std::pair<bool, Point> {
        const double lo = 2.0 * ctx.K.ells[word[i]] + 1;
        const double target = 2.0 * ctx.K.ells[word[(i + 1) % k]] + 1.05;
        double hint = std::numeric_limits<double>::quiet_NaN();
        double bx = 0, bd = std::numeric_limits<double>::infinity();
        bool ok = false;
        for (int j = 0; j <= 36; ++j) {
            const Point v{theta, lo - slack + (0.24 + slack) * j / 36.0};
            try {
                const Point g = eval(v, hint);
                const double d = std::abs(g.y - target);
                if (std::getenv("RP_DEBUG_ORBIT"))
                    std::fprintf(stderr, "  scan i=%d x=%.4f -> th'=%.4f x'=%.4f\n", i, v.y,
                                 g.x, g.y);
                if (d < bd) bd = d, bx = v.y, ok = true;
            } catch (const Error&) {
            }
        }
        return {ok, Point{theta, bx}};
    };
    std::vector<std::vector<Point>> seeds;
    for (double th0 : {0.25, 0.1, 0.4}) {
        std::vector<Point> v(k);
        bool bad = false;
        double th = th0;
        for (int i = 0; i < k && !bad; ++i) {
            auto [ok, vi] = seed_segment(i, th);
            if (!ok) {
                bad = true;
                break;
            }
            v[i] = vi;
            try {
                double h = std::numeric_limits<double>::quiet_NaN();
                th = std::clamp(OrbitContext::wrap2(eval(vi, h).x), 0.02, 0.48);
            } catch (const Error&) {
                th = 0.25;
            }
        }
        if (!bad) seeds.push_back(std::move(v));
    }
    if (seeds.empty())
        throw Error(ErrorCode::orbit_not_found,
                    "no feasible seed inside the symbol windows");

    // multiple shooting on the section map G: unknowns v_0..v_{k-1} in
    // (theta, winding), residuals R_i = G(v_i) - v_{i+1 mod k}; one map
    // application per segment keeps every unknown inside the annulus
    double best_residual = std::numeric_limits<double>::infinity();
    PeriodicOrbitResult best;
    bool found = false;
    const double fd_h = 1e-6;

    for (size_t si = 0; si < seeds.size() && !found; ++si) {
        std::vector<Point> v = seeds[si];
        std::vector<double> sh(k, std::numeric_limits<double>::quiet_NaN());
        try {
            std::vector<Point> R(k), G(k);
            auto total = [&](const std::vector<Point>& res) {
                double s = 0;
                for (const Point& r : res) s += r.x * r.x + r.y * r.y;
                return std::sqrt(s);
            };
            for (int i = 0; i < k; ++i) {
                G[i] = eval(v[i], sh[i]);
                R[i] = diff(G[i], v[(i + 1) % k]);
            }
            Eigen::MatrixXd J(2 * k, 2 * k);
            std::vector<Eigen::Matrix2d> A(k);
            for (int it = 0; it < 60 && total(R) > 1e-9; ++it) {
                // the unstable multiplier reaches ~1e4 per step with matching
                // curvature, so the difference step must shrink with the
                // residual or the secant slope misses the local derivative
                const double fd = std::clamp(1e-4 * total(R), 1e-9, fd_h);
                J.setZero();
                for (int i = 0; i < k; ++i) {
                    double h1 = sh[i], h2 = sh[i];
                    const Point Gx = eval(v[i] + Point{fd, 0}, h1);
                    const Point Gy = eval(v[i] + Point{0, fd}, h2);
                    A[i] << OrbitContext::wrap2(Gx.x - G[i].x) / fd,
                        OrbitContext::wrap2(Gy.x - G[i].x) / fd,
                        (Gx.y - G[i].y) / fd, (Gy.y - G[i].y) / fd;
                    J.block<2, 2>(2 * i, 2 * i) = A[i];
                    J.block<2, 2>(2 * i, 2 * ((i + 1) % k)) -=
                        Eigen::Matrix2d::Identity();
                }
                Eigen::VectorXd rhs(2 * k);
                for (int i = 0; i < k; ++i) rhs(2 * i) = -R[i].x, rhs(2 * i + 1) = -R[i].y;
                Eigen::VectorXd d = J.colPivHouseholderQr().solve(rhs);
                for (int i = 0; i < k; ++i) {
                    d(2 * i) = std::clamp(d(2 * i), -0.3, 0.3);
                    d(2 * i + 1) = std::clamp(d(2 * i + 1), -0.3, 0.3);
                }
                bool moved = false;
                double t = 1.0;
                for (int bt = 0; bt < 20 && !moved; ++bt, t /= 2) {
                    std::vector<Point> vn(k), Rn(k), Gn(k);
                    std::vector<double> shn = sh;
                    for (int i = 0; i < k; ++i)
                        vn[i] = box(i, v[i] + t * Point{d(2 * i), d(2 * i + 1)});
                    try {
                        for (int i = 0; i < k; ++i) {
                            Gn[i] = eval(vn[i], shn[i]);
                            Rn[i] = diff(Gn[i], vn[(i + 1) % k]);
                        }
                    } catch (const Error&) {
                        continue;
                    }
                    if (total(Rn) < total(R))
                        v = vn, R = Rn, G = Gn, sh = shn, moved = true;
                }
                if (std::getenv("RP_DEBUG_ORBIT"))
                    std::fprintf(stderr,
                                 "  it=%d |R|=%.3e R0=(%.3e,%.3e) d=(%.3e,%.3e) "
                                 "v0=(%.10f,%.10f) A0=[%.3e %.3e; %.3e %.3e] t=%.2e "
                                 "moved=%d\n",
                                 it, total(R), R[0].x, R[0].y, d(0), d(1), v[0].x, v[0].y,
                                 A[0](0, 0), A[0](0, 1), A[0](1, 0), A[0](1, 1), 2 * t,
                                 (int)moved);
                if (!moved) break;
            }

            // evaluate the genuine closure residual by iterating from v_0
            Point p0 = ctx.plane(
                {v[0].x, OrbitContext::rho_of_s(invert_s(v[0].x, v[0].y, sh[0]))});
            Point q = p0;
            bool ok = true;
            for (int i = 0; i < k; ++i) {
                if (!ctx.in_symbol_set(word[i], q)) ok = false;
                q = ctx.step(q);
            }
            const double res = norm(q - p0);
            best_residual = std::min(best_residual, res);
            if (std::getenv("RP_DEBUG_ORBIT"))
                std::fprintf(stderr, "seed %zu: ok=%d res=%.3e v0=(%.6f,%.6f)\n", si, (int)ok,
                             res, v[0].x, v[0].y);
            if (!ok || res > 1e-8) continue;

            PeriodicOrbitResult r;
            // report the state at t = 0: undo the strip leg when it comes first
            r.initial = con.strip_first ? flow_map(ctx.strip, -ctx.tau_strip, p0, ctx.scfg)
                                        : p0;
            r.k = k;
            r.residual = res;
            r.itinerary = word;
            // monodromy of the section map in (theta, winding) coordinates
            Eigen::Matrix2d M = Eigen::Matrix2d::Identity();
            for (int i = 0; i < k; ++i) M = A[i] * M;
            Eigen::JacobiSVD<Eigen::Matrix2d> svd(M);
            r.condition = svd.singularValues()(0) / std::max(svd.singularValues()(1), 1e-300);
            if (!verify_itinerary(con.system(), r.initial, word, symbol_regions(con, cfg), cfg)) {
                if (std::getenv("RP_DEBUG_ORBIT")) std::fprintf(stderr, "  verify failed\n");
                continue;
            }
            best = r;
            found = true;
        } catch (const Error& e) {
            if (std::getenv("RP_DEBUG_ORBIT"))
                std::fprintf(stderr, "seed %zu threw: %s\n", si, e.what());
            continue;
        }
    }

    if (!found) {
        std::ostringstream os;
        os << "no periodic orbit found for the word (inconclusive; best residual "
           << best_residual << ")";
        throw Error(ErrorCode::orbit_not_found, os.str());
    }
    return best;
}

bool verify_itinerary(const SwitchedSystem& sys, Point p, const SymbolWord& word,
                      const std::vector<Region>& regions, const IntegratorConfig& cfg) {
    if (word.empty()) return false;
    IntegratorConfig vcfg = cfg;
    vcfg.rel_tol = std::min(cfg.rel_tol, 1e-12);
    vcfg.abs_tol = std::min(cfg.abs_tol, 1e-14);
    Point q = p;
    try {
        for (int s : word) {
            if (s < 0 || s >= static_cast<int>(regions.size()) || !regions[s](q)) return false;
            q = poincare(sys, q, vcfg);
        }
    } catch (const Error&) {
        return false;
    }
    return dist(q, p) <= 1e-7;
}

}  // namespace revpulse
