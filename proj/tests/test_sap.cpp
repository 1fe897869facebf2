#include <doctest.h>

#include <cmath>
#include <memory>

#include "revpulse/sap.hpp"

using namespace revpulse;

namespace {

const IntegratorConfig cfg{};
const Window SRC_STRIP_L{-2, -1, -1, 1};
const Window SRC_STRIP_R{1, 2, -1, 1};
const Window SRC_ANN{0, 0.5, -1, 1};

Polyline hline(double y, double x0, double x1, int n = 48) {
    Polyline out;
    for (int i = 0; i <= n; ++i) out.push_back({x0 + (x1 - x0) * i / n, y});
    return out;
}

}  // namespace

TEST_CASE("boundary invariance: synthetic") {
    TopStrip S;
    S.lower = hline(-1, -6, 6);
    S.upper = hline(1, -6, 6);
    S.x_min = -6;
    S.x_max = 6;
    S.chart = std::make_shared<AffineStripChart>();

    PlaneMap id = [](Point p) { return p; };
    CHECK(check_boundary_invariance(id, S, 32) == 0.0);

    PlaneMap slide = [](Point p) { return Point{0.9 * p.x, p.y}; };
    CHECK(check_boundary_invariance(slide, S, 32) == 0.0);

    // pushing rho outward by 0.1 leaves the lift domain
    PlaneMap push = [](Point p) { return Point{p.x, p.y + 0.1}; };
    try {
        check_boundary_invariance(push, S, 32);
        FAIL("expected invariance violation");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::invariance_violation);
    }
}

TEST_CASE("boundary invariance: flow map on flow-invariant strip boundaries") {
    // levels of H_{lambda=1} are invariant under the frozen flow, so the time-t
    // map keeps the boundary arcs on |y| = 1 up to integration drift
    VectorFieldSpec spec{Family::Saddle, 1.0};
    StripNormalizer id_norm;
    id_norm.u_lo = {-10, 10};
    id_norm.u_hi = {-10, 10};
    id_norm.x = {-10, 10};
    auto chart = std::make_shared<FlowStripChart>(spec, -0.2, -0.1, -0.999, -0.001, true,
                                                  id_norm, cfg);
    TopStrip S;
    S.x_min = -2;
    S.x_max = 2;
    for (int i = 0; i <= 48; ++i) {
        const double x = -1 + 2.0 * i / 48;
        S.lower.push_back(chart->to_plane({x, -1}));
        S.upper.push_back(chart->to_plane({x, 1}));
    }
    S.chart = chart;

    PlaneMap flow = [&](Point p) { return flow_map(spec, 0.5, p, cfg); };
    CHECK(check_boundary_invariance(flow, S, 24) <= 1e-7);
}

TEST_CASE("boundary invariance: annulus") {
    FirstIntegral H(Family::Saddle, 1.0);
    auto chart = std::make_shared<IntegralAnnulusChart>(H, -0.25, -0.1, H.center(),
                                                        CircleNormalizer{{0, 1}, {0, 2}}, 2.0);
    TopAnnulus A;
    A.center = H.center();
    Polyline in, out;
    for (int i = 0; i <= 160; ++i) {
        const double th = 2.0 * i / 160;
        in.push_back(chart->to_plane({th, -1}));
        out.push_back(chart->to_plane({th, 1}));
    }
    in.back() = in.front();
    out.back() = out.front();
    A.inner = JordanCurve(in);
    A.outer = JordanCurve(out);
    A.chart = chart;

    VectorFieldSpec spec{Family::Saddle, 1.0};
    PlaneMap flow = [&](Point p) { return flow_map(spec, 0.7, p, cfg); };
    // 160/32 = 5: samples land on polyline vertices, which sit exactly on the
    // invariant level curves (interpolated chord points would not)
    CHECK(check_boundary_invariance(flow, A, 32) <= 1e-7);
}

TEST_CASE("strip twist: identity fails, shears pass with the literal thresholds") {
    LiftedMap id = [](Point c) { return c; };
    StripTwistResult r = check_strip_twist(id, SRC_STRIP_L, SRC_STRIP_R, 32);
    CHECK(!r.passed);
    CHECK(r.n == 0);

    // (x,y) -> (x - 3(y+1), y): Xi(.,-1) = 0 >= -2 and Xi(.,1) = -6 <= -4
    LiftedMap shear = [](Point c) { return Point{c.x - 3 * (c.y + 1), c.y}; };
    StripTwistResult s = check_strip_twist(shear, SRC_STRIP_L, SRC_STRIP_R, 32);
    CHECK(s.passed);
    CHECK(s.source == 2);
    CHECK(s.pair == 2);
    CHECK(s.margin == doctest::Approx(2.0));
    CHECK(s.n == 1);

    // mirrored shear with the source on the left window
    LiftedMap shear2 = [](Point c) { return Point{c.x + 3 * (c.y + 1), c.y}; };
    StripTwistResult s2 = check_strip_twist(shear2, SRC_STRIP_L, SRC_STRIP_R, 32);
    CHECK(s2.passed);
    CHECK(s2.source == 1);
    CHECK(s2.pair == 1);
    CHECK(s2.margin == doctest::Approx(2.0));

    CHECK_THROWS_AS(check_strip_twist(id, SRC_STRIP_L, SRC_STRIP_R, 8), Error);
}

TEST_CASE("annular twist: synthetic maps") {
    // Theta(.,-1) = 0, Theta(.,1) = 7/2: j_{-1} = 0, j_1 = 1, m = 2
    LiftedMap tw = [](Point c) { return Point{(c.y + 1) / 2 * 3.5, c.y}; };
    TwistCertificate cert = check_annular_twist(tw, SRC_ANN, 32);
    CHECK(cert.j_minus1 == 0);
    CHECK(cert.j_plus1 == 1);
    CHECK(cert.m == 2);
    CHECK(cert.pair == 1);
    CHECK(cert.margin == doctest::Approx(0.0));

    // rigid rotation: no relative winding
    LiftedMap rot = [](Point c) { return Point{c.x + 0.7, c.y}; };
    try {
        check_annular_twist(rot, SRC_ANN, 32);
        FAIL("expected twist failure");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::twist_failure);
    }

    // analytic winding: Theta = theta + 0.8 + 6 (rho+1)/2
    LiftedMap w6 = [](Point c) { return Point{c.x + 0.8 + 3 * (c.y + 1), c.y}; };
    TwistCertificate c6 = check_annular_twist(w6, SRC_ANN, 32);
    CHECK(c6.j_minus1 == 1);
    CHECK(c6.j_plus1 == 2);
    CHECK(c6.m == 2);
    CHECK(c6.margin == doctest::Approx(1.2));

    // reversed twist engages the mirrored inequality family
    LiftedMap wm = [](Point c) { return Point{c.x - 0.8 - 3 * (c.y + 1), c.y}; };
    TwistCertificate cm = check_annular_twist(wm, SRC_ANN, 32);
    CHECK(cm.pair == 2);
    CHECK(cm.j_minus1 == -2);
    CHECK(cm.j_plus1 == -3);
    CHECK(cm.m == 2);
    CHECK(cm.margin > 0);

    // sampling stability: 4x density keeps the margin for a nonlinear map
    LiftedMap nl = [](Point c) {
        return Point{c.x + 0.8 + 3 * (c.y + 1) + 0.05 * std::sin(6.28 * c.x), c.y};
    };
    TwistCertificate a = check_annular_twist(nl, SRC_ANN, 32);
    TwistCertificate b = check_annular_twist(nl, SRC_ANN, 128);
    CHECK(a.margin > 0);
    CHECK(b.margin > 0);
    CHECK(a.m == b.m);
    CHECK(std::abs(a.margin - b.margin) <= 0.01);
}

TEST_CASE("crossing sets") {
    LiftedMap f = [](Point c) { return Point{0.8 * c.x + 1.9 * (c.y + 1), 0.9 * c.y}; };
    TwistCertificate cert = check_annular_twist(f, SRC_ANN, 64);
    REQUIRE(cert.m == 2);
    REQUIRE(cert.margin > 0);

    CrossingSets K = crossing_sets(f, SRC_ANN, cert, 48);
    REQUIRE(K.ells.size() == 2);
    CHECK(K.nonempty() == 2);

    // disjoint and contained in the source window
    for (size_t a = 0; a < K.cells.size(); ++a) {
        for (const auto& w : K.cells[a]) {
            CHECK(w.x0 >= SRC_ANN.x0 - 1e-12);
            CHECK(w.x1 <= SRC_ANN.x1 + 1e-12);
            for (size_t b = a + 1; b < K.cells.size(); ++b)
                for (const auto& v : K.cells[b]) {
                    const bool sep = w.x1 <= v.x0 + 1e-12 || v.x1 <= w.x0 + 1e-12 ||
                                     w.y1 <= v.y0 + 1e-12 || v.y1 <= w.y0 + 1e-12;
                    CHECK(sep);
                }
        }
    }

    // oracle: dense grid evaluation of the explicit map finds the same cells
    int dense0 = 0;
    for (int i = 0; i < 200; ++i)
        for (int j = 0; j < 200; ++j) {
            Point c{0.5 * (i + 0.5) / 200, -1 + 2.0 * (j + 0.5) / 200};
            Point img = f(c);
            if (img.x >= 1 && img.x <= 1.5 && std::abs(img.y) <= 1) ++dense0;
        }
    CHECK(dense0 > 0);
    CHECK(!K.cells[0].empty());

    // vacuous certificate rejected
    TwistCertificate vac;
    CHECK_THROWS_AS(crossing_sets(f, SRC_ANN, vac, 48), Error);

    // map that never reaches the copies -> resolution error
    LiftedMap rot = [](Point c) { return Point{c.x + 0.1, c.y}; };
    try {
        crossing_sets(rot, SRC_ANN, cert, 48);
        FAIL("expected resolution error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::resolution);
    }
}

TEST_CASE("stretch check") {
    const Window tgt{1, 1.5, -1, 1};

    // affine horseshoe-like crossing: rho sweeps the image across the target
    LiftedMap horseshoe = [](Point c) { return Point{1.25 + 1.0 * c.y, 0.5 * c.x}; };
    StretchResult ok = stretch_check(horseshoe, SRC_ANN, tgt, {}, 8);
    CHECK(ok.passed);

    // with K = the whole source window
    StretchResult ok2 = stretch_check(horseshoe, SRC_ANN, tgt, {SRC_ANN}, 12);
    CHECK(ok2.passed);

    // collapsing map: endpoints cannot reach different target sides
    LiftedMap collapse = [](Point) { return Point{1.25, 0.0}; };
    StretchResult bad = stretch_check(collapse, SRC_ANN, tgt, {}, 8);
    CHECK(!bad.passed);
    CHECK(!bad.witness.empty());

    // K excluding the crossing region forces a failure
    StretchResult off = stretch_check(horseshoe, SRC_ANN, tgt,
                                      {Window{0.4999, 0.5, 0.999, 1.0}}, 8);
    CHECK(!off.passed);

    CHECK_THROWS_AS(stretch_check(horseshoe, SRC_ANN, tgt, {}, 4), Error);
}

TEST_CASE("chaos certificate assembly") {
    SwitchedSystem sys(Family::Saddle, PulseForcing(1.0, 0.25, 0.5, 0.5));
    StripTwistResult strip;
    strip.passed = true;
    strip.n = 1;
    strip.margin = 0.4;
    strip.samples = 64;
    TwistCertificate ann;
    ann.m = 2;
    ann.margin = 0.2;
    ann.samples = 64;

    ChaosCertificate c = assemble_chaos_certificate(strip, ann, sys, "strip-first", 2, 48);
    CHECK(c.symbol_count == 2);
    CHECK(c.n == 1);
    CHECK(c.m == 2);
    CHECK(c.margin_strip == doctest::Approx(0.4));
    CHECK(c.composition == "strip-first");
    CHECK(c.crossing_sets_nonempty == 2);

    ann.m = 3;
    CHECK(assemble_chaos_certificate(strip, ann, sys, "strip-first", 2, 48).symbol_count == 3);

    ann.m = 1;
    try {
        assemble_chaos_certificate(strip, ann, sys, "strip-first", 1, 48);
        FAIL("expected insufficient crossing");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::insufficient_crossing);
        CHECK(e.exit_code() == 4);
    }

    strip.passed = false;
    ann.m = 2;
    CHECK_THROWS_AS(assemble_chaos_certificate(strip, ann, sys, "strip-first", 2, 48), Error);
}
