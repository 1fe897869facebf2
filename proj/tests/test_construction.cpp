#include <doctest.h>

#include <cmath>
#include <memory>

#include "revpulse/construction.hpp"

using namespace revpulse;

namespace {

const IntegratorConfig cfg{};

// built once; several cases below inspect the same instance
const Construction& saddle_default() {
    static Construction c = build_saddle(1.0, 0.25, 2, cfg);
    return c;
}

double max_abs_level(const FirstIntegral& fi, const Polyline& pts, double level) {
    double m = 0;
    for (const Point& p : pts) m = std::max(m, std::abs(fi.value(p) - level));
    return m;
}

}  // namespace

TEST_CASE("saddle outer boundary: area and level") {
    // region between the parabola y^2 = (2/3)x + l and the y-axis chord:
    // area = int_{-3l/2}^0 2 sqrt((2/3)x + l) dx = 2 l^{3/2}
    const double l = 0.25;
    JordanCurve c = outer_boundary_saddle(l);
    CHECK(std::abs(std::abs(c.area()) - 2 * std::pow(l, 1.5)) < 1e-4);
    CHECK(max_abs_level(FirstIntegral(Family::Saddle, l), c.pts, 0.0) < 1e-9);
    CHECK(c.contains({-l, 0}));  // the enclosed center
    CHECK_FALSE(c.contains({0.1, 0}));
}

TEST_CASE("cusp outer boundary: level and extremes") {
    const double l1 = -1;
    JordanCurve c = outer_boundary_cusp(l1);
    FirstIntegral fi(Family::Cusp, l1);
    CHECK(fi.separatrix_level() == doctest::Approx(2.0 / 3.0));
    CHECK(max_abs_level(fi, c.pts, 2.0 / 3.0) < 1e-9);
    double xmin = 1e9, xmax = -1e9;
    for (const Point& p : c.pts) xmin = std::min(xmin, p.x), xmax = std::max(xmax, p.x);
    CHECK(xmin == doctest::Approx(-2.0).epsilon(1e-6));  // crossing (-2 sqrt(-l1), 0)
    CHECK(xmax == doctest::Approx(1.0).epsilon(1e-6));   // the saddle (sqrt(-l1), 0)
}

TEST_CASE("strip boundary intersection: closed form vs hand value") {
    // x_int^2 = C1/(l2 - l1), C1 = -(2/3)a^3 - l1 a^2 at (1, 1/4, -0.2)
    auto [xi, yi] = strip_boundary_intersections(1.0, 0.25, -0.2);
    CHECK(std::abs(xi - (-0.2149935)) < 5e-7);
    CHECK(std::abs(yi - 0.3266052) < 5e-7);
    // the point is on both level sets
    FirstIntegral h1(Family::Saddle, 1.0), h2(Family::Saddle, 0.25);
    CHECK(std::abs(h1.value({xi, yi}) - h1.value({-0.2, 0})) < 1e-12);
    CHECK(std::abs(h2.value({xi, yi})) < 1e-12);
    // an orbit far inside the annulus region misses the heteroclinic entirely
    CHECK_THROWS_AS((void)strip_boundary_intersections(1.0, 0.25, -0.8), Error);
}

TEST_CASE("tau1: mirror arrival and independent half-time oracle") {
    auto [xi, yi] = strip_boundary_intersections(1.0, 0.25, -0.2);
    double tau1 = compute_tau1(1.0, 0.25, -0.2, cfg);
    CHECK(std::abs(tau1 - 0.8618719) < 1e-6);
    // reversibility: the arc crosses the symmetry axis at half time
    EventFunction axis{[](Point p) { return p.y; }, EventDirection::rising};
    EventResult r = integrate_to_event(VectorFieldSpec{Family::Saddle, 1.0}, {xi, -yi}, axis, cfg);
    CHECK(std::abs(tau1 - 2 * r.t) < 1e-8);
    // arrival is the mirror of the entry
    Point arr = flow_map({Family::Saddle, 1.0}, tau1, {xi, -yi}, cfg);
    CHECK(dist(arr, {xi, yi}) < 1e-6);
}

TEST_CASE("psi_bar: symmetric zeros") {
    VectorFieldSpec s1{Family::Saddle, 1.0};
    // half the orbit period maps an axis point to itself mirrored -> psi = 0
    double period = orbit_period(s1, {-0.2, 0}, cfg);
    CHECK(std::abs(psi_bar(s1, period / 2, {-0.2, 0}, cfg)) < 1e-8);
    // entry point of the alpha arc under tau1 (compute_tau1 postcondition)
    auto [xi, yi] = strip_boundary_intersections(1.0, 0.25, -0.2);
    double tau1 = compute_tau1(1.0, 0.25, -0.2, cfg);
    CHECK(std::abs(psi_bar(s1, tau1, {xi, -yi}, cfg)) < 1e-6);
}

TEST_CASE("inner boundary: symmetric point and enclosing curve") {
    double tau1 = compute_tau1(1.0, 0.25, -0.2, cfg);
    InnerBoundary ib = find_inner_boundary(1.0, 0.25, -0.18, tau1, cfg);
    // the psi zero sits at flow time -tau1/2 from the beta tip by oddness
    Point expect = flow_map({Family::Saddle, 1.0}, -tau1 / 2, {-0.18, 0}, cfg);
    CHECK(dist(ib.q_hat, expect) < 1e-6);
    // mirror condition: phi_{tau1}(q_hat) = h(q_hat)
    Point img = flow_map({Family::Saddle, 1.0}, tau1, ib.q_hat, cfg);
    CHECK(dist(img, mirror(ib.q_hat)) < 1e-6);
    // level strictly between the tip's annulus level and the separatrix
    FirstIntegral h2(Family::Saddle, 0.25);
    CHECK(ib.level > h2.value({-0.18, 0}));
    CHECK(ib.level < 0);
    CHECK(ib.curve.contains({-0.25, 0}));  // the lambda2 center
}

TEST_CASE("choose_tau2: isochronous rotation never gains winding") {
    // every LinearCenter orbit has period 2 pi: zero twist, the grid exhausts
    auto chart = std::make_shared<RadialAnnulusChart>(Point{0, 0}, 0.5, 1.5);
    IntegratorConfig short_cfg = cfg;
    short_cfg.max_time = 100;
    CHECK_THROWS_WITH_AS(
        (void)choose_tau2(chart, {Family::LinearCenter, 0.0}, 2 * std::numbers::pi, 2, short_cfg),
        doctest::Contains("no pulse duration"), Error);
}

TEST_CASE("build_saddle(1, 1/4): certified instance") {
    const Construction& c = saddle_default();
    CHECK(c.x_star == doctest::Approx(-0.375));
    CHECK(c.alpha == doctest::Approx(-0.125));
    CHECK(c.strip_twist.passed);
    CHECK(c.strip_twist.n == 1);
    CHECK(c.strip_twist.margin > 0);
    CHECK(c.annular_twist.m >= 2);
    CHECK(c.annular_twist.margin > 0);
    CHECK(c.annular_twist.boundary_residual <= 1e-6);
    CHECK(c.certificate.symbol_count >= 2);
    CHECK(c.certificate.composition == "strip-first");
    CHECK(c.K.nonempty() >= c.annular_twist.m - 1);
    // the linkage rectangles are mirror images of each other
    Polyline b1 = c.link.R1.boundary(), b2 = c.link.R2.boundary();
    CHECK(hausdorff_distance(b1, revpulse::mirror(b2)) < 1e-6);
    // forcing slots follow the composition
    PulseForcing f = c.forcing();
    CHECK(f.tau1 == doctest::Approx(c.tau_strip));
    CHECK(f.tau2 == doctest::Approx(c.tau_annulus));
}

TEST_CASE("build_saddle(1, -0.1): second sub-case is annulus-first") {
    Construction c = build_saddle(1.0, -0.1, 2, cfg);
    CHECK(c.x_star == doctest::Approx(-1.5));  // annulus from lambda1 = 1
    CHECK_FALSE(c.strip_first);
    CHECK(c.certificate.composition == "annulus-first");
    CHECK(c.strip_twist.passed);
    CHECK(c.annular_twist.m >= 2);
    CHECK(c.annular_twist.margin > 0);
    CHECK(c.K.nonempty() >= c.annular_twist.m - 1);
}

TEST_CASE("build_cusp: both lambda2 signs certify") {
    for (double l2 : {-0.5, 0.5}) {
        Construction c = build_cusp(-1.0, l2, 2, cfg);
        CHECK(c.x_star == doctest::Approx(-2.0));
        CHECK(c.certificate.composition == "annulus-first");
        CHECK(c.strip_twist.passed);
        CHECK(c.annular_twist.m >= 2);
        CHECK(c.annular_twist.margin > 0);
        CHECK(c.K.nonempty() >= c.annular_twist.m - 1);
    }
}

TEST_CASE("builder preconditions") {
    CHECK_THROWS_AS((void)build_saddle(1.0, 1.0, 2, cfg), Error);   // lambda1 == lambda2
    CHECK_THROWS_AS((void)build_saddle(-1.0, 0.25, 2, cfg), Error); // lambda1 <= 0
    CHECK_THROWS_AS((void)build_cusp(1.0, -0.5, 2, cfg), Error);    // lambda1 >= 0
    CHECK_THROWS_AS((void)build_saddle(1.0, 0.25, 1, cfg), Error);  // m < 2
    try {
        (void)build_saddle(1.0, 1.0, 2, cfg);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::precondition);
    }
}
