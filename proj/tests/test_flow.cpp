#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "revpulse/flow.hpp"

using namespace revpulse;

namespace {
const IntegratorConfig cfg{};
}

TEST_CASE("flow map basics") {
    VectorFieldSpec saddle{Family::Saddle, 1.0};
    Point p{-0.5, 0.3};
    CHECK(dist(flow_map(saddle, 0.0, p, cfg), p) == doctest::Approx(0.0));
    // equilibria are fixed
    Point eq{-1.0, 0.0};
    CHECK(dist(flow_map(saddle, 5.0, eq, cfg), eq) <= 1e-9);
}

TEST_CASE("linear center flows are circles") {
    VectorFieldSpec lc{Family::LinearCenter, 0.0};
    // (x,y)' = (y,-x): from (1,0) at time t the point is (cos t, -sin t)
    const double t = 1.234;
    Point p = flow_map(lc, t, {1, 0}, cfg);
    CHECK(p.x == doctest::Approx(std::cos(t)).epsilon(1e-9));
    CHECK(p.y == doctest::Approx(-std::sin(t)).epsilon(1e-9));
    // backwards too
    Point q = flow_map(lc, -t, {1, 0}, cfg);
    CHECK(q.x == doctest::Approx(std::cos(t)).epsilon(1e-9));
    CHECK(q.y == doctest::Approx(std::sin(t)).epsilon(1e-9));
}

TEST_CASE("flow property: composition of flows") {
    VectorFieldSpec spec{Family::Saddle, 1.0};
    Point p{-0.5, 0.0};
    Point a = flow_map(spec, 1.0, p, cfg);
    Point b = flow_map(spec, 0.7, flow_map(spec, 0.3, p, cfg), cfg);
    CHECK(dist(a, b) <= 1e-9);
}

TEST_CASE("reversibility of the flow: h(phi_t(h(p))) = phi_{-t}(p)") {
    for (Family f : {Family::Saddle, Family::Cusp, Family::Focal}) {
        VectorFieldSpec spec{f, f == Family::Cusp ? -1.0 : (f == Family::Focal ? -0.5 : 1.0)};
        Point p{-0.6, 0.2};
        const double t = 0.8;
        Point lhs = mirror(flow_map(spec, t, mirror(p), cfg));
        Point rhs = flow_map(spec, -t, p, cfg);
        CHECK(dist(lhs, rhs) <= 1e-9);
    }
}

TEST_CASE("first integral conserved along long trajectories") {
    VectorFieldSpec spec{Family::Saddle, 1.0};
    FirstIntegral fi(Family::Saddle, 1.0);
    Point p{-0.5, 0.0};
    Trajectory traj = integrate(spec, p, 50.0, cfg);
    const double h0 = fi.value(p);
    double worst = 0;
    for (const auto& [t, q] : traj.samples()) worst = std::max(worst, std::abs(fi.value(q) - h0));
    CHECK(worst <= 1e-8);

    VectorFieldSpec cusp{Family::Cusp, -1.0};
    FirstIntegral fc(Family::Cusp, -1.0);
    Point pc{-0.5, 0.0};
    Trajectory tc = integrate(cusp, pc, 50.0, cfg);
    const double hc0 = fc.value(pc);
    worst = 0;
    for (const auto& [t, q] : tc.samples()) worst = std::max(worst, std::abs(fc.value(q) - hc0));
    CHECK(worst <= 1e-8);
}

TEST_CASE("dense output matches direct integration") {
    VectorFieldSpec spec{Family::Saddle, 1.0};
    Trajectory traj = integrate(spec, {-0.5, 0.1}, 3.0, cfg);
    for (double t : {0.1, 0.77, 1.5, 2.9}) {
        Point a = traj.eval(t);
        Point b = flow_map(spec, t, {-0.5, 0.1}, cfg);
        CHECK(dist(a, b) <= 1e-8);
    }
    CHECK_THROWS_AS(traj.eval(3.5), Error);
    CHECK_THROWS_AS(traj.eval(-0.5), Error);
}

TEST_CASE("event detection: closed saddle orbit crossing x = -1") {
    // From (-1/2, 0) the orbit encircles the center (-1,0) on level H = -1/6;
    // on x = -1 that level gives y^2 = 1/6.
    VectorFieldSpec spec{Family::Saddle, 1.0};
    EventFunction ev;
    ev.g = [](Point p) { return p.x + 1.0; };
    ev.direction = EventDirection::falling;
    EventResult r = integrate_to_event(spec, {-0.5, 0.0}, ev, cfg);
    CHECK(std::abs(ev.g(r.p)) <= 1e-10);
    CHECK(r.t > 0);
    CHECK(r.p.y == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-8));

    // second crossing (direction-agnostic) is the mirror point below the axis
    ev.direction = EventDirection::any;
    EventResult r2 = integrate_to_event(spec, {-0.5, 0.0}, ev, cfg, 1);
    CHECK(r2.p.y == doctest::Approx(-1.0 / std::sqrt(6.0)).epsilon(1e-8));
    CHECK(r2.t > r.t);
}

TEST_CASE("events at t = 0 are skipped") {
    VectorFieldSpec spec{Family::LinearCenter, 0.0};
    EventFunction ev;
    ev.g = [](Point p) { return p.y; };
    ev.direction = EventDirection::any;
    // start exactly on the section: first reported crossing is half a turn later
    EventResult r = integrate_to_event(spec, {1.0, 0.0}, ev, cfg);
    CHECK(r.t == doctest::Approx(std::numbers::pi).epsilon(1e-9));
    CHECK(r.p.x == doctest::Approx(-1.0).epsilon(1e-8));
}

TEST_CASE("event never reached") {
    VectorFieldSpec spec{Family::LinearCenter, 0.0};
    EventFunction ev;
    ev.g = [](Point p) { return p.x - 5.0; };  // circle of radius 1 never reaches x = 5
    IntegratorConfig short_cfg = cfg;
    short_cfg.max_time = 20.0;
    try {
        integrate_to_event(spec, {1.0, 0.0}, ev, short_cfg);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::event_not_found);
    }
}

TEST_CASE("orbit periods") {
    // linear center: every orbit has period 2*pi
    VectorFieldSpec lc{Family::LinearCenter, 0.0};
    CHECK(orbit_period(lc, {0.7, 0.2}, cfg) == doctest::Approx(2 * std::numbers::pi).epsilon(1e-9));

    // saddle family, small oscillation near the center (-lambda, 0):
    // linearization has eigenvalues +-i*sqrt(lambda), period ~ 2*pi/sqrt(2)
    VectorFieldSpec spec{Family::Saddle, 2.0};
    const double T = orbit_period(spec, {-2.0 + 0.01, 0.0}, cfg);
    CHECK(T == doctest::Approx(2 * std::numbers::pi / std::sqrt(2.0)).epsilon(0.01));
}

TEST_CASE("orbit_period rejects equilibria and unbounded orbits") {
    VectorFieldSpec spec{Family::Saddle, 1.0};
    CHECK_THROWS_AS(orbit_period(spec, {-1.0, 0.0}, cfg), Error);
}

TEST_CASE("level set tracing: closed cusp orbit") {
    FirstIntegral fi(Family::Cusp, -1.0);
    const double level = fi.value({-1.0, 0.0}) + 0.1;  // just above the center value
    // seed on the symmetry axis right of the center
    double x = -1.0;
    while (fi.value({x, 0}) < level) x += 1e-4;
    LevelCurve c = trace_level_set(fi, level, {x, 0.0}, cfg);
    CHECK(c.closed);
    CHECK(c.points.size() > 50);
    for (const auto& p : c.points)
        CHECK(std::abs(fi.value(p) - level) <= 1e-10);
    // curve surrounds the center: both signs of y and of x - (-1) appear
    bool up = false, down = false;
    for (const auto& p : c.points) {
        up = up || p.y > 0.05;
        down = down || p.y < -0.05;
    }
    CHECK(up);
    CHECK(down);
}

TEST_CASE("level set tracing: critical point gives a single point") {
    FirstIntegral fi(Family::Cusp, -1.0);
    const double level = fi.value({-1.0, 0.0});
    LevelCurve c = trace_level_set(fi, level, {-1.0, 0.0}, cfg);
    CHECK(c.closed);
    CHECK(c.points.size() == 1);
}

TEST_CASE("level set tracing: unbounded level is clipped at the box") {
    FirstIntegral fi(Family::Cusp, -1.0);
    const double level = fi.value({2.0, 1.0});
    BoundingBox box{-4, 4, -4, 4};
    LevelCurve c = trace_level_set(fi, level, {2.0, 1.0}, cfg, box);
    CHECK_FALSE(c.closed);
    CHECK(c.points.size() > 10);
}

TEST_CASE("blow-up raises integration failure") {
    VectorFieldSpec spec{Family::Cusp, 1.0};
    IntegratorConfig c = cfg;
    c.max_time = 100.0;
    try {
        integrate(spec, {1.0, 1.0}, 100.0, c);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::integration_failure);
    }
}

TEST_CASE("config validation") {
    IntegratorConfig bad = cfg;
    bad.rel_tol = 1e-2;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = cfg;
    bad.max_step = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("csv export round-trips at full precision") {
    VectorFieldSpec spec{Family::Saddle, 1.0};
    Trajectory traj = integrate(spec, {-0.5, 0.0}, 2.0, cfg);
    const std::string path = "traj_test.csv";
    write_trajectory_csv(traj, path);
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,x,y");
    double t, x, y;
    char comma;
    int rows = 0;
    Point first{};
    while (in >> t >> comma >> x >> comma >> y) {
        if (rows == 0) first = {x, y};
        ++rows;
    }
    CHECK(rows == static_cast<int>(traj.samples().size()));
    CHECK(first.x == -0.5);
    CHECK(first.y == 0.0);
    std::remove(path.c_str());
}
