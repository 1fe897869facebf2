#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "revpulse/flow.hpp"
#include "revpulse/normal_forms.hpp"
#include "revpulse/types.hpp"

namespace revpulse {

using Polyline = std::vector<Point>;

// --- polyline utilities -----------------------------------------------------

double polyline_length(const Polyline& c);
Point polyline_eval(const Polyline& c, double s);  // s = segment index + fraction
Polyline mirror(const Polyline& c);

struct CurveHit {
    double s = 0;  // parameter on the first curve
    double t = 0;  // parameter on the second curve
    Point p;
};
std::vector<CurveHit> intersect_polylines(const Polyline& a, const Polyline& b);

/// Piece of `c` from parameter s0 to s1. For closed curves set `wrap` to allow
/// going through the seam; the shorter of the two arcs is NOT chosen here —
/// the direction is s0 -> s1 increasing (mod length if wrap).
Polyline sub_polyline(const Polyline& c, double s0, double s1, bool wrap = false);

bool point_in_polygon(Point p, const Polyline& closed);
double polygon_signed_area(const Polyline& closed);
bool is_simple(const Polyline& c, bool closed);

/// Max distance from any vertex of `a` to the nearest point of `b`, symmetrized.
double hausdorff_distance(const Polyline& a, const Polyline& b);

/// Glues arcs into one closed loop by matching nearest endpoints;
/// throws geometric-failure when gaps exceed `tol`.
Polyline assemble_loop(std::vector<Polyline> arcs, double tol = 1e-6);

struct JordanCurve {
    Polyline pts;  // closed: first == last

    JordanCurve() = default;
    explicit JordanCurve(Polyline p);  // validates closed + simple

    bool contains(Point p) const { return point_in_polygon(p, pts); }
    double area() const { return polygon_signed_area(pts); }
};

// --- lift charts -------------------------------------------------------------
// Canonical covering coordinates used by the twist machinery:
//   strip:   c = (x, y) with y in [-1,1], x the normalized longitudinal
//            coordinate (rectangle windows at [-2,-1] and [1,2]);
//   annulus: c = (theta, rho) with rho in [-1,1] and theta of period 2
//            (rectangle windows at [0,1/2] and [1,3/2] per revolution).

struct StripChart {
    virtual ~StripChart() = default;
    virtual Point from_plane(Point p) const = 0;
    virtual Point to_plane(Point c) const = 0;
    /// Cheap necessary condition for membership; lets containment tests skip
    /// the (possibly expensive) full lift for clearly-outside points.
    virtual bool plausibly_inside(Point) const { return true; }
};

struct AnnulusChart {
    virtual ~AnnulusChart() = default;
    virtual Point from_plane(Point p) const = 0;  // theta reduced to [0,2)
    virtual Point to_plane(Point c) const = 0;    // theta taken mod 2
};

/// Straight strip [x_min,x_max] x [-1,1]: the chart is the identity.
struct AffineStripChart final : StripChart {
    Point from_plane(Point p) const override { return p; }
    Point to_plane(Point c) const override { return c; }
};

/// Circular annulus around `center` with radii [r_inner, r_outer]:
/// theta = angle/pi (one revolution = 2), rho affine in the radius.
struct RadialAnnulusChart final : AnnulusChart {
    Point center{0, 0};
    double r_inner = 1, r_outer = 2;

    RadialAnnulusChart(Point c, double ri, double ro);
    Point from_plane(Point p) const override;
    Point to_plane(Point c) const override;
};

/// Monotone piecewise-linear longitudinal normalization for flow strips.
/// Knot positions (in flow-time units) are interpolated affinely between the
/// two boundary levels; canonical values are shared by all levels.
struct StripNormalizer {
    std::vector<double> u_lo, u_hi;  // knots at y = -1 and y = +1 (same size)
    std::vector<double> x;           // canonical values, strictly increasing

    double canon(double u, double y) const;
    double inverse(double xc, double y) const;
};

/// Strip whose boundary arcs are trajectories of `spec` on two levels of its
/// first integral. Longitudinal coordinate = signed flow time from the
/// symmetry-axis turning point ("tip"), passed through the normalizer.
class FlowStripChart final : public StripChart {
  public:
    FlowStripChart(VectorFieldSpec spec, double level_lo, double level_hi,
                   double tip_x_min, double tip_x_max, bool tip_rising,
                   StripNormalizer norm, IntegratorConfig cfg);

    Point from_plane(Point p) const override;
    Point to_plane(Point c) const override;
    bool plausibly_inside(Point p) const override;

    double transverse(Point p) const;       // y from the first-integral value
    double flow_time(Point p) const;        // raw longitudinal u
    Point tip_point(double y) const;        // turning point of the level orbit
    double level_of(double y) const;
    const StripNormalizer& normalizer() const { return norm_; }
    VectorFieldSpec field() const { return spec_; }

  private:
    VectorFieldSpec spec_;
    FirstIntegral fi_;
    double level_lo_, level_hi_;
    double tip_x_min_, tip_x_max_;
    bool tip_rising_;
    StripNormalizer norm_;
    IntegratorConfig cfg_;
};

/// Degree-1 monotone circle normalization: raw angle (period 1) to canonical
/// theta (period 2), piecewise linear between knots.
struct CircleNormalizer {
    std::vector<double> raw;    // increasing, raw.back() - raw.front() == 1
    std::vector<double> canon;  // increasing, canon.back() - canon.front() == 2

    double map(double a) const;      // equivariant: map(a+1) = map(a)+2
    double inverse(double c) const;
};

/// Annulus bounded by two level curves of a first integral, star-shaped about
/// `center`; rho affine in the integral value, theta from the normalized angle.
class IntegralAnnulusChart final : public AnnulusChart {
  public:
    IntegralAnnulusChart(FirstIntegral fi, double level_in, double level_out,
                         Point center, CircleNormalizer norm, double r_max);

    Point from_plane(Point p) const override;
    Point to_plane(Point c) const override;

    double radial(Point p) const;  // rho
    double raw_angle(Point p) const;
    const CircleNormalizer& normalizer() const { return norm_; }
    Point center() const { return center_; }

  private:
    FirstIntegral fi_;
    double level_in_, level_out_;
    Point center_;
    CircleNormalizer norm_;
    double r_max_;
};

// --- regions ------------------------------------------------------------------

struct TopStrip {
    Polyline lower, upper;  // boundary arcs (images of y = -1 / y = +1)
    double x_min = 0, x_max = 0;
    std::shared_ptr<const StripChart> chart;

    void validate() const;
    bool contains(Point p, double tol = 1e-9) const;
};

struct TopAnnulus {
    JordanCurve inner, outer;
    Point center;
    std::shared_ptr<const AnnulusChart> chart;

    void validate() const;
    bool contains(Point p) const;
};

/// Public lift operations (spec'd interface; the annulus theta is reported
/// with period 1). Throw out-of-domain for points outside the region.
Point strip_lift(const TopStrip& s, Point p);
Point strip_unlift(const TopStrip& s, Point c);
Point annulus_lift(const TopAnnulus& a, Point p);
Point annulus_unlift(const TopAnnulus& a, Point c);

struct OrientedRectangle {
    // The four sides, named by the curve family they lie on.
    Polyline on_inner, on_outer;  // arcs on the annulus boundaries
    Polyline on_lower, on_upper;  // arcs on the strip boundaries
    enum class MinusOn { annulus, strip };
    MinusOn minus_on = MinusOn::annulus;

    Polyline boundary() const;  // assembled closed loop
    bool contains(Point p) const;
    std::pair<const Polyline*, const Polyline*> minus_sides() const;
};

struct Linkage {
    Polyline ball;    // circle polygon containing the annulus
    Polyline gamma1;  // bridge of S inside in(inner boundary)
    Polyline gamma2;  // ray of A avoiding S
    OrientedRectangle R1, R2;  // R1 in the lower half (smaller strip-x window)
};

/// Checks the linkage condition and extracts the two crossing rectangles.
Linkage verify_linkage(const TopAnnulus& A, const TopStrip& S);

// --- lifted maps ---------------------------------------------------------------

/// Map expressed in covering coordinates (strip: (x,y); annulus: unwrapped
/// (theta,rho)).
using LiftedMap = std::function<Point(Point)>;
using PlaneMap = std::function<Point(Point)>;

LiftedMap lift_through_strip(std::shared_ptr<const StripChart> chart, PlaneMap f);

/// Lifts the time-`tau` flow map of `spec` through an annulus chart, unwrapping
/// theta along the trajectory (nearest branch, automatic refinement when a
/// sampled jump exceeds half a window).
LiftedMap lift_flow_through_annulus(std::shared_ptr<const AnnulusChart> chart,
                                    VectorFieldSpec spec, double tau, IntegratorConfig cfg);

}  // namespace revpulse
