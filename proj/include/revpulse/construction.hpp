#pragma once

#include <memory>
#include <utility>

#include "revpulse/geometry.hpp"
#include "revpulse/sap.hpp"
#include "revpulse/switched.hpp"

namespace revpulse {

/// Numbers that pin down how a certified instance was built.
struct Provenance {
    double alpha = 0, beta = 0;
    double x_star = 0, x_int = 0, y_int = 0;
    double tau1 = 0, sigma_hat = 0, inner_level = 0, tau2 = 0;
};

/// Fully assembled linked strip/annulus pair with its chaos certificate.
struct Construction {
    Family family = Family::Saddle;
    double lambda1 = 0, lambda2 = 0;
    bool strip_first = true;  // strip half-map occupies the tau1 slot

    double alpha = 0, beta = 0;
    double x_star = 0, x_int = 0, y_int = 0;
    double tau_strip = 0, sigma_hat = 0, inner_level = 0, tau_annulus = 0;

    TopAnnulus A;
    TopStrip S;        // linkage strip (arcs long enough to leave the ball)
    TopStrip S_check;  // trimmed strip used for boundary-invariance sampling
    Linkage link;
    StripTwistResult strip_twist;
    TwistCertificate annular_twist;
    CrossingSets K;
    ChaosCertificate certificate;

    PulseForcing forcing() const;
    SwitchedSystem system() const { return {family, forcing()}; }
    Provenance provenance() const;
};

/// Heteroclinic cycle of the saddle field (lambda2 > 0): parabola
/// y^2 = (2/3)x + lambda2 on [-(3/2)lambda2, 0] plus the y-axis segment.
JordanCurve outer_boundary_saddle(double lambda2);

/// Homoclinic loop of the cusp field (lambda1 < 0) through (-2 sqrt(-l1), 0).
JordanCurve outer_boundary_cusp(double lambda1);

/// Closed-form intersection of the lambda1 level orbit through (alpha,0) with
/// the lambda2 heteroclinic (saddle, lambda1 > lambda2 > 0). Returns
/// (x_int, y_int) with y_int > 0; throws geometric-failure when the orbit
/// misses the cycle.
std::pair<double, double> strip_boundary_intersections(double lambda1, double lambda2,
                                                       double alpha);

/// Transit time of the lambda1 flow across the lambda2 annulus along the orbit
/// through (alpha,0); checks the mirror-symmetric arrival to 1e-6.
double compute_tau1(double lambda1, double lambda2, double alpha, const IntegratorConfig& cfg);

/// psi(p) = y(phi_{tau}(p)) + y(p) for the given frozen field; zero exactly at
/// points mapped to their mirror image by the time-tau flow.
double psi_bar(const VectorFieldSpec& strip_spec, double tau, Point p,
               const IntegratorConfig& cfg);

struct InnerBoundary {
    double sigma_hat = 0;  // arc time from the outer crossing of the beta orbit
    double level = 0;      // annulus first-integral value of the inner curve
    Point q_hat;           // the symmetric point defining the curve
    JordanCurve curve;
};

/// Bisection of psi_bar along the beta-orbit arc between its outer-boundary
/// crossings (saddle, lambda1 > lambda2 > 0); throws construction-failure when
/// psi_bar does not change sign.
InnerBoundary find_inner_boundary(double lambda1, double lambda2, double beta, double tau1,
                                  const IntegratorConfig& cfg);

/// Smallest tau on the geometric grid {inner_period * 1.5^k} whose lifted
/// annulus flow map passes the annular twist with winding >= m and positive
/// margin; throws construction-failure (reporting the best winding) when the
/// grid is exhausted within cfg.max_time.
double choose_tau2(std::shared_ptr<const AnnulusChart> chart, const VectorFieldSpec& annulus_spec,
                   double inner_period, int m, const IntegratorConfig& cfg);

/// End-to-end builders. Preconditions:
///   saddle: lambda1 > 0, lambda1 > lambda2 (annulus from lambda2 when
///           lambda2 > 0, from lambda1 when lambda2 <= 0);
///   cusp:   lambda1 < 0, lambda2 > lambda1 (annulus always from lambda1).
Construction build_saddle(double lambda1, double lambda2, int m, const IntegratorConfig& cfg);
Construction build_cusp(double lambda1, double lambda2, int m, const IntegratorConfig& cfg);

}  // namespace revpulse
