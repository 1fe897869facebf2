#pragma once

#include <array>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include "revpulse/types.hpp"

namespace revpulse {

/// The seven reversible planar normal forms (involution h(x,y) = (x,-y)).
enum class Family {
    LinearCenter,  // (y, -x)
    LinearSaddle,  // (y, x)
    Saddle,        // (x*y, x - y^2 + lambda)
    Cusp,          // (y, x^2 + lambda)
    NodalA,        // (x*y, x + 2y^2 + lambda)
    NodalB,        // (-x*y, x - 2y^2 + lambda)
    Focal,         // (x*y + y^3, -x + y^2 + lambda)
};

std::string family_name(Family f);
Family family_from_name(const std::string& name);

struct VectorFieldSpec {
    Family family = Family::Saddle;
    double lambda = 0.0;  // ignored for the two linear families

    VectorFieldSpec() = default;
    VectorFieldSpec(Family f, double l);
};

struct Mat2 {
    double a = 0, b = 0, c = 0, d = 0;  // [[a,b],[c,d]]
    double trace() const { return a + d; }
    double det() const { return a * d - b * c; }
};

Point eval_field(const VectorFieldSpec& spec, Point p);
Mat2 field_jacobian(const VectorFieldSpec& spec, Point p);

enum class EquilibriumKind { center, saddle, attractor, repeller, focus, degenerate };

std::string kind_name(EquilibriumKind k);

struct Equilibrium {
    Point position;
    EquilibriumKind kind = EquilibriumKind::degenerate;
    std::array<std::complex<double>, 2> eigenvalues{};
};

/// All real equilibria in closed form, classified from the Jacobian.
std::vector<Equilibrium> equilibria(const VectorFieldSpec& spec);

/// max over points of |Dh(p) V(p) + V(h(p))|; identically zero for every family.
double check_reversibility(const VectorFieldSpec& spec, std::span<const Point> points);

/// Conserved quantity for the two conservative families.
///   Saddle: H = x^2 y^2 - (2/3) x^3 - lambda x^2
///   Cusp:   H = y^2/2  - x^3/3      - lambda x
struct FirstIntegral {
    Family family;
    double lambda;

    /// Throws ErrorCode::precondition for any family other than Saddle/Cusp.
    FirstIntegral(Family f, double l);

    double value(Point p) const;
    Point gradient(Point p) const;

    /// H value on the separatrix loop: 0 (saddle heteroclinic, lambda>0),
    /// (2/3)(-lambda)^{3/2} (cusp homoclinic, lambda<0).
    double separatrix_level() const;

    /// The symmetric center (H minimum) enclosed by the separatrix loop.
    Point center() const;
};

inline double first_integral(const FirstIntegral& fi, Point p) { return fi.value(p); }

}  // namespace revpulse
