#include "revpulse/normal_forms.hpp"

#include <algorithm>
#include <cmath>

namespace revpulse {

std::string family_name(Family f) {
    switch (f) {
        case Family::LinearCenter: return "linear_center";
        case Family::LinearSaddle: return "linear_saddle";
        case Family::Saddle: return "saddle";
        case Family::Cusp: return "cusp";
        case Family::NodalA: return "nodal_a";
        case Family::NodalB: return "nodal_b";
        case Family::Focal: return "focal";
    }
    return "?";
}

Family family_from_name(const std::string& name) {
    for (Family f : {Family::LinearCenter, Family::LinearSaddle, Family::Saddle,
                     Family::Cusp, Family::NodalA, Family::NodalB, Family::Focal}) {
        if (family_name(f) == name) return f;
    }
    throw Error(ErrorCode::precondition, "unknown family: " + name);
}

VectorFieldSpec::VectorFieldSpec(Family f, double l) : family(f), lambda(l) {
    if (!std::isfinite(l)) throw Error(ErrorCode::precondition, "lambda must be finite");
}

Point eval_field(const VectorFieldSpec& spec, Point p) {
    const double x = p.x, y = p.y, l = spec.lambda;
    switch (spec.family) {
        case Family::LinearCenter: return {y, -x};
        case Family::LinearSaddle: return {y, x};
        case Family::Saddle: return {x * y, x - y * y + l};
        case Family::Cusp: return {y, x * x + l};
        case Family::NodalA: return {x * y, x + 2 * y * y + l};
        case Family::NodalB: return {-x * y, x - 2 * y * y + l};
        case Family::Focal: return {x * y + y * y * y, -x + y * y + l};
    }
    return {};
}

Mat2 field_jacobian(const VectorFieldSpec& spec, Point p) {
    const double x = p.x, y = p.y;
    switch (spec.family) {
        case Family::LinearCenter: return {0, 1, -1, 0};
        case Family::LinearSaddle: return {0, 1, 1, 0};
        case Family::Saddle: return {y, x, 1, -2 * y};
        case Family::Cusp: return {0, 1, 2 * x, 0};
        case Family::NodalA: return {y, x, 1, 4 * y};
        case Family::NodalB: return {-y, -x, 1, -4 * y};
        case Family::Focal: return {y, x + 3 * y * y, -1, 2 * y};
    }
    return {};
}

namespace {

std::array<std::complex<double>, 2> eigenvalues_of(const Mat2& j) {
    const double tr = j.trace(), det = j.det();
    const double disc = tr * tr / 4.0 - det;
    if (disc >= 0.0) {
        const double s = std::sqrt(disc);
        return {std::complex<double>(tr / 2.0 + s, 0.0),
                std::complex<double>(tr / 2.0 - s, 0.0)};
    }
    const double s = std::sqrt(-disc);
    return {std::complex<double>(tr / 2.0, s), std::complex<double>(tr / 2.0, -s)};
}

EquilibriumKind classify(const std::array<std::complex<double>, 2>& eig, Point pos) {
    constexpr double eps = 1e-9;
    const auto& m1 = eig[0];
    const auto& m2 = eig[1];
    if (std::abs(m1) < eps || std::abs(m2) < eps) return EquilibriumKind::degenerate;
    if (std::abs(m1.imag()) > eps) {
        if (std::abs(m1.real()) < eps) {
            // Pure imaginary: on the symmetry line reversibility forces a center.
            return std::abs(pos.y) < 1e-12 ? EquilibriumKind::center
                                           : EquilibriumKind::focus;
        }
        return EquilibriumKind::focus;
    }
    const double r1 = m1.real(), r2 = m2.real();
    if (r1 * r2 < 0) return EquilibriumKind::saddle;
    if (r1 < 0 && r2 < 0) return EquilibriumKind::attractor;
    return EquilibriumKind::repeller;
}

Equilibrium make_eq(const VectorFieldSpec& spec, Point pos) {
    Equilibrium e;
    e.position = pos;
    e.eigenvalues = eigenvalues_of(field_jacobian(spec, pos));
    e.kind = classify(e.eigenvalues, pos);
    return e;
}

}  // namespace

std::string kind_name(EquilibriumKind k) {
    switch (k) {
        case EquilibriumKind::center: return "center";
        case EquilibriumKind::saddle: return "saddle";
        case EquilibriumKind::attractor: return "attractor";
        case EquilibriumKind::repeller: return "repeller";
        case EquilibriumKind::focus: return "focus";
        case EquilibriumKind::degenerate: return "degenerate";
    }
    return "?";
}

std::vector<Equilibrium> equilibria(const VectorFieldSpec& spec) {
    const double l = spec.lambda;
    std::vector<Equilibrium> out;
    auto add = [&](double x, double y) { out.push_back(make_eq(spec, {x, y})); };
    switch (spec.family) {
        case Family::LinearCenter:
        case Family::LinearSaddle:
            add(0, 0);
            break;
        case Family::Saddle:
            add(-l, 0);
            if (l > 0) {
                add(0, -std::sqrt(l));
                add(0, std::sqrt(l));
            }
            break;
        case Family::Cusp:
            if (l < 0) {
                add(-std::sqrt(-l), 0);
                add(std::sqrt(-l), 0);
            } else if (l == 0) {
                add(0, 0);
            }
            break;
        case Family::NodalA:
            add(-l, 0);
            if (l < 0) {
                add(0, -std::sqrt(-l / 2));
                add(0, std::sqrt(-l / 2));
            }
            break;
        case Family::NodalB:
            add(-l, 0);
            if (l > 0) {
                add(0, -std::sqrt(l / 2));
                add(0, std::sqrt(l / 2));
            }
            break;
        case Family::Focal:
            add(l, 0);
            if (l < 0) {
                add(l / 2, -std::sqrt(-l / 2));
                add(l / 2, std::sqrt(-l / 2));
            }
            break;
    }
    // Drop duplicates created at lambda = 0 degeneracies.
    std::vector<Equilibrium> uniq;
    for (const auto& e : out) {
        bool dup = false;
        for (const auto& u : uniq)
            if (dist(u.position, e.position) < 1e-12) dup = true;
        if (!dup) uniq.push_back(e);
    }
    return uniq;
}

double check_reversibility(const VectorFieldSpec& spec, std::span<const Point> points) {
    double worst = 0.0;
    for (Point p : points) {
        if (!finite(p)) throw Error(ErrorCode::precondition, "non-finite sample point");
        const Point v = eval_field(spec, p);
        const Point vh = eval_field(spec, mirror(p));
        // Dh = diag(1,-1): residual = (v.x + vh.x, -v.y + vh.y)
        worst = std::max(worst, norm(Point{v.x + vh.x, vh.y - v.y}));
    }
    return worst;
}

FirstIntegral::FirstIntegral(Family f, double l) : family(f), lambda(l) {
    if (f != Family::Saddle && f != Family::Cusp)
        throw Error(ErrorCode::precondition,
                    "first integral only defined for saddle and cusp families");
}

double FirstIntegral::value(Point p) const {
    const double x = p.x, y = p.y;
    if (family == Family::Saddle)
        return x * x * y * y - (2.0 / 3.0) * x * x * x - lambda * x * x;
    return y * y / 2.0 - x * x * x / 3.0 - lambda * x;
}

Point FirstIntegral::gradient(Point p) const {
    const double x = p.x, y = p.y;
    if (family == Family::Saddle)
        return {2 * x * y * y - 2 * x * x - 2 * lambda * x, 2 * x * x * y};
    return {-x * x - lambda, y};
}

double FirstIntegral::separatrix_level() const {
    if (family == Family::Saddle) {
        if (lambda <= 0)
            throw Error(ErrorCode::precondition, "saddle heteroclinic needs lambda > 0");
        return 0.0;
    }
    if (lambda >= 0)
        throw Error(ErrorCode::precondition, "cusp homoclinic needs lambda < 0");
    return (2.0 / 3.0) * std::pow(-lambda, 1.5);
}

Point FirstIntegral::center() const {
    if (family == Family::Saddle) return {-lambda, 0};
    return {-std::sqrt(-lambda), 0};
}

}  // namespace revpulse
