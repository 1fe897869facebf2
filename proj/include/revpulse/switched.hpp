#pragma once

#include <functional>
#include <string>
#include <vector>

#include "revpulse/flow.hpp"
#include "revpulse/normal_forms.hpp"
#include "revpulse/types.hpp"

namespace revpulse {

/// Two-level T-periodic pulse: p(t) = lambda1 on [0,tau1), lambda2 on [tau1,T).
struct PulseForcing {
    double lambda1 = 0, lambda2 = 0;
    double tau1 = 0, tau2 = 0;

    PulseForcing() = default;
    PulseForcing(double l1, double l2, double t1, double t2);
    double period() const { return tau1 + tau2; }
};

/// Pulse-forced system: xdot = y f(x,y^2), ydot = g(x,y^2) + p(t).
/// Only the five nonlinear families admit the additive forcing on ydot.
struct SwitchedSystem {
    Family family = Family::Saddle;
    PulseForcing forcing;

    SwitchedSystem() = default;
    SwitchedSystem(Family f, PulseForcing p);

    VectorFieldSpec first() const { return {family, forcing.lambda1}; }
    VectorFieldSpec second() const { return {family, forcing.lambda2}; }
};

enum class Phase { first, second };

/// Frozen-field half-period map: phi_{lambda_i}(tau_i, p).
Point half_map(const SwitchedSystem& sys, Phase phase, Point p, const IntegratorConfig& cfg);

/// Poincare map of the T-periodic system: Phi = Phi_{lambda2} o Phi_{lambda1}.
Point poincare(const SwitchedSystem& sys, Point p, const IntegratorConfig& cfg);

/// Membership predicate for a compact symbol region.
using Region = std::function<bool(Point)>;

/// Symbol word s_0...s_{k-1} with Phi^i(p) in regions[s_i]; throws
/// ErrorCode::itinerary_break naming the failing index if an iterate escapes,
/// ErrorCode::precondition if an iterate lies in two regions (not disjoint).
std::vector<int> itinerary(const SwitchedSystem& sys, Point p, int k,
                           const std::vector<Region>& regions, const IntegratorConfig& cfg);

}  // namespace revpulse
