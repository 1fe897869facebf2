#pragma once

#include <vector>

#include "revpulse/construction.hpp"

namespace revpulse {

/// Periodic symbol word s_0 ... s_{k-1} over the certificate's symbols.
using SymbolWord = std::vector<int>;

struct PeriodicOrbitResult {
    Point initial;         // state at t = 0 on the Poincare section
    int k = 0;             // period multiplier: orbit period divides k*T
    double residual = 0;   // |Phi^k(p) - p|
    SymbolWord itinerary;  // realized word (equals the request on success)
    double condition = 0;  // condition estimate of the FD Jacobian of Phi^k
};

/// Membership predicates for the certificate's symbol sets, as plane
/// predicates at the t = 0 section (strip-first instances are transported
/// through the strip half-map to the section where the K sets live).
std::vector<Region> symbol_regions(const Construction& con, const IntegratorConfig& cfg);

/// Multistart damped Newton on Phi^k - id, seeded on a grid over the K set of
/// the word's first symbol. Accepts only solutions whose full itinerary
/// matches the word; throws orbit-not-found (reporting the best residual)
/// when every start fails.
PeriodicOrbitResult find_periodic_orbit(const Construction& con, const SymbolWord& word,
                                        const IntegratorConfig& cfg);

/// Independent check: re-integrates the full T-periodic system over k periods
/// and tests membership of each iterate in the prescribed set plus closure
/// |Phi^k(p) - p| <= 1e-7.
bool verify_itinerary(const SwitchedSystem& sys, Point p, const SymbolWord& word,
                      const std::vector<Region>& regions, const IntegratorConfig& cfg);

}  // namespace revpulse
