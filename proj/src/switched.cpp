#include "revpulse/switched.hpp"

#include <cmath>

namespace revpulse {

PulseForcing::PulseForcing(double l1, double l2, double t1, double t2)
    : lambda1(l1), lambda2(l2), tau1(t1), tau2(t2) {
    if (!std::isfinite(l1) || !std::isfinite(l2) || !std::isfinite(t1) || !std::isfinite(t2))
        throw Error(ErrorCode::precondition, "forcing parameters must be finite");
    if (l1 == l2)
        throw Error(ErrorCode::precondition, "pulse forcing requires lambda1 != lambda2");
    // tau = 0 is admitted (degenerate forcing, used by identity checks); the
    // period must still be positive.
    if (t1 < 0 || t2 < 0 || t1 + t2 <= 0)
        throw Error(ErrorCode::precondition, "pulse durations must be nonnegative with T > 0");
}

SwitchedSystem::SwitchedSystem(Family f, PulseForcing p) : family(f), forcing(p) {
    if (f == Family::LinearCenter || f == Family::LinearSaddle)
        throw Error(ErrorCode::precondition,
                    "pulse forcing applies to the five nonlinear families only");
}

Point half_map(const SwitchedSystem& sys, Phase phase, Point p, const IntegratorConfig& cfg) {
    const bool first = phase == Phase::first;
    const double tau = first ? sys.forcing.tau1 : sys.forcing.tau2;
    if (tau == 0.0) return p;
    return flow_map(first ? sys.first() : sys.second(), tau, p, cfg);
}

Point poincare(const SwitchedSystem& sys, Point p, const IntegratorConfig& cfg) {
    return half_map(sys, Phase::second, half_map(sys, Phase::first, p, cfg), cfg);
}

std::vector<int> itinerary(const SwitchedSystem& sys, Point p, int k,
                           const std::vector<Region>& regions, const IntegratorConfig& cfg) {
    if (k < 0) throw Error(ErrorCode::precondition, "negative word length");
    std::vector<int> word;
    word.reserve(k);
    Point q = p;
    for (int i = 0; i < k; ++i) {
        int symbol = -1;
        for (size_t s = 0; s < regions.size(); ++s) {
            if (regions[s](q)) {
                if (symbol >= 0)
                    throw Error(ErrorCode::precondition,
                                "regions overlap at iterate " + std::to_string(i));
                symbol = static_cast<int>(s);
            }
        }
        if (symbol < 0)
            throw Error(ErrorCode::itinerary_break,
                        "iterate " + std::to_string(i) + " lies in no region");
        word.push_back(symbol);
        if (i + 1 < k) q = poincare(sys, q, cfg);
    }
    return word;
}

}  // namespace revpulse
