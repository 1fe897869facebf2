#pragma once

#include <string>
#include <vector>

#include "revpulse/geometry.hpp"
#include "revpulse/switched.hpp"
#include "revpulse/types.hpp"

namespace revpulse {

// All twist checks work in the canonical covering coordinates produced by the
// lift charts. Rectangles are normalized at construction time to the windows
//   strip:   source [-2,-1] x [-1,1], target [1,2] x [-1,1] (or swapped);
//   annulus: source [0,1/2] x [-1,1], target copies [2l+1, 2l+3/2] x [-1,1].

/// Axis-aligned window in lift coordinates.
struct Window {
    double x0 = 0, x1 = 0, y0 = -1, y1 = 1;
    bool contains(Point c, double tol = 0) const {
        return c.x >= x0 - tol && c.x <= x1 + tol && c.y >= y0 - tol && c.y <= y1 + tol;
    }
};

struct TwistCertificate {
    int j_minus1 = 0;
    int j_plus1 = 0;
    int m = 0;                     // |j_minus1 - j_plus1| + 1
    double margin = 0;             // smallest inequality slack, lift units
    double boundary_residual = 0;  // filled by the caller from invariance check
    int samples = 0;
    int pair = 0;  // which inequality family passed (1 or 2)
};

struct StripTwistResult {
    bool passed = false;
    double margin = 0;
    int n = 0;          // strip-direction crossing multiplicity
    int pair = 0;       // which inequality pair held
    int source = 0;     // 1: window [-2,-1] was the source, 2: window [1,2]
    int samples = 0;
};

struct CrossingSets {
    std::vector<int> ells;                      // label of each set
    std::vector<std::vector<Window>> cells;     // grid cells per set, in R_{1,0}
    int grid = 0;                               // cells per unit length
    int nonempty() const {
        int k = 0;
        for (const auto& c : cells) k += !c.empty();
        return k;
    }
};

struct StretchResult {
    bool passed = false;
    Polyline witness;    // offending source path when failed
    std::string reason;
};

struct ChaosCertificate {
    Family family = Family::Saddle;
    double lambda1 = 0, lambda2 = 0, tau1 = 0, tau2 = 0;
    int n = 0, m = 0;
    int symbol_count = 0;  // n*m
    double margin_strip = 0, margin_annulus = 0;
    int samples = 0, grid_resolution = 0;
    std::string composition;       // which half map plays h1
    int crossing_sets_nonempty = 0;  // measured count (th-1 states m-1, proof m)
};

/// Max over sampled boundary points of ||transverse lift of f(p)| - 1|.
/// Throws invariance-violation (with the witness) when a boundary point leaves
/// the lift domain.
double check_boundary_invariance(const PlaneMap& f, const TopStrip& S, int samples);
double check_boundary_invariance(const PlaneMap& f, const TopAnnulus& A, int samples);

/// Strip twist: evaluates the longitudinal displacement Xi(x,y) = f(x,y).x - x
/// on the horizontal sides of each candidate source window and tests the four
/// inequality pairs; passes if one pair holds at every sample.
StripTwistResult check_strip_twist(const LiftedMap& f, const Window& R1, const Window& R2,
                                   int samples);

/// Annular twist: computes the image angle Theta on both horizontal sides of
/// the source window, selects the extremal integer pair (j_minus1, j_plus1)
/// satisfying one of the two inequality families, and reports m and the margin.
TwistCertificate check_annular_twist(const LiftedMap& f, const Window& R1, int samples);

/// K_l sets: grid cells of R_{1,0} whose images land in the l-th copy of the
/// target window, for l between the certified winding numbers.
CrossingSets crossing_sets(const LiftedMap& f, const Window& R1,
                           const TwistCertificate& cert, int grid = 48);

/// Direct stretching check: sampled curves joining the horizontal sides of
/// `source` must each contain a subinterval whose image crosses `target`
/// from one vertical side to the other while staying inside `target`, with
/// the subinterval contained in K (a union of cells; empty K = no constraint).
StretchResult stretch_check(const LiftedMap& f, const Window& source, const Window& target,
                            const std::vector<Window>& K, int paths);

ChaosCertificate assemble_chaos_certificate(const StripTwistResult& strip,
                                            const TwistCertificate& annular,
                                            const SwitchedSystem& instance,
                                            const std::string& composition,
                                            int crossing_nonempty, int grid);

}  // namespace revpulse
