#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "revpulse/normal_forms.hpp"
#include "revpulse/types.hpp"

namespace revpulse {

struct IntegratorConfig {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double max_step = 1.0;
    double max_time = 1000.0;

    /// Optional conserved quantity: accepted steps are Newton-projected back
    /// onto its initial level. Long integrations near separatrices are
    /// transversally unstable without this.
    std::function<double(Point)> invariant;
    std::function<Point(Point)> invariant_gradient;

    /// In projected mode, hold points that reach a near-zero field for the
    /// remaining time (asymptotic saddle approach on a separatrix level).
    /// Disable when integrating orbits that legitimately pass near saddles.
    bool freeze_at_equilibria = true;

    void validate() const;
};

/// Right-hand side as a plain callable; trajectories are time-forward internally,
/// negative-time requests are handled by integrating the reversed field.
using Rhs = std::function<Point(Point)>;

/// One accepted step with the DOPRI5 dense-output polynomial.
struct DenseStep {
    double t0 = 0, h = 0;
    Point r1, r2, r3, r4, r5;  // Hairer contd5 coefficients
    Point eval(double t) const;
};

class Trajectory {
  public:
    double t_begin() const;
    double t_end() const;
    Point front() const;
    Point back() const;
    Point eval(double t) const;
    const std::vector<DenseStep>& steps() const { return steps_; }
    std::vector<std::pair<double, Point>> samples() const;
    bool empty() const { return steps_.empty(); }

    void append(const DenseStep& s) { steps_.push_back(s); }

  private:
    std::vector<DenseStep> steps_;
};

/// Integrates for |duration| (sign selects time direction); the returned
/// trajectory is parameterized by the signed time of the original field.
Trajectory integrate(const Rhs& f, Point p0, double duration, const IntegratorConfig& cfg);
Trajectory integrate(const VectorFieldSpec& spec, Point p0, double duration,
                     const IntegratorConfig& cfg);

Point flow_map(const VectorFieldSpec& spec, double t, Point p0, const IntegratorConfig& cfg);

enum class EventDirection { rising, falling, any };

struct EventFunction {
    std::function<double(Point)> g;
    EventDirection direction = EventDirection::any;
};

struct EventResult {
    double t = 0;
    Point p;
};

/// First (skip+1)-th strictly positive crossing time of g along the forward flow.
/// Crossings at t = 0 are never reported.
EventResult integrate_to_event(const Rhs& f, Point p0, const EventFunction& ev,
                               const IntegratorConfig& cfg, int skip = 0);
EventResult integrate_to_event(const VectorFieldSpec& spec, Point p0, const EventFunction& ev,
                               const IntegratorConfig& cfg, int skip = 0);

/// Period of the closed orbit through p0 via first same-direction return to the
/// section through p0 perpendicular to the field.
double orbit_period(const VectorFieldSpec& spec, Point p0, const IntegratorConfig& cfg);

struct LevelCurve {
    std::vector<Point> points;
    bool closed = false;
};

struct BoundingBox {
    double x_min = -10, x_max = 10, y_min = -10, y_max = 10;
    bool contains(Point p) const {
        return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
    }
};

/// Polyline along {H = level} through seed, traced with the normalized rotated
/// gradient and a per-step Newton projection back onto the level.
LevelCurve trace_level_set(const FirstIntegral& fi, double level, Point seed,
                           const IntegratorConfig& cfg,
                           const BoundingBox& box = BoundingBox{},
                           double max_chord = 0.0);

/// CSV export: header `t,x,y`, one row per accepted step, 17 significant digits.
void write_trajectory_csv(const Trajectory& traj, const std::string& path);

}  // namespace revpulse
