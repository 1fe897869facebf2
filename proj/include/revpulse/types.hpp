#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace revpulse {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point p) { return {s * p.x, s * p.y}; }
inline Point operator*(Point p, double s) { return {s * p.x, s * p.y}; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double norm(Point p) { return std::hypot(p.x, p.y); }
inline double dist(Point a, Point b) { return norm(a - b); }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }

/// The reversing involution h(x,y) = (x,-y).
inline Point mirror(Point p) { return {p.x, -p.y}; }

inline bool finite(Point p) { return std::isfinite(p.x) && std::isfinite(p.y); }

enum class ErrorCode {
    io = 1,
    precondition = 2,
    construction = 3,
    certification = 4,
    orbit_not_found = 5,
    integration_failure = 6,
    event_not_found = 7,
    out_of_domain = 8,
    no_linkage = 9,
    ambiguous_linkage = 10,
    twist_failure = 11,
    invariance_violation = 12,
    resolution = 13,
    itinerary_break = 14,
    not_closed = 15,
    insufficient_crossing = 16,
    geometric_failure = 17,
};

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& msg)
        : std::runtime_error(msg), code_(code) {}
    ErrorCode code() const { return code_; }

    /// Process exit code for the CLI contract.
    int exit_code() const {
        switch (code_) {
            case ErrorCode::io: return 1;
            case ErrorCode::precondition: return 2;
            case ErrorCode::orbit_not_found: return 5;
            case ErrorCode::certification:
            case ErrorCode::twist_failure:
            case ErrorCode::insufficient_crossing: return 4;
            default: return 3;
        }
    }

  private:
    ErrorCode code_;
};

}  // namespace revpulse
