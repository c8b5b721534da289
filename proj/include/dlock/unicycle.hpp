#ifndef DLOCK_UNICYCLE_HPP
#define DLOCK_UNICYCLE_HPP

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "dlock/linalg.hpp"

namespace dlock {

struct UnicyclePose {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;  // wrapped to (-pi, pi]
};

inline double wrap_angle(double a) {
    a = std::fmod(a + std::numbers::pi, 2.0 * std::numbers::pi);
    if (a <= 0.0) a += 2.0 * std::numbers::pi;
    return a - std::numbers::pi;
}

struct UnicycleCommand {
    double v = 0.0;  // [m/s]
    double w = 0.0;  // [rad/s]
};

// Near-identity diffeomorphism: the point l ahead of the axle tracks the
// single-integrator command u exactly.
inline UnicycleCommand nid_map(const Vec& u, const UnicyclePose& pose, double l) {
    if (l <= 0.0) throw std::invalid_argument("nid_map: l must be positive");
    const double c = std::cos(pose.theta);
    const double s = std::sin(pose.theta);
    UnicycleCommand cmd;
    cmd.v = c * u(0) + s * u(1);
    cmd.w = (-s * u(0) + c * u(1)) / l;
    return cmd;
}

inline Vec nid_unmap(const UnicycleCommand& cmd, const UnicyclePose& pose, double l) {
    if (l <= 0.0) throw std::invalid_argument("nid_unmap: l must be positive");
    const double c = std::cos(pose.theta);
    const double s = std::sin(pose.theta);
    Vec u(2);
    u << c * cmd.v - s * l * cmd.w, s * cmd.v + c * l * cmd.w;
    return u;
}

}  // namespace dlock

#endif
