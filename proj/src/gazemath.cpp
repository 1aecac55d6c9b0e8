// Exact-at-zero spherical distance; this file is compiled with fp
// contraction disabled so the cross products below stay antisymmetric.

#include "gazelab/gazemath.hpp"

#include <algorithm>
#include <cmath>

namespace gazelab {

std::array<double, 3> gaze_to_vec(GazeAngles g) {
    return {std::cos(g.pitch) * std::sin(g.yaw), std::sin(g.pitch),
            std::cos(g.pitch) * std::cos(g.yaw)};
}

double angular_error_deg(GazeAngles a, GazeAngles b) {
    const auto va = gaze_to_vec(a);
    const auto vb = gaze_to_vec(b);
    const double dot = std::clamp(va[0] * vb[0] + va[1] * vb[1] + va[2] * vb[2], -1.0, 1.0);
    // atan2 of the cross norm evaluates arccos(dot) without losing small
    // angles to rounding; identical vectors give exactly zero
    const double cx = va[1] * vb[2] - va[2] * vb[1];
    const double cy = va[2] * vb[0] - va[0] * vb[2];
    const double cz = va[0] * vb[1] - va[1] * vb[0];
    return rad_to_deg(std::atan2(std::sqrt(cx * cx + cy * cy + cz * cz), dot));
}

}  // namespace gazelab
