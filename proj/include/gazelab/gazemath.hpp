#pragma once

#include <array>

#include "gazelab/types.hpp"

namespace gazelab {

// Unit gaze vector (x right, y up, z forward):
// v = (cos p sin y, sin p, cos p cos y).
std::array<double, 3> gaze_to_vec(GazeAngles g);

// Angle between the two gaze vectors in degrees; symmetric, >= 0.
double angular_error_deg(GazeAngles a, GazeAngles b);

}  // namespace gazelab
