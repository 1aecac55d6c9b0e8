#pragma once

#include <cmath>

namespace gazelab {

inline constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double d) { return d * kPi / 180.0; }
inline double rad_to_deg(double r) { return r / kPi * 180.0; }

// Gaze direction in radians. Pitch is vertical (positive up), yaw is
// horizontal (positive to the viewer's right).
struct GazeAngles {
    double pitch = 0.0;
    double yaw = 0.0;
};

struct HeadPose {
    double pitch = 0.0;
    double yaw = 0.0;
};

// A requested change of gaze direction.
struct GazeOffset {
    double pitch = 0.0;
    double yaw = 0.0;
};

inline GazeAngles operator+(GazeAngles g, GazeOffset d) {
    return {g.pitch + d.pitch, g.yaw + d.yaw};
}

inline GazeOffset operator-(GazeAngles a, GazeAngles b) {
    return {a.pitch - b.pitch, a.yaw - b.yaw};
}

inline GazeOffset operator-(GazeOffset d) { return {-d.pitch, -d.yaw}; }

inline double norm2(GazeOffset d) { return std::sqrt(d.pitch * d.pitch + d.yaw * d.yaw); }

enum class Domain { Synthetic, PseudoReal };

inline const char* domain_name(Domain d) {
    return d == Domain::Synthetic ? "synthetic" : "pseudo-real";
}

}  // namespace gazelab
