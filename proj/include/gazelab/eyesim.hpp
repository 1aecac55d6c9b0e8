#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "gazelab/tensor.hpp"
#include "gazelab/types.hpp"

namespace gazelab {

// Continuous image coordinates: pixel (row r, col c) covers
// [c,c+1) x [r,r+1) and is sampled at its center (c+0.5, r+0.5).
struct Point {
    double x = 0.0;
    double y = 0.0;
};

struct IllumParams {
    int id = 0;
    double gain = 1.0;    // [0.7, 1.3]
    double grad_x = 0.0;  // [-0.25, 0.25]
    double grad_y = 0.0;  // [-0.25, 0.25]
};

IllumParams make_illum(int id, std::uint64_t seed);

struct PersonProfile {
    int id = 0;
    double skin_albedo = 0.55;      // [0.35, 0.75]
    double sclera_albedo = 0.88;    // [0.80, 0.95]
    double iris_albedo = 0.25;      // [0.05, 0.45]
    double eyeball_radius_px = 22;  // [18, 26]
    double aperture = 0.8;          // [0.55, 1.0]
    GazeOffset kappa;               // visual minus optical axis, each component within 2 degrees
};

// Deterministic per-id profile. with_kappa=false leaves kappa at zero.
PersonProfile sample_profile(int id, std::uint64_t seed, bool with_kappa);

struct Landmarks {
    std::array<Point, 8> iris;  // equally spaced boundary points
    // [left corner, 4 upper-lid points, right corner, 4 lower-lid points]
    std::array<Point, 10> lids;

    std::vector<Point> upper_curve() const;  // corners + upper points
    std::vector<Point> lower_curve() const;  // corners + lower points
};

struct EyeSample {
    Tensor image;        // [H,W,1] in [0,1]
    Tensor seg;          // [H,W,3] one-hot {background, sclera, iris+pupil}
    GazeAngles gaze;     // visual-axis label: optical + kappa
    GazeAngles optical;  // optical axis that drove the rendering
    HeadPose head;
    Landmarks landmarks;
    int person_id = 0;
    int illum_id = 0;
    Domain domain = Domain::Synthetic;
};

inline constexpr int kEyeHeight = 32;
inline constexpr int kEyeWidth = 64;

// Segmentation classes.
inline constexpr int kSegBackground = 0;
inline constexpr int kSegSclera = 1;
inline constexpr int kSegIris = 2;

// Pixelwise partition of the image into background / sclera / iris+pupil.
// The eye opening is the region between the two quadratics fit to the lid
// curves; the iris region is the convex polygon through the iris points
// intersected with the opening. Throws std::invalid_argument for fewer than
// three points per set or collinear (degenerate) sets.
Tensor segmentation_of(std::span<const Point> iris_pts, std::span<const Point> upper_lid,
                       std::span<const Point> lower_lid, int height, int width);

Tensor segmentation_of(const Landmarks& lm, int height, int width);

// Deterministic procedural render. The returned label is
// optical_gaze + profile.kappa. Throws DataError when the iris lands fully
// outside the eye opening.
EyeSample render(const PersonProfile& profile, HeadPose head, GazeAngles optical_gaze,
                 const IllumParams& illum, Domain domain, std::uint64_t seed);

struct AlignedGroup {
    PersonProfile profile;
    HeadPose head;
    IllumParams illum;
    Domain domain = Domain::Synthetic;
    std::vector<EyeSample> samples;  // differ only in gaze
};

// k = gazes.size() >= 2 samples sharing person, head and illumination.
AlignedGroup make_group(const PersonProfile& profile, HeadPose head, const IllumParams& illum,
                        std::span<const GazeAngles> gazes, Domain domain, std::uint64_t seed);

// Geometry helpers shared with tests.
Point iris_center(const PersonProfile& profile, HeadPose head, GazeAngles optical, int height,
                  int width);
double iris_radius(const PersonProfile& profile, HeadPose head, GazeAngles optical);

// Centroid of the iris+pupil class in index coordinates; (-1,-1) if empty.
Point seg_iris_centroid(const Tensor& seg);

}  // namespace gazelab
