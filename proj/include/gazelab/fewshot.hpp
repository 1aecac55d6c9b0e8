#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gazelab/estimator.hpp"
#include "gazelab/redirector.hpp"

namespace gazelab {

// Person-specific adaptation: n reference samples, optionally expanded with
// t gaze-redirected samples per reference, drive a short fine-tune of the
// generic estimator.

// n distinct pool indices, uniform without replacement, returned in
// ascending order (n == pool_size returns the whole pool canonically).
std::vector<int> draw_references(int pool_size, int n, Rng& rng);

struct OffsetRange {
    double pitch = deg_to_rad(10.0);  // dg.pitch uniform in +-pitch
    double yaw = deg_to_rad(15.0);
    bool discrete = false;  // draw from {+-5,+-10,+-15} degrees instead
};

GazeOffset draw_offset(const OffsetRange& range, Rng& rng);

struct AugSample {
    Tensor image;
    GazeAngles label;  // source gaze + dg
    HeadPose head;
    int source_ref = 0;
    GazeOffset dg;
};

// Exactly t redirected samples per reference, labels source.gaze + dg.
std::vector<AugSample> augment(const Redirector& r, std::span<const EyeSample> refs, int t,
                               const OffsetRange& range, Rng& rng);

struct FinetuneConfig {
    int epochs = 10;
    int mixed_epochs = 5;  // leading epochs that also use redirected samples
    double lr = 0.01;      // full-batch gradient descent
};

// Two-phase full-batch fine-tune: the first mixed_epochs run on refs plus
// redirected samples, the rest on refs alone. All branches train. The
// generic snapshot is left untouched.
Estimator finetune_estimator(const Estimator& generic, std::span<const EyeSample> refs,
                             std::span<const AugSample> aug, const FinetuneConfig& cfg);

// Affine correction on top of frozen generic predictions:
// corrected = A * predicted + b, least squares against the reference labels.
// n < 3 (or a rank-deficient fit) falls back to bias only.
struct AffineCorrection {
    double a[2][2] = {{1, 0}, {0, 1}};
    double b[2] = {0, 0};
    bool bias_only = false;

    GazeAngles apply(GazeAngles g) const {
        return {a[0][0] * g.pitch + a[0][1] * g.yaw + b[0],
                a[1][0] * g.pitch + a[1][1] * g.yaw + b[1]};
    }
};

AffineCorrection lin_adapt(const Estimator& generic, std::span<const EyeSample> refs);

// Mean angular error over the test set, with an optional output correction.
double evaluate(const Estimator& e, const AffineCorrection* correction,
                std::span<const EyeSample> testset);

}  // namespace gazelab
