#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gazelab/dataset.hpp"
#include "gazelab/gazemath.hpp"
#include "gazelab/params.hpp"

namespace gazelab {

// Appearance-based gaze regressor: a small conv feature stack, head-pose
// fusion and a linear (pitch, yaw) head.
struct EstimatorConfig {
    int height = kEyeHeight;
    int width = kEyeWidth;
};

struct Estimator {
    EstimatorConfig cfg;
    ParamSet params;  // branches: features, head_fuse, regressor
};

// Deterministic init; the regressor head starts at zero so a fresh model
// predicts (0,0) for any input.
Estimator init_estimator(const EstimatorConfig& cfg, std::uint64_t seed);

GazeAngles predict_gaze(const Estimator& e, const Tensor& image, HeadPose head);

struct EstimatorTrace {
    std::vector<Tensor> feat_tape, fuse_tape, reg_tape;
    Tensor feat_out, head_vec, out;
};

EstimatorTrace estimator_forward(const Estimator& e, const Tensor& image, HeadPose head);

// grad_pred is d(loss)/d(pitch,yaw). Accumulates parameter gradients into
// grads when non-null; grad_image, when non-null, receives the gradient
// w.r.t. the input image (used with a frozen estimator).
void estimator_backward(const Estimator& e, const EstimatorTrace& trace, const Tensor& grad_pred,
                        ParamSet* grads, Tensor* grad_image);

struct EstimatorTrainConfig {
    int epochs = 80;
    double lr = 0.02;
    int batch = 64;
    int folds = 5;  // 1 trains a single model on every person
};

struct FoldResult {
    int fold = 0;
    Estimator model;
    std::vector<int> test_persons;  // indices into dataset.persons
    double test_error_deg = 0;
    std::vector<double> epoch_loss;
};

// Cross-person training: persons are partitioned round-robin into folds and
// each fold's model never sees its test persons. Throws on fold leakage.
std::vector<FoldResult> train_estimator(const PersonDataset& ds, const EstimatorTrainConfig& cfg,
                                        std::uint64_t seed);

// Mean squared error on (pitch,yaw) plus its gradient, shared by the
// trainers.
double gaze_mse(GazeAngles pred, GazeAngles label, Tensor* grad_pred);

// Mean angular error of the raw estimator over samples.
double mean_error_deg(const Estimator& e, std::span<const EyeSample> samples);

}  // namespace gazelab
