#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gazelab/dataset.hpp"
#include "gazelab/params.hpp"
#include "gazelab/types.hpp"
#include "gazelab/warp.hpp"

namespace gazelab {

// Warp-based gaze redirection network. An image encoder, two small dense
// branches for the redirection angle and the head pose, a concat-broadcast
// fusion at the bottleneck and a decoder that emits a bounded offset on top
// of the identity sampling grid.
struct RedirectorConfig {
    int height = kEyeHeight;
    int width = kEyeWidth;
    double max_disp = 12.0;  // pixels, bound on |field - identity|
};

struct Redirector {
    RedirectorConfig cfg;
    ParamSet params;  // branches: image_encoder, angle_branch, head_branch, decoder
};

// Deterministic init. The decoder offset head starts at zero, so a fresh
// model predicts the identity field and redirects every image to itself.
Redirector init_redirector(const RedirectorConfig& cfg, std::uint64_t seed);

WarpField predict_field(const Redirector& r, const Tensor& image, GazeOffset dg, HeadPose head);
Tensor redirect_image(const Redirector& r, const Tensor& image, GazeOffset dg, HeadPose head);

// Mean-per-element L1 on images plus seg_weight times mean-per-element L1 on
// segmentation maps.
double redirection_loss(const Tensor& pred_image, const Tensor& target_image,
                        const Tensor& warped_seg, const Tensor& target_seg, double seg_weight);

struct RedirectorTrace {
    std::vector<Tensor> enc_tape, ang_tape, head_tape, dec_tape;
    Tensor enc_out, ang_out, head_out, raw;
    WarpField field;
};

RedirectorTrace redirector_forward(const Redirector& r, const Tensor& image, GazeOffset dg,
                                   HeadPose head);

// Accumulates parameter gradients into grads (same structure as r.params).
// grad_image, when non-null, receives the gradient w.r.t. the input image
// flowing through the encoder.
void redirector_backward(const Redirector& r, const RedirectorTrace& trace, const Tensor& grad_mx,
                         const Tensor& grad_my, ParamSet& grads, Tensor* grad_image);

struct RedirectorTrainConfig {
    int epochs = 60;
    double lr = 0.15;
    int batch = 32;
    double seg_weight = 1.0;
    double heldout_fraction = 0.1;  // trailing fraction of groups
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0;
    double heldout_loss = 0;
};

struct PairLosses {
    double total = 0;
    double image_l1 = 0;
    double seg_l1 = 0;
};

struct RedirectorTrainResult {
    Redirector model;
    std::vector<EpochLog> log;
    double heldout_initial = 0;  // identity-warp baseline: the loss at init
    double heldout_final = 0;
    PairLosses heldout_detail;
};

// Supervised pre-training on aligned pairs, SGD over all branches. Aborts
// with NumericError if the loss diverges.
RedirectorTrainResult train_redirector(const PairDataset& pairs, const RedirectorTrainConfig& cfg,
                                       std::uint64_t seed);

// Mean losses over the given pair indices (forward only).
PairLosses eval_pairs(const Redirector& r, const PairDataset& ds, std::span<const int> indices,
                      double seg_weight);

}  // namespace gazelab
