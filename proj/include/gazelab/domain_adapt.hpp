#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gazelab/estimator.hpp"
#include "gazelab/redirector.hpp"

namespace gazelab {

// Self-supervised adaptation of the redirector to a new image domain from
// unpaired samples: a cycle loss (redirect by dg, then by -dg, compare with
// the original) alternating with a gaze loss (a frozen estimator must read
// g + dg off the redirected image). Cycle steps update only the image
// encoder, gaze steps only the angle and head branches; the decoder never
// moves.
struct AdaptSchedule {
    int steps = 2000;
    int batch = 16;
    double lr_cycle = 0.01;
    double lr_gaze = 0.01;
    double dg_pitch = deg_to_rad(10.0);  // offsets drawn uniformly in +-range
    double dg_yaw = deg_to_rad(15.0);
};

double cycle_loss(const Redirector& r, const Tensor& image, GazeOffset dg, HeadPose head);

double gaze_redirection_loss(const Redirector& r, const Estimator& frozen, const Tensor& image,
                             GazeAngles gaze, GazeOffset dg, HeadPose head);

// Gradient versions used by the adaptation loop; each accumulates parameter
// gradients for the redirector into grads and returns the loss value.
double cycle_loss_grad(const Redirector& r, const Tensor& image, GazeOffset dg, HeadPose head,
                       ParamSet& grads);
double gaze_redirection_loss_grad(const Redirector& r, const Estimator& frozen, const Tensor& image,
                                  GazeAngles gaze, GazeOffset dg, HeadPose head, ParamSet& grads);

struct AdaptLogEntry {
    int step = 0;
    char kind = 'c';  // 'c' cycle, 'g' gaze
    double loss = 0;
};

struct AdaptResult {
    Redirector model;
    std::vector<AdaptLogEntry> log;
};

// Strict per-step alternation starting with a cycle step. The estimator is
// read-only throughout.
AdaptResult adapt_redirector(const Redirector& r, const Estimator& frozen,
                             std::span<const EyeSample> realset, const AdaptSchedule& schedule,
                             std::uint64_t seed);

// Mean cycle loss over samples with offsets drawn from the schedule ranges;
// the before/after measurement for the adaptation criteria.
double mean_cycle_loss(const Redirector& r, std::span<const EyeSample> samples,
                       const AdaptSchedule& schedule, std::uint64_t seed);

// Mean gaze loss restricted to draws with |dg| above min_dg_norm, alongside
// the identity-collapse reference mean(|dg|) over the same draws.
struct GazeLossProbe {
    double mean_loss = 0;
    double collapse_value = 0;
    int count = 0;
};
GazeLossProbe mean_gaze_loss(const Redirector& r, const Estimator& frozen,
                             std::span<const EyeSample> samples, const AdaptSchedule& schedule,
                             double min_dg_norm, std::uint64_t seed);

}  // namespace gazelab
