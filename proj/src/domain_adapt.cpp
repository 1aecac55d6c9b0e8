#include "gazelab/domain_adapt.hpp"

#include <cmath>
#include <stdexcept>

#include "gazelab/errors.hpp"
#include "gazelab/rng.hpp"

namespace gazelab {

namespace {

GazeOffset draw_dg(const AdaptSchedule& s, Rng& rng) {
    return {rng.uniform(-s.dg_pitch, s.dg_pitch), rng.uniform(-s.dg_yaw, s.dg_yaw)};
}

}  // namespace

double cycle_loss(const Redirector& r, const Tensor& image, GazeOffset dg, HeadPose head) {
    const Tensor forward = redirect_image(r, image, dg, head);
    const Tensor cycled = redirect_image(r, forward, -dg, head);
    return mean_abs_diff(cycled, image);
}

double cycle_loss_grad(const Redirector& r, const Tensor& image, GazeOffset dg, HeadPose head,
                       ParamSet& grads) {
    const RedirectorTrace t1 = redirector_forward(r, image, dg, head);
    const Tensor mid = sample_bilinear(image, t1.field);
    const RedirectorTrace t2 = redirector_forward(r, mid, -dg, head);
    const Tensor out = sample_bilinear(mid, t2.field);

    const double n = static_cast<double>(out.numel());
    double loss = 0;
    Tensor gout(out.shape);
    for (std::size_t i = 0; i < out.numel(); ++i) {
        const double d = out.v[i] - image.v[i];
        loss += std::fabs(d);
        gout.v[i] = d > 0 ? 1.0 / n : (d < 0 ? -1.0 / n : 0.0);
    }
    loss /= n;

    // through the second application: both the sampled image and the field
    // depend on the intermediate image
    const SampleGrads s2 = sample_bilinear_backward(mid, t2.field, gout);
    Tensor gmid_net;
    redirector_backward(r, t2, s2.mx, s2.my, grads, &gmid_net);
    Tensor gmid = s2.image;
    for (std::size_t i = 0; i < gmid.numel(); ++i) gmid.v[i] += gmid_net.v[i];

    // through the first application
    const SampleGrads s1 = sample_bilinear_backward(image, t1.field, gmid);
    redirector_backward(r, t1, s1.mx, s1.my, grads, nullptr);
    return loss;
}

double gaze_redirection_loss(const Redirector& r, const Estimator& frozen, const Tensor& image,
                             GazeAngles gaze, GazeOffset dg, HeadPose head) {
    const Tensor redirected = redirect_image(r, image, dg, head);
    const GazeAngles pred = predict_gaze(frozen, redirected, head);
    const GazeAngles target = gaze + dg;
    const double dp = pred.pitch - target.pitch;
    const double dy = pred.yaw - target.yaw;
    return std::sqrt(dp * dp + dy * dy);
}

double gaze_redirection_loss_grad(const Redirector& r, const Estimator& frozen, const Tensor& image,
                                  GazeAngles gaze, GazeOffset dg, HeadPose head, ParamSet& grads) {
    const RedirectorTrace t = redirector_forward(r, image, dg, head);
    const Tensor redirected = sample_bilinear(image, t.field);
    const EstimatorTrace et = estimator_forward(frozen, redirected, head);
    const GazeAngles target = gaze + dg;
    const double dp = et.out.v[0] - target.pitch;
    const double dy = et.out.v[1] - target.yaw;
    const double loss = std::sqrt(dp * dp + dy * dy);

    // d||r||/dr = r/||r||; flat at the exact minimum
    Tensor gpred({2});
    if (loss > 0) {
        gpred.v[0] = dp / loss;
        gpred.v[1] = dy / loss;
    }
    Tensor gimage;
    estimator_backward(frozen, et, gpred, nullptr, &gimage);
    const SampleGrads s = sample_bilinear_backward(image, t.field, gimage);
    redirector_backward(r, t, s.mx, s.my, grads, nullptr);
    return loss;
}

AdaptResult adapt_redirector(const Redirector& r, const Estimator& frozen,
                             std::span<const EyeSample> realset, const AdaptSchedule& schedule,
                             std::uint64_t seed) {
    if (realset.empty()) throw std::invalid_argument("adapt_redirector: empty realset");
    if (schedule.steps < 0 || schedule.batch < 1)
        throw std::invalid_argument("adapt_redirector: bad schedule");

    const ParamSet frozen_before = frozen.params;
    AdaptResult res;
    res.model = r;
    Rng rng = stream_rng(seed, {hash_str("adapt")});
    for (int step = 0; step < schedule.steps; ++step) {
        const bool cycle = step % 2 == 0;
        ParamSet grads = zero_like(res.model.params);
        double loss = 0;
        for (int b = 0; b < schedule.batch; ++b) {
            const EyeSample& s = realset[rng.uniform_int(static_cast<int>(realset.size()))];
            const GazeOffset dg = draw_dg(schedule, rng);
            loss += cycle ? cycle_loss_grad(res.model, s.image, dg, s.head, grads)
                          : gaze_redirection_loss_grad(res.model, frozen, s.image, s.gaze, dg,
                                                       s.head, grads);
        }
        loss /= schedule.batch;
        if (!std::isfinite(loss))
            throw NumericError("adapt_redirector: loss diverged at step " + std::to_string(step));
        scale_params(grads, 1.0 / schedule.batch);
        res.model.params = sgd_update(
            res.model.params, grads, cycle ? schedule.lr_cycle : schedule.lr_gaze,
            cycle ? std::set<std::string>{"image_encoder"}
                  : std::set<std::string>{"angle_branch", "head_branch"});
        res.log.push_back({step, cycle ? 'c' : 'g', loss});
    }
    if (!frozen.params.bit_equal(frozen_before))
        throw std::logic_error("adapt_redirector: frozen estimator was modified");
    return res;
}

double mean_cycle_loss(const Redirector& r, std::span<const EyeSample> samples,
                       const AdaptSchedule& schedule, std::uint64_t seed) {
    if (samples.empty()) return 0.0;
    Rng rng = stream_rng(seed, {hash_str("cycle-eval")});
    double acc = 0;
    for (const EyeSample& s : samples) acc += cycle_loss(r, s.image, draw_dg(schedule, rng), s.head);
    return acc / static_cast<double>(samples.size());
}

GazeLossProbe mean_gaze_loss(const Redirector& r, const Estimator& frozen,
                             std::span<const EyeSample> samples, const AdaptSchedule& schedule,
                             double min_dg_norm, std::uint64_t seed) {
    GazeLossProbe probe;
    Rng rng = stream_rng(seed, {hash_str("gaze-eval")});
    for (const EyeSample& s : samples) {
        GazeOffset dg = draw_dg(schedule, rng);
        for (int attempt = 0; attempt < 64 && norm2(dg) <= min_dg_norm; ++attempt)
            dg = draw_dg(schedule, rng);
        if (norm2(dg) <= min_dg_norm) continue;
        probe.mean_loss += gaze_redirection_loss(r, frozen, s.image, s.gaze, dg, s.head);
        probe.collapse_value += norm2(dg);
        probe.count += 1;
    }
    if (probe.count) {
        probe.mean_loss /= probe.count;
        probe.collapse_value /= probe.count;
    }
    return probe;
}

}  // namespace gazelab
