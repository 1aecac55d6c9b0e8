#include "gazelab/redirector.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gazelab/errors.hpp"
#include "gazelab/rng.hpp"

namespace gazelab {

namespace {

constexpr const char* kEncoder = "image_encoder";
constexpr const char* kAngle = "angle_branch";
constexpr const char* kHead = "head_branch";
constexpr const char* kDecoder = "decoder";

void validate_cfg(const RedirectorConfig& cfg) {
    if (cfg.height < 8 || cfg.width < 8 || cfg.height % 8 || cfg.width % 8)
        throw std::invalid_argument("redirector: height and width must be multiples of 8");
    if (cfg.max_disp <= 0) throw std::invalid_argument("redirector: max_disp must be positive");
}

void require_image(const Redirector& r, const Tensor& image) {
    if (image.rank() != 3 || image.dim(0) != r.cfg.height || image.dim(1) != r.cfg.width ||
        image.dim(2) != 1)
        throw std::invalid_argument("redirector: image " + shape_str(image.shape) +
                                    " does not match [" + std::to_string(r.cfg.height) + "," +
                                    std::to_string(r.cfg.width) + ",1]");
}

Tensor angle_input(double pitch, double yaw) { return Tensor({2}, {pitch, yaw}); }

const Layer kFusion = Layer::concat_broadcast();

}  // namespace

Redirector init_redirector(const RedirectorConfig& cfg, std::uint64_t seed) {
    validate_cfg(cfg);
    Redirector r;
    r.cfg = cfg;
    r.params.branches = {
        {kEncoder,
         {Layer::conv2d(1, 8, 3, 2, 1), Layer::relu(), Layer::conv2d(8, 16, 3, 2, 1), Layer::relu(),
          Layer::conv2d(16, 32, 3, 2, 1), Layer::relu()}},
        {kAngle, {Layer::dense(2, 16), Layer::relu(), Layer::dense(16, 16)}},
        {kHead, {Layer::dense(2, 16), Layer::relu(), Layer::dense(16, 16)}},
        {kDecoder,
         {Layer::upsample2x(), Layer::conv2d(64, 32, 3, 1, 1), Layer::relu(), Layer::upsample2x(),
          Layer::conv2d(32, 16, 3, 1, 1), Layer::relu(), Layer::upsample2x(),
          Layer::conv2d(16, 8, 3, 1, 1), Layer::relu(), Layer::conv2d(8, 2, 3, 1, 1)}}};
    for (Branch& b : r.params.branches)
        for (std::size_t i = 0; i < b.layers.size(); ++i) {
            Rng rng = stream_rng(seed, {hash_str(b.name), i});
            init_layer_params(b.layers[i], rng);
        }
    // zero offset head: a fresh model is the identity warp
    Branch& dec = *r.params.find(kDecoder);
    for (Tensor& t : dec.layers.back().params) std::fill(t.v.begin(), t.v.end(), 0.0);
    return r;
}

RedirectorTrace redirector_forward(const Redirector& r, const Tensor& image, GazeOffset dg,
                                   HeadPose head) {
    require_image(r, image);
    RedirectorTrace t;
    t.enc_out = run_branch(*r.params.find(kEncoder), image, &t.enc_tape);
    t.ang_out = run_branch(*r.params.find(kAngle), angle_input(dg.pitch, dg.yaw), &t.ang_tape);
    t.head_out = run_branch(*r.params.find(kHead), angle_input(head.pitch, head.yaw), &t.head_tape);
    const Tensor fusion_in[3] = {t.enc_out, t.ang_out, t.head_out};
    const Tensor fused = layer_forward(kFusion, std::span<const Tensor>(fusion_in, 3));
    t.raw = run_branch(*r.params.find(kDecoder), fused, &t.dec_tape);

    const int H = r.cfg.height, W = r.cfg.width;
    t.field = WarpField{Tensor({H, W}), Tensor({H, W})};
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            t.field.mx.at(y, x) = x + r.cfg.max_disp * std::tanh(t.raw.at(y, x, 0));
            t.field.my.at(y, x) = y + r.cfg.max_disp * std::tanh(t.raw.at(y, x, 1));
        }
    return t;
}

void redirector_backward(const Redirector& r, const RedirectorTrace& trace, const Tensor& grad_mx,
                         const Tensor& grad_my, ParamSet& grads, Tensor* grad_image) {
    const int H = r.cfg.height, W = r.cfg.width;
    Tensor graw({H, W, 2});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double t0 = std::tanh(trace.raw.at(y, x, 0));
            const double t1 = std::tanh(trace.raw.at(y, x, 1));
            graw.at(y, x, 0) = grad_mx.at(y, x) * r.cfg.max_disp * (1.0 - t0 * t0);
            graw.at(y, x, 1) = grad_my.at(y, x) * r.cfg.max_disp * (1.0 - t1 * t1);
        }
    const Tensor gfused = run_branch_backward(*r.params.find(kDecoder), trace.dec_tape, graw,
                                              *grads.find(kDecoder));
    const Tensor fusion_in[3] = {trace.enc_out, trace.ang_out, trace.head_out};
    LayerGrads fg = layer_backward(kFusion, std::span<const Tensor>(fusion_in, 3), gfused);
    Tensor gimg = run_branch_backward(*r.params.find(kEncoder), trace.enc_tape, fg.inputs[0],
                                      *grads.find(kEncoder));
    if (grad_image) *grad_image = std::move(gimg);
    run_branch_backward(*r.params.find(kAngle), trace.ang_tape, fg.inputs[1], *grads.find(kAngle));
    run_branch_backward(*r.params.find(kHead), trace.head_tape, fg.inputs[2], *grads.find(kHead));
}

WarpField predict_field(const Redirector& r, const Tensor& image, GazeOffset dg, HeadPose head) {
    return redirector_forward(r, image, dg, head).field;
}

Tensor redirect_image(const Redirector& r, const Tensor& image, GazeOffset dg, HeadPose head) {
    return sample_bilinear(image, predict_field(r, image, dg, head));
}

double redirection_loss(const Tensor& pred_image, const Tensor& target_image,
                        const Tensor& warped_seg, const Tensor& target_seg, double seg_weight) {
    require_same_shape(pred_image, target_image, "redirection_loss images");
    require_same_shape(warped_seg, target_seg, "redirection_loss segs");
    return mean_abs_diff(pred_image, target_image) + seg_weight * mean_abs_diff(warped_seg, target_seg);
}

namespace {

struct PairGrad {
    PairLosses losses;
};

// Forward + losses for one pair; with grads != nullptr also accumulates the
// full parameter gradient (per-element-mean L1 terms).
PairGrad pair_pass(const Redirector& r, const EyeSample& src, const EyeSample& dst, GazeOffset dg,
                   HeadPose head, double seg_weight, ParamSet* grads) {
    PairGrad out;
    const RedirectorTrace trace = redirector_forward(r, src.image, dg, head);
    const Tensor warped_img = sample_bilinear(src.image, trace.field);
    const Tensor warped_seg = sample_bilinear(src.seg, trace.field);
    out.losses.image_l1 = mean_abs_diff(warped_img, dst.image);
    out.losses.seg_l1 = mean_abs_diff(warped_seg, dst.seg);
    out.losses.total = out.losses.image_l1 + seg_weight * out.losses.seg_l1;
    if (!grads) return out;

    Tensor gimg(warped_img.shape);
    const double wn = 1.0 / static_cast<double>(warped_img.numel());
    for (std::size_t i = 0; i < gimg.numel(); ++i) {
        const double d = warped_img.v[i] - dst.image.v[i];
        gimg.v[i] = d > 0 ? wn : (d < 0 ? -wn : 0.0);
    }
    Tensor gseg(warped_seg.shape);
    const double sn = seg_weight / static_cast<double>(warped_seg.numel());
    for (std::size_t i = 0; i < gseg.numel(); ++i) {
        const double d = warped_seg.v[i] - dst.seg.v[i];
        gseg.v[i] = d > 0 ? sn : (d < 0 ? -sn : 0.0);
    }
    const SampleGrads si = sample_bilinear_backward(src.image, trace.field, gimg);
    const SampleGrads ss = sample_bilinear_backward(src.seg, trace.field, gseg);
    Tensor gmx = si.mx;
    Tensor gmy = si.my;
    for (std::size_t i = 0; i < gmx.numel(); ++i) {
        gmx.v[i] += ss.mx.v[i];
        gmy.v[i] += ss.my.v[i];
    }
    redirector_backward(r, trace, gmx, gmy, *grads, nullptr);
    return out;
}

}  // namespace

PairLosses eval_pairs(const Redirector& r, const PairDataset& ds, std::span<const int> indices,
                      double seg_weight) {
    PairLosses acc;
    for (int idx : indices) {
        const TrainPair& p = ds.pairs[idx];
        const PairGrad pg = pair_pass(r, ds.src_of(p), ds.dst_of(p), p.dg, ds.groups[p.group].head,
                                      seg_weight, nullptr);
        acc.total += pg.losses.total;
        acc.image_l1 += pg.losses.image_l1;
        acc.seg_l1 += pg.losses.seg_l1;
    }
    const double n = std::max<std::size_t>(1, indices.size());
    acc.total /= n;
    acc.image_l1 /= n;
    acc.seg_l1 /= n;
    return acc;
}

RedirectorTrainResult train_redirector(const PairDataset& ds, const RedirectorTrainConfig& cfg,
                                       std::uint64_t seed) {
    if (ds.pairs.empty()) throw std::invalid_argument("train_redirector: empty pair dataset");
    if (cfg.epochs < 0 || cfg.batch < 1) throw std::invalid_argument("train_redirector: bad config");

    const int held_groups =
        std::min<int>(static_cast<int>(ds.groups.size()) - 1,
                      static_cast<int>(std::ceil(cfg.heldout_fraction * ds.groups.size())));
    const int first_held = static_cast<int>(ds.groups.size()) - held_groups;
    std::vector<int> train_idx, held_idx;
    for (std::size_t i = 0; i < ds.pairs.size(); ++i)
        (ds.pairs[i].group >= first_held ? held_idx : train_idx).push_back(static_cast<int>(i));
    if (train_idx.empty()) throw std::invalid_argument("train_redirector: no training pairs");

    RedirectorTrainResult res;
    res.model = init_redirector(RedirectorConfig{}, seed);
    if (!held_idx.empty()) res.heldout_initial = eval_pairs(res.model, ds, held_idx, cfg.seg_weight).total;

    Rng shuffle_rng = stream_rng(seed, {hash_str("shuffle")});
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<int> order = train_idx;
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_int(static_cast<int>(i))]);

        double epoch_loss = 0;
        std::size_t done = 0;
        while (done < order.size()) {
            const std::size_t bsz = std::min<std::size_t>(cfg.batch, order.size() - done);
            ParamSet grads = zero_like(res.model.params);
            double batch_loss = 0;
            for (std::size_t b = 0; b < bsz; ++b) {
                const TrainPair& p = ds.pairs[order[done + b]];
                batch_loss += pair_pass(res.model, ds.src_of(p), ds.dst_of(p), p.dg,
                                        ds.groups[p.group].head, cfg.seg_weight, &grads)
                                  .losses.total;
            }
            if (!std::isfinite(batch_loss))
                throw NumericError("train_redirector: loss diverged at epoch " + std::to_string(epoch));
            scale_params(grads, 1.0 / static_cast<double>(bsz));
            res.model.params = sgd_update(res.model.params, grads, cfg.lr,
                                          {kEncoder, kAngle, kHead, kDecoder});
            epoch_loss += batch_loss;
            done += bsz;
        }
        EpochLog log;
        log.epoch = epoch + 1;
        log.train_loss = epoch_loss / static_cast<double>(order.size());
        log.heldout_loss =
            held_idx.empty() ? 0.0 : eval_pairs(res.model, ds, held_idx, cfg.seg_weight).total;
        res.log.push_back(log);
    }
    if (!held_idx.empty()) {
        res.heldout_detail = eval_pairs(res.model, ds, held_idx, cfg.seg_weight);
        res.heldout_final = res.heldout_detail.total;
    }
    return res;
}

}  // namespace gazelab
