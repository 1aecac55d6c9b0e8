#include "gazelab/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "gazelab/errors.hpp"
#include "gazelab/rng.hpp"

namespace gazelab {

namespace {

constexpr const char* kFeatures = "features";
constexpr const char* kHeadFuse = "head_fuse";
constexpr const char* kRegressor = "regressor";

const Layer kFusion = Layer::concat_broadcast();

void require_image(const Estimator& e, const Tensor& image) {
    if (image.rank() != 3 || image.dim(0) != e.cfg.height || image.dim(1) != e.cfg.width ||
        image.dim(2) != 1)
        throw std::invalid_argument("estimator: image " + shape_str(image.shape) +
                                    " does not match [" + std::to_string(e.cfg.height) + "," +
                                    std::to_string(e.cfg.width) + ",1]");
}

}  // namespace

Estimator init_estimator(const EstimatorConfig& cfg, std::uint64_t seed) {
    if (cfg.height < 8 || cfg.width < 8 || cfg.height % 8 || cfg.width % 8)
        throw std::invalid_argument("estimator: height and width must be multiples of 8");
    const int flat = (cfg.height / 8) * (cfg.width / 8) * 32;
    Estimator e;
    e.cfg = cfg;
    e.params.branches = {
        {kFeatures,
         {Layer::conv2d(1, 8, 3, 2, 1), Layer::relu(), Layer::conv2d(8, 16, 3, 2, 1), Layer::relu(),
          Layer::conv2d(16, 32, 3, 2, 1), Layer::relu(), Layer::dense(flat, 64), Layer::relu()}},
        {kHeadFuse, {Layer::dense(66, 64), Layer::relu()}},
        {kRegressor, {Layer::dense(64, 2)}}};
    for (Branch& b : e.params.branches)
        for (std::size_t i = 0; i < b.layers.size(); ++i) {
            Rng rng = stream_rng(seed, {hash_str(b.name), i});
            init_layer_params(b.layers[i], rng);
        }
    // zero regressor head: a fresh model predicts (0,0)
    for (Tensor& t : e.params.find(kRegressor)->layers[0].params)
        std::fill(t.v.begin(), t.v.end(), 0.0);
    return e;
}

EstimatorTrace estimator_forward(const Estimator& e, const Tensor& image, HeadPose head) {
    require_image(e, image);
    EstimatorTrace t;
    Tensor feat = run_branch(*e.params.find(kFeatures), image, &t.feat_tape);
    feat.shape = {1, 1, 64};
    t.feat_out = std::move(feat);
    t.head_vec = Tensor({2}, {head.pitch, head.yaw});
    const Tensor fusion_in[2] = {t.feat_out, t.head_vec};
    Tensor fused = layer_forward(kFusion, std::span<const Tensor>(fusion_in, 2));
    const Tensor fuse_out = run_branch(*e.params.find(kHeadFuse), fused, &t.fuse_tape);
    t.out = run_branch(*e.params.find(kRegressor), fuse_out, &t.reg_tape);
    return t;
}

void estimator_backward(const Estimator& e, const EstimatorTrace& trace, const Tensor& grad_pred,
                        ParamSet* grads, Tensor* grad_image) {
    ParamSet scratch;
    ParamSet& acc = grads ? *grads : scratch;
    if (!grads) acc = zero_like(e.params);
    Tensor g = run_branch_backward(*e.params.find(kRegressor), trace.reg_tape, grad_pred,
                                   *acc.find(kRegressor));
    g = run_branch_backward(*e.params.find(kHeadFuse), trace.fuse_tape, g, *acc.find(kHeadFuse));
    const Tensor fusion_in[2] = {trace.feat_out, trace.head_vec};
    LayerGrads fg = layer_backward(kFusion, std::span<const Tensor>(fusion_in, 2), g);
    Tensor gfeat = std::move(fg.inputs[0]);
    gfeat.shape = {64};
    Tensor gimg = run_branch_backward(*e.params.find(kFeatures), trace.feat_tape, gfeat,
                                      *acc.find(kFeatures));
    if (grad_image) *grad_image = std::move(gimg);
}

GazeAngles predict_gaze(const Estimator& e, const Tensor& image, HeadPose head) {
    const EstimatorTrace t = estimator_forward(e, image, head);
    const GazeAngles out{t.out.v[0], t.out.v[1]};
    if (!std::isfinite(out.pitch) || !std::isfinite(out.yaw))
        throw NumericError("predict_gaze: non-finite prediction");
    return out;
}

double gaze_mse(GazeAngles pred, GazeAngles label, Tensor* grad_pred) {
    const double dp = pred.pitch - label.pitch;
    const double dy = pred.yaw - label.yaw;
    if (grad_pred) {
        *grad_pred = Tensor({2}, {dp, dy});
    }
    return 0.5 * (dp * dp + dy * dy);
}

double mean_error_deg(const Estimator& e, std::span<const EyeSample> samples) {
    double acc = 0;
    for (const EyeSample& s : samples) acc += angular_error_deg(predict_gaze(e, s.image, s.head), s.gaze);
    return samples.empty() ? 0.0 : acc / static_cast<double>(samples.size());
}

std::vector<FoldResult> train_estimator(const PersonDataset& ds, const EstimatorTrainConfig& cfg,
                                        std::uint64_t seed) {
    const int n_persons = static_cast<int>(ds.persons.size());
    if (n_persons < 2) throw std::invalid_argument("train_estimator: need at least two persons");
    if (cfg.folds < 1 || cfg.folds > n_persons)
        throw std::invalid_argument("train_estimator: folds must be in [1, persons]");

    struct Item {
        const EyeSample* sample;
        int person;
    };
    std::vector<FoldResult> results;
    for (int fold = 0; fold < cfg.folds; ++fold) {
        std::set<int> test_persons;
        if (cfg.folds > 1)
            for (int p = fold; p < n_persons; p += cfg.folds) test_persons.insert(p);

        std::vector<Item> train_items;
        for (int p = 0; p < n_persons; ++p) {
            if (test_persons.count(p)) continue;
            for (const EyeSample& s : ds.persons[p].pool) train_items.push_back({&s, p});
            for (const EyeSample& s : ds.persons[p].test) train_items.push_back({&s, p});
        }
        for (const Item& it : train_items)
            if (test_persons.count(it.person))
                throw std::logic_error("train_estimator: fold leakage detected");

        FoldResult fr;
        fr.fold = fold;
        fr.test_persons.assign(test_persons.begin(), test_persons.end());
        fr.model = init_estimator(EstimatorConfig{}, hash_combine(seed, fold));

        Rng shuffle_rng = stream_rng(seed, {hash_str("estimator-shuffle"), static_cast<std::uint64_t>(fold)});
        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            std::vector<int> order(train_items.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[shuffle_rng.uniform_int(static_cast<int>(i))]);

            double epoch_loss = 0;
            std::size_t done = 0;
            while (done < order.size()) {
                const std::size_t bsz = std::min<std::size_t>(cfg.batch, order.size() - done);
                ParamSet grads = zero_like(fr.model.params);
                double batch_loss = 0;
                for (std::size_t b = 0; b < bsz; ++b) {
                    const EyeSample& s = *train_items[order[done + b]].sample;
                    const EstimatorTrace t = estimator_forward(fr.model, s.image, s.head);
                    Tensor gp;
                    batch_loss += gaze_mse({t.out.v[0], t.out.v[1]}, s.gaze, &gp);
                    for (double& v : gp.v) v /= static_cast<double>(bsz);
                    estimator_backward(fr.model, t, gp, &grads, nullptr);
                }
                if (!std::isfinite(batch_loss))
                    throw NumericError("train_estimator: loss diverged at epoch " + std::to_string(epoch));
                fr.model.params =
                    sgd_update(fr.model.params, grads, cfg.lr, {kFeatures, kHeadFuse, kRegressor});
                epoch_loss += batch_loss;
                done += bsz;
            }
            fr.epoch_loss.push_back(epoch_loss / static_cast<double>(train_items.size()));
        }

        double err = 0;
        int count = 0;
        for (int p : fr.test_persons) {
            err += mean_error_deg(fr.model, ds.persons[p].test);
            ++count;
        }
        if (cfg.folds == 1) {
            for (int p = 0; p < n_persons; ++p) {
                err += mean_error_deg(fr.model, ds.persons[p].test);
                ++count;
            }
        }
        fr.test_error_deg = count ? err / count : 0.0;
        results.push_back(std::move(fr));
    }
    return results;
}

}  // namespace gazelab
