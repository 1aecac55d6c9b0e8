#include "gazelab/fewshot.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gazelab/errors.hpp"

namespace gazelab {

std::vector<int> draw_references(int pool_size, int n, Rng& rng) {
    if (n < 1 || n > pool_size)
        throw std::invalid_argument("draw_references: need 1 <= n <= pool size");
    std::vector<int> idx(pool_size);
    for (int i = 0; i < pool_size; ++i) idx[i] = i;
    for (int i = 0; i < n; ++i) {
        const int j = i + rng.uniform_int(pool_size - i);
        std::swap(idx[i], idx[j]);
    }
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
    return idx;
}

GazeOffset draw_offset(const OffsetRange& range, Rng& rng) {
    if (!range.discrete)
        return {rng.uniform(-range.pitch, range.pitch), rng.uniform(-range.yaw, range.yaw)};
    // grid used when the source labels themselves are discrete
    static constexpr double kSteps[] = {-15, -10, -5, 5, 10, 15};
    return {deg_to_rad(kSteps[rng.uniform_int(6)]), deg_to_rad(kSteps[rng.uniform_int(6)])};
}

std::vector<AugSample> augment(const Redirector& r, std::span<const EyeSample> refs, int t,
                               const OffsetRange& range, Rng& rng) {
    if (t < 0) throw std::invalid_argument("augment: t must be >= 0");
    std::vector<AugSample> out;
    out.reserve(refs.size() * static_cast<std::size_t>(t));
    for (std::size_t i = 0; i < refs.size(); ++i) {
        for (int k = 0; k < t; ++k) {
            AugSample a;
            a.dg = draw_offset(range, rng);
            a.image = redirect_image(r, refs[i].image, a.dg, refs[i].head);
            a.label = refs[i].gaze + a.dg;
            a.head = refs[i].head;
            a.source_ref = static_cast<int>(i);
            out.push_back(std::move(a));
        }
    }
    return out;
}

Estimator finetune_estimator(const Estimator& generic, std::span<const EyeSample> refs,
                             std::span<const AugSample> aug, const FinetuneConfig& cfg) {
    if (refs.empty()) throw std::invalid_argument("finetune_estimator: no reference samples");
    if (cfg.epochs < 0 || cfg.mixed_epochs < 0 || cfg.mixed_epochs > cfg.epochs)
        throw std::invalid_argument("finetune_estimator: bad epoch config");

    struct Item {
        const Tensor* image;
        GazeAngles label;
        HeadPose head;
    };
    std::vector<Item> mixed, refs_only;
    for (const EyeSample& s : refs) refs_only.push_back({&s.image, s.gaze, s.head});
    mixed = refs_only;
    for (const AugSample& a : aug) mixed.push_back({&a.image, a.label, a.head});

    Estimator model = generic;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto& batch = epoch < cfg.mixed_epochs ? mixed : refs_only;
        ParamSet grads = zero_like(model.params);
        double loss = 0;
        for (const Item& it : batch) {
            const EstimatorTrace t = estimator_forward(model, *it.image, it.head);
            Tensor gp;
            loss += gaze_mse({t.out.v[0], t.out.v[1]}, it.label, &gp);
            for (double& v : gp.v) v /= static_cast<double>(batch.size());
            estimator_backward(model, t, gp, &grads, nullptr);
        }
        if (!std::isfinite(loss))
            throw NumericError("finetune_estimator: loss diverged at epoch " + std::to_string(epoch));
        model.params = sgd_update(model.params, grads, cfg.lr, {"features", "head_fuse", "regressor"});
    }
    return model;
}

namespace {

// Solves the 3x3 normal equations for one output dimension of the affine
// fit; returns false when the system is rank deficient.
bool solve3(double m[3][4], double out[3]) {
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::fabs(m[r][col]) > std::fabs(m[piv][col])) piv = r;
        std::swap(m[col], m[piv]);
        if (std::fabs(m[col][col]) < 1e-10) return false;
        for (int r = 0; r < 3; ++r) {
            if (r == col) continue;
            const double f = m[r][col] / m[col][col];
            for (int c = col; c < 4; ++c) m[r][c] -= f * m[col][c];
        }
    }
    for (int i = 0; i < 3; ++i) out[i] = m[i][3] / m[i][i];
    return true;
}

}  // namespace

AffineCorrection lin_adapt(const Estimator& generic, std::span<const EyeSample> refs) {
    if (refs.empty()) throw std::invalid_argument("lin_adapt: no reference samples");
    const std::size_t n = refs.size();
    std::vector<GazeAngles> preds(n);
    for (std::size_t i = 0; i < n; ++i)
        preds[i] = predict_gaze(generic, refs[i].image, refs[i].head);

    AffineCorrection corr;
    if (n >= 3) {
        // design [pred_pitch, pred_yaw, 1]; one least-squares fit per output
        double g[3][3] = {};
        for (std::size_t i = 0; i < n; ++i) {
            const double row[3] = {preds[i].pitch, preds[i].yaw, 1.0};
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) g[a][b] += row[a] * row[b];
        }
        bool ok = true;
        double coef[2][3];
        for (int dim = 0; dim < 2 && ok; ++dim) {
            double m[3][4];
            for (int a = 0; a < 3; ++a) {
                for (int b = 0; b < 3; ++b) m[a][b] = g[a][b];
                m[a][3] = 0;
            }
            for (std::size_t i = 0; i < n; ++i) {
                const double row[3] = {preds[i].pitch, preds[i].yaw, 1.0};
                const double y = dim == 0 ? refs[i].gaze.pitch : refs[i].gaze.yaw;
                for (int a = 0; a < 3; ++a) m[a][3] += row[a] * y;
            }
            ok = solve3(m, coef[dim]);
        }
        if (ok) {
            corr.a[0][0] = coef[0][0];
            corr.a[0][1] = coef[0][1];
            corr.b[0] = coef[0][2];
            corr.a[1][0] = coef[1][0];
            corr.a[1][1] = coef[1][1];
            corr.b[1] = coef[1][2];
            return corr;
        }
    }
    // bias-only fallback: mean(label - prediction)
    corr.bias_only = true;
    for (std::size_t i = 0; i < n; ++i) {
        corr.b[0] += refs[i].gaze.pitch - preds[i].pitch;
        corr.b[1] += refs[i].gaze.yaw - preds[i].yaw;
    }
    corr.b[0] /= static_cast<double>(n);
    corr.b[1] /= static_cast<double>(n);
    return corr;
}

double evaluate(const Estimator& e, const AffineCorrection* correction,
                std::span<const EyeSample> testset) {
    if (testset.empty()) throw std::invalid_argument("evaluate: empty test set");
    double acc = 0;
    for (const EyeSample& s : testset) {
        GazeAngles pred = predict_gaze(e, s.image, s.head);
        if (correction) pred = correction->apply(pred);
        acc += angular_error_deg(pred, s.gaze);
    }
    return acc / static_cast<double>(testset.size());
}

}  // namespace gazelab
