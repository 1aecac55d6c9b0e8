#pragma once

// Shared fixture helpers: finite-difference checks need relu pre-activations
// and sampling coordinates clear of their kinks at the probe scale.

#include <cmath>
#include <string>

#include "gazelab/estimator.hpp"
#include "gazelab/redirector.hpp"

namespace gazelab::testfix {

inline bool nudge_channel_biases(Tensor& bias, const Tensor& preact, double band, double step) {
    bool dirty = false;
    for (int c = 0; c < bias.dim(0); ++c) {
        double mn = 1e9;
        if (preact.rank() == 3) {
            for (int y = 0; y < preact.dim(0); ++y)
                for (int x = 0; x < preact.dim(1); ++x)
                    mn = std::min(mn, std::fabs(preact.at(y, x, c)));
        } else {
            mn = std::fabs(preact.v[c]);
        }
        if (mn < band) {
            bias.v[c] += step;
            dirty = true;
        }
    }
    return dirty;
}

inline bool nudge_redirector(Redirector& model, const Tensor& img, GazeOffset dg, HeadPose head,
                             double band = 2e-4, double step = 7.3e-4) {
    struct Loc {
        const char* branch;
        int feeding;
        int relu;
    };
    const Loc locs[] = {{"image_encoder", 0, 1}, {"image_encoder", 2, 3}, {"image_encoder", 4, 5},
                        {"decoder", 1, 2},       {"decoder", 4, 5},       {"decoder", 7, 8},
                        {"angle_branch", 0, 1},  {"head_branch", 0, 1}};
    for (int round = 0; round < 40; ++round) {
        const RedirectorTrace t = redirector_forward(model, img, dg, head);
        bool dirty = false;
        for (const Loc& L : locs) {
            const std::vector<Tensor>& tape =
                std::string(L.branch) == "image_encoder"  ? t.enc_tape
                : std::string(L.branch) == "decoder"      ? t.dec_tape
                : std::string(L.branch) == "angle_branch" ? t.ang_tape
                                                          : t.head_tape;
            dirty |= nudge_channel_biases(model.params.find(L.branch)->layers[L.feeding].params[1],
                                          tape[L.relu], band, step);
        }
        if (!dirty) return true;
    }
    return false;
}

inline bool nudge_estimator(Estimator& model, const Tensor& img, HeadPose head, double band = 2e-4,
                            double step = 7.3e-4) {
    for (int round = 0; round < 40; ++round) {
        const EstimatorTrace t = estimator_forward(model, img, head);
        bool dirty = false;
        for (int i : {0, 2, 4, 6})
            dirty |= nudge_channel_biases(model.params.find("features")->layers[i].params[1],
                                          t.feat_tape[i + 1], band, step);
        dirty |= nudge_channel_biases(model.params.find("head_fuse")->layers[0].params[1],
                                      t.fuse_tape[1], band, step);
        if (!dirty) return true;
    }
    return false;
}

inline double min_fractional(const WarpField& f) {
    double mn = 1e9;
    for (double v : f.mx.v) mn = std::min(mn, std::fabs(v - std::round(v)));
    for (double v : f.my.v) mn = std::min(mn, std::fabs(v - std::round(v)));
    return mn;
}

}  // namespace gazelab::testfix
