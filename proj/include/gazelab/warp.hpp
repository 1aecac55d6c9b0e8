#pragma once

#include "gazelab/tensor.hpp"

namespace gazelab {

// Per-output-pixel inverse sampling coordinates. mx holds the source column
// coordinate, my the source row coordinate, origin at the top-left pixel.
struct WarpField {
    Tensor mx;  // [H,W]
    Tensor my;  // [H,W]

    int height() const { return mx.dim(0); }
    int width() const { return mx.dim(1); }
    bool all_finite() const { return mx.all_finite() && my.all_finite(); }
};

// mx(y,x) = x, my(y,x) = y. Warping with it is the exact no-op.
WarpField identity_field(int h, int w);

// out(y,x,c) = sum_{i,j} I(j,i,c) * max(0,1-|i-mx(y,x)|) * max(0,1-|j-my(y,x)|)
// evaluated through the four neighboring taps; taps outside the grid read 0.
// image is [H,W,C]; the field spatial shape must match.
Tensor sample_bilinear(const Tensor& image, const WarpField& field);

struct SampleGrads {
    Tensor image;  // [H,W,C]
    Tensor mx;     // [H,W]
    Tensor my;     // [H,W]
};

// Exact gradients of the sampler. At integer coordinates the derivative of
// the four-tap form is used (one-sided).
SampleGrads sample_bilinear_backward(const Tensor& image, const WarpField& field,
                                     const Tensor& grad_out);

}  // namespace gazelab
