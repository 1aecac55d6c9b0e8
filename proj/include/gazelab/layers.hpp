#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gazelab/rng.hpp"
#include "gazelab/tensor.hpp"

namespace gazelab {

enum class LayerKind { Dense, Conv2d, Relu, Tanh, Upsample2x, ConcatBroadcast };

const char* layer_kind_name(LayerKind k);

// One network layer with its own parameter tensors. Dense treats any input
// of matching element count as a flat vector. Conv2d works on [H,W,C] with
// zero padding. ConcatBroadcast takes a [H,W,C] map plus feature vectors and
// tiles the vectors across all spatial positions.
struct Layer {
    LayerKind kind = LayerKind::Relu;
    int in_dim = 0, out_dim = 0;         // dense
    int ksize = 0, stride = 1, pad = 0;  // conv2d
    int in_ch = 0, out_ch = 0;           // conv2d
    std::vector<Tensor> params;          // dense/conv2d: {weights, bias}

    static Layer dense(int in_dim, int out_dim);
    static Layer conv2d(int in_ch, int out_ch, int ksize, int stride, int pad);
    static Layer relu() { return Layer{LayerKind::Relu}; }
    static Layer tanh_unit() { return Layer{LayerKind::Tanh}; }
    static Layer upsample2x() { return Layer{LayerKind::Upsample2x}; }
    static Layer concat_broadcast() { return Layer{LayerKind::ConcatBroadcast}; }

    // dense: in*out + out; conv2d: k*k*in_ch*out_ch + out_ch; others 0.
    std::size_t param_count() const;
};

// Fills weights uniformly in +-sqrt(6/(fan_in+fan_out)); biases stay zero.
void init_layer_params(Layer& layer, Rng& rng);

Tensor layer_forward(const Layer& layer, std::span<const Tensor> inputs);
inline Tensor layer_forward(const Layer& layer, const Tensor& input) {
    return layer_forward(layer, std::span<const Tensor>(&input, 1));
}

struct LayerGrads {
    std::vector<Tensor> inputs;  // one per input tensor
    std::vector<Tensor> params;  // aligned with layer.params
};

// Exact gradients of the scalar whose gradient at the layer output is
// grad_out.
LayerGrads layer_backward(const Layer& layer, std::span<const Tensor> inputs, const Tensor& grad_out);
inline LayerGrads layer_backward(const Layer& layer, const Tensor& input, const Tensor& grad_out) {
    return layer_backward(layer, std::span<const Tensor>(&input, 1), grad_out);
}

std::vector<int> layer_output_shape(const Layer& layer, std::span<const std::vector<int>> input_shapes);

}  // namespace gazelab
