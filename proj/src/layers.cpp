#include "gazelab/layers.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace gazelab {

const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Dense: return "dense";
        case LayerKind::Conv2d: return "conv2d";
        case LayerKind::Relu: return "relu";
        case LayerKind::Tanh: return "tanh";
        case LayerKind::Upsample2x: return "upsample2x";
        case LayerKind::ConcatBroadcast: return "concat-broadcast";
    }
    return "?";
}

Layer Layer::dense(int in_dim, int out_dim) {
    Layer l;
    l.kind = LayerKind::Dense;
    l.in_dim = in_dim;
    l.out_dim = out_dim;
    l.params = {Tensor({in_dim, out_dim}), Tensor({out_dim})};
    return l;
}

Layer Layer::conv2d(int in_ch, int out_ch, int ksize, int stride, int pad) {
    Layer l;
    l.kind = LayerKind::Conv2d;
    l.in_ch = in_ch;
    l.out_ch = out_ch;
    l.ksize = ksize;
    l.stride = stride;
    l.pad = pad;
    l.params = {Tensor({ksize, ksize, in_ch, out_ch}), Tensor({out_ch})};
    return l;
}

std::size_t Layer::param_count() const {
    switch (kind) {
        case LayerKind::Dense:
            return static_cast<std::size_t>(in_dim) * out_dim + out_dim;
        case LayerKind::Conv2d:
            return static_cast<std::size_t>(ksize) * ksize * in_ch * out_ch + out_ch;
        default:
            return 0;
    }
}

void init_layer_params(Layer& layer, Rng& rng) {
    double fan_in = 0, fan_out = 0;
    if (layer.kind == LayerKind::Dense) {
        fan_in = layer.in_dim;
        fan_out = layer.out_dim;
    } else if (layer.kind == LayerKind::Conv2d) {
        fan_in = static_cast<double>(layer.ksize) * layer.ksize * layer.in_ch;
        fan_out = static_cast<double>(layer.ksize) * layer.ksize * layer.out_ch;
    } else {
        return;
    }
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& w : layer.params[0].v) w = rng.uniform(-bound, bound);
    // biases stay zero
}

namespace {

[[noreturn]] void shape_error(const Layer& layer, const std::string& detail) {
    throw std::invalid_argument(std::string(layer_kind_name(layer.kind)) + ": " + detail);
}

void require_inputs(const Layer& layer, std::span<const Tensor> inputs, std::size_t n) {
    if (inputs.size() != n)
        shape_error(layer, "expects " + std::to_string(n) + " input(s), got " + std::to_string(inputs.size()));
}

int conv_out_extent(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

void require_conv_input(const Layer& l, const Tensor& x) {
    if (x.rank() != 3 || x.dim(2) != l.in_ch)
        shape_error(l, "input " + shape_str(x.shape) + " does not match [H,W," +
                           std::to_string(l.in_ch) + "]");
    if (conv_out_extent(x.dim(0), l.ksize, l.stride, l.pad) < 1 ||
        conv_out_extent(x.dim(1), l.ksize, l.stride, l.pad) < 1)
        shape_error(l, "input " + shape_str(x.shape) + " too small for kernel " +
                           std::to_string(l.ksize) + " stride " + std::to_string(l.stride));
}

// ---- vectorized inner kernels -------------------------------------------
// Accumulators must live in registers across the ic reduction; plain arrays
// bounce through the stack under gcc and the store-forward latency caps the
// whole pipeline, hence the explicit vector type.

typedef double v4 __attribute__((vector_size(32)));

inline v4 loadu(const double* p) {
    v4 v;
    std::memcpy(&v, p, sizeof(v4));
    return v;
}
inline void storeu(double* p, v4 v) { std::memcpy(p, &v, sizeof(v4)); }
inline v4 bcast(double a) { return v4{a, a, a, a}; }
inline double hsum(v4 v) { return (v[0] + v[1]) + (v[2] + v[3]); }

// out_px[oc] += sum_ic in_px[ic] * w[ic*OC + oc], oc-tiled.
inline void fma_px(const double* in_px, const double* wk, double* out_px, int IC, int OC) {
    int oc = 0;
    for (; oc + 16 <= OC; oc += 16) {
        v4 a0 = loadu(out_px + oc), a1 = loadu(out_px + oc + 4);
        v4 a2 = loadu(out_px + oc + 8), a3 = loadu(out_px + oc + 12);
        const double* wr = wk + oc;
        for (int ic = 0; ic < IC; ++ic, wr += OC) {
            const v4 av = bcast(in_px[ic]);
            a0 += av * loadu(wr);
            a1 += av * loadu(wr + 4);
            a2 += av * loadu(wr + 8);
            a3 += av * loadu(wr + 12);
        }
        storeu(out_px + oc, a0);
        storeu(out_px + oc + 4, a1);
        storeu(out_px + oc + 8, a2);
        storeu(out_px + oc + 12, a3);
    }
    for (; oc + 8 <= OC; oc += 8) {
        v4 a0 = loadu(out_px + oc), a1 = loadu(out_px + oc + 4);
        v4 b0 = {}, b1 = {};
        const double* wr = wk + oc;
        int ic = 0;
        for (; ic + 2 <= IC; ic += 2, wr += 2 * OC) {
            const v4 av = bcast(in_px[ic]);
            const v4 bv = bcast(in_px[ic + 1]);
            a0 += av * loadu(wr);
            a1 += av * loadu(wr + 4);
            b0 += bv * loadu(wr + OC);
            b1 += bv * loadu(wr + OC + 4);
        }
        if (ic < IC) {
            const v4 av = bcast(in_px[ic]);
            a0 += av * loadu(wr);
            a1 += av * loadu(wr + 4);
        }
        storeu(out_px + oc, a0 + b0);
        storeu(out_px + oc + 4, a1 + b1);
    }
    for (; oc < OC; ++oc) {
        double s0 = 0.0, s1 = 0.0;
        const double* wr = wk + oc;
        int ic = 0;
        for (; ic + 2 <= IC; ic += 2, wr += 2 * OC) {
            s0 += in_px[ic] * wr[0];
            s1 += in_px[ic + 1] * wr[OC];
        }
        if (ic < IC) s0 += in_px[ic] * wr[0];
        out_px[oc] += s0 + s1;
    }
}

// Per-pixel backward tap: accumulates gw rows and the gin dot products.
inline void bwd_px(const double* in_px, const double* g_px, const double* wk, double* gwk,
                   double* gin_px, int IC, int OC) {
    int oc = 0;
    for (; oc + 8 <= OC; oc += 8) {
        const v4 g0 = loadu(g_px + oc), g1 = loadu(g_px + oc + 4);
        const double* wr = wk + oc;
        double* gwr = gwk + oc;
        for (int ic = 0; ic < IC; ++ic, wr += OC, gwr += OC) {
            const v4 av = bcast(in_px[ic]);
            storeu(gwr, loadu(gwr) + av * g0);
            storeu(gwr + 4, loadu(gwr + 4) + av * g1);
            gin_px[ic] += hsum(loadu(wr) * g0 + loadu(wr + 4) * g1);
        }
    }
    for (; oc < OC; ++oc) {
        const double gv = g_px[oc];
        const double* wr = wk + oc;
        double* gwr = gwk + oc;
        for (int ic = 0; ic < IC; ++ic, wr += OC, gwr += OC) {
            *gwr += in_px[ic] * gv;
            gin_px[ic] += *wr * gv;
        }
    }
}

Tensor dense_forward(const Layer& l, const Tensor& x) {
    if (static_cast<int>(x.numel()) != l.in_dim)
        shape_error(l, "input " + shape_str(x.shape) + " has " + std::to_string(x.numel()) +
                           " elements, layer expects " + std::to_string(l.in_dim));
    Tensor out({l.out_dim});
    for (int o = 0; o < l.out_dim; ++o) out.v[o] = l.params[1].v[o];
    fma_px(x.v.data(), l.params[0].v.data(), out.v.data(), l.in_dim, l.out_dim);
    return out;
}

LayerGrads dense_backward(const Layer& l, const Tensor& x, const Tensor& g) {
    if (static_cast<int>(g.numel()) != l.out_dim)
        shape_error(l, "grad_out " + shape_str(g.shape) + " does not match output size " +
                           std::to_string(l.out_dim));
    LayerGrads grads;
    grads.params = {Tensor({l.in_dim, l.out_dim}), Tensor({l.out_dim})};
    Tensor gx(x.shape);
    for (int o = 0; o < l.out_dim; ++o) grads.params[1].v[o] = g.v[o];
    bwd_px(x.v.data(), g.v.data(), l.params[0].v.data(), grads.params[0].v.data(), gx.v.data(),
           l.in_dim, l.out_dim);
    grads.inputs = {std::move(gx)};
    return grads;
}

Tensor conv2d_forward(const Layer& l, const Tensor& x) {
    require_conv_input(l, x);
    const int H = x.dim(0), W = x.dim(1), IC = l.in_ch, OC = l.out_ch;
    const int K = l.ksize, S = l.stride, P = l.pad;
    const int OH = conv_out_extent(H, K, S, P), OW = conv_out_extent(W, K, S, P);
    const Tensor& Wt = l.params[0];
    const Tensor& b = l.params[1];
    Tensor out({OH, OW, OC});
    for (int oy = 0; oy < OH; ++oy) {
        for (int ox = 0; ox < OW; ++ox) {
            double* out_px = &out.at(oy, ox, 0);
            for (int oc = 0; oc < OC; ++oc) out_px[oc] = b.v[oc];
            for (int ky = 0; ky < K; ++ky) {
                const int iy = oy * S - P + ky;
                if (iy < 0 || iy >= H) continue;
                for (int kx = 0; kx < K; ++kx) {
                    const int ix = ox * S - P + kx;
                    if (ix < 0 || ix >= W) continue;
                    fma_px(&x.at(iy, ix, 0), &Wt.v[(static_cast<std::size_t>(ky) * K + kx) * IC * OC],
                           out_px, IC, OC);
                }
            }
        }
    }
    return out;
}

LayerGrads conv2d_backward(const Layer& l, const Tensor& x, const Tensor& g) {
    require_conv_input(l, x);
    const int H = x.dim(0), W = x.dim(1), IC = l.in_ch, OC = l.out_ch;
    const int K = l.ksize, S = l.stride, P = l.pad;
    const int OH = conv_out_extent(H, K, S, P), OW = conv_out_extent(W, K, S, P);
    if (g.rank() != 3 || g.dim(0) != OH || g.dim(1) != OW || g.dim(2) != OC)
        shape_error(l, "grad_out " + shape_str(g.shape) + " does not match output [" +
                           std::to_string(OH) + "," + std::to_string(OW) + "," + std::to_string(OC) + "]");
    const Tensor& Wt = l.params[0];
    LayerGrads grads;
    grads.params = {Tensor({K, K, IC, OC}), Tensor({OC})};
    Tensor gin({H, W, IC});
    Tensor& gW = grads.params[0];
    Tensor& gb = grads.params[1];
    for (int oy = 0; oy < OH; ++oy) {
        for (int ox = 0; ox < OW; ++ox) {
            const double* g_px = &g.at(oy, ox, 0);
            for (int oc = 0; oc < OC; ++oc) gb.v[oc] += g_px[oc];
            for (int ky = 0; ky < K; ++ky) {
                const int iy = oy * S - P + ky;
                if (iy < 0 || iy >= H) continue;
                for (int kx = 0; kx < K; ++kx) {
                    const int ix = ox * S - P + kx;
                    if (ix < 0 || ix >= W) continue;
                    const std::size_t koff = (static_cast<std::size_t>(ky) * K + kx) * IC * OC;
                    bwd_px(&x.at(iy, ix, 0), g_px, &Wt.v[koff], &gW.v[koff], &gin.at(iy, ix, 0), IC, OC);
                }
            }
        }
    }
    grads.inputs = {std::move(gin)};
    return grads;
}

Tensor upsample2x_forward(const Layer& l, const Tensor& x) {
    if (x.rank() != 3) shape_error(l, "input " + shape_str(x.shape) + " must be [H,W,C]");
    const int H = x.dim(0), W = x.dim(1), C = x.dim(2);
    Tensor out({2 * H, 2 * W, C});
    for (int y = 0; y < 2 * H; ++y)
        for (int x2 = 0; x2 < 2 * W; ++x2) {
            const double* src = &x.at(y / 2, x2 / 2, 0);
            double* dst = &out.at(y, x2, 0);
            for (int c = 0; c < C; ++c) dst[c] = src[c];
        }
    return out;
}

LayerGrads upsample2x_backward(const Layer& l, const Tensor& x, const Tensor& g) {
    const int H = x.dim(0), W = x.dim(1), C = x.dim(2);
    if (g.rank() != 3 || g.dim(0) != 2 * H || g.dim(1) != 2 * W || g.dim(2) != C)
        shape_error(l, "grad_out " + shape_str(g.shape) + " does not match upsampled " + shape_str(x.shape));
    LayerGrads grads;
    Tensor gin({H, W, C});
    for (int y = 0; y < 2 * H; ++y)
        for (int x2 = 0; x2 < 2 * W; ++x2) {
            const double* gp = &g.at(y, x2, 0);
            double* dst = &gin.at(y / 2, x2 / 2, 0);
            for (int c = 0; c < C; ++c) dst[c] += gp[c];
        }
    grads.inputs = {std::move(gin)};
    return grads;
}

Tensor concat_broadcast_forward(const Layer& l, std::span<const Tensor> inputs) {
    if (inputs.size() < 2) shape_error(l, "needs a [H,W,C] map plus at least one vector");
    const Tensor& map = inputs[0];
    if (map.rank() != 3) shape_error(l, "first input " + shape_str(map.shape) + " must be [H,W,C]");
    const int H = map.dim(0), W = map.dim(1), C0 = map.dim(2);
    int extra = 0;
    for (std::size_t i = 1; i < inputs.size(); ++i) {
        if (inputs[i].rank() != 1)
            shape_error(l, "input " + std::to_string(i) + " " + shape_str(inputs[i].shape) + " must be a vector");
        extra += inputs[i].dim(0);
    }
    Tensor out({H, W, C0 + extra});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double* dst = &out.at(y, x, 0);
            const double* src = &map.at(y, x, 0);
            int c = 0;
            for (; c < C0; ++c) dst[c] = src[c];
            for (std::size_t i = 1; i < inputs.size(); ++i)
                for (int j = 0; j < inputs[i].dim(0); ++j) dst[c++] = inputs[i].v[j];
        }
    return out;
}

LayerGrads concat_broadcast_backward(const Layer& l, std::span<const Tensor> inputs, const Tensor& g) {
    const Tensor& map = inputs[0];
    const int H = map.dim(0), W = map.dim(1), C0 = map.dim(2);
    int total = C0;
    for (std::size_t i = 1; i < inputs.size(); ++i) total += inputs[i].dim(0);
    if (g.rank() != 3 || g.dim(0) != H || g.dim(1) != W || g.dim(2) != total)
        shape_error(l, "grad_out " + shape_str(g.shape) + " does not match concat output");
    LayerGrads grads;
    grads.inputs.emplace_back(Tensor({H, W, C0}));
    for (std::size_t i = 1; i < inputs.size(); ++i) grads.inputs.emplace_back(Tensor(inputs[i].shape));
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double* gp = &g.at(y, x, 0);
            double* gmap = &grads.inputs[0].at(y, x, 0);
            int c = 0;
            for (; c < C0; ++c) gmap[c] = gp[c];
            for (std::size_t i = 1; i < inputs.size(); ++i)
                for (int j = 0; j < inputs[i].dim(0); ++j) grads.inputs[i].v[j] += gp[c++];
        }
    return grads;
}

}  // namespace

Tensor layer_forward(const Layer& layer, std::span<const Tensor> inputs) {
    switch (layer.kind) {
        case LayerKind::Dense:
            require_inputs(layer, inputs, 1);
            return dense_forward(layer, inputs[0]);
        case LayerKind::Conv2d:
            require_inputs(layer, inputs, 1);
            return conv2d_forward(layer, inputs[0]);
        case LayerKind::Relu: {
            require_inputs(layer, inputs, 1);
            Tensor out = inputs[0];
            for (double& x : out.v) x = x > 0.0 ? x : 0.0;
            return out;
        }
        case LayerKind::Tanh: {
            require_inputs(layer, inputs, 1);
            Tensor out = inputs[0];
            for (double& x : out.v) x = std::tanh(x);
            return out;
        }
        case LayerKind::Upsample2x:
            require_inputs(layer, inputs, 1);
            return upsample2x_forward(layer, inputs[0]);
        case LayerKind::ConcatBroadcast:
            return concat_broadcast_forward(layer, inputs);
    }
    throw std::logic_error("unreachable layer kind");
}

LayerGrads layer_backward(const Layer& layer, std::span<const Tensor> inputs, const Tensor& grad_out) {
    switch (layer.kind) {
        case LayerKind::Dense:
            require_inputs(layer, inputs, 1);
            return dense_backward(layer, inputs[0], grad_out);
        case LayerKind::Conv2d:
            require_inputs(layer, inputs, 1);
            return conv2d_backward(layer, inputs[0], grad_out);
        case LayerKind::Relu: {
            require_inputs(layer, inputs, 1);
            require_same_shape(inputs[0], grad_out, "relu backward");
            LayerGrads grads;
            Tensor gin(inputs[0].shape);
            for (std::size_t i = 0; i < gin.numel(); ++i)
                gin.v[i] = inputs[0].v[i] > 0.0 ? grad_out.v[i] : 0.0;
            grads.inputs = {std::move(gin)};
            return grads;
        }
        case LayerKind::Tanh: {
            require_inputs(layer, inputs, 1);
            require_same_shape(inputs[0], grad_out, "tanh backward");
            LayerGrads grads;
            Tensor gin(inputs[0].shape);
            for (std::size_t i = 0; i < gin.numel(); ++i) {
                const double t = std::tanh(inputs[0].v[i]);
                gin.v[i] = grad_out.v[i] * (1.0 - t * t);
            }
            grads.inputs = {std::move(gin)};
            return grads;
        }
        case LayerKind::Upsample2x:
            require_inputs(layer, inputs, 1);
            return upsample2x_backward(layer, inputs[0], grad_out);
        case LayerKind::ConcatBroadcast:
            return concat_broadcast_backward(layer, inputs, grad_out);
    }
    throw std::logic_error("unreachable layer kind");
}

std::vector<int> layer_output_shape(const Layer& layer, std::span<const std::vector<int>> input_shapes) {
    switch (layer.kind) {
        case LayerKind::Dense:
            return {layer.out_dim};
        case LayerKind::Conv2d: {
            const auto& s = input_shapes[0];
            return {conv_out_extent(s[0], layer.ksize, layer.stride, layer.pad),
                    conv_out_extent(s[1], layer.ksize, layer.stride, layer.pad), layer.out_ch};
        }
        case LayerKind::Relu:
        case LayerKind::Tanh:
            return input_shapes[0];
        case LayerKind::Upsample2x: {
            const auto& s = input_shapes[0];
            return {2 * s[0], 2 * s[1], s[2]};
        }
        case LayerKind::ConcatBroadcast: {
            int extra = 0;
            for (std::size_t i = 1; i < input_shapes.size(); ++i) extra += input_shapes[i][0];
            const auto& s = input_shapes[0];
            return {s[0], s[1], s[2] + extra};
        }
    }
    throw std::logic_error("unreachable layer kind");
}

}  // namespace gazelab
